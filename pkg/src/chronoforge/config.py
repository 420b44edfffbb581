"""Experiment configuration: JSON schema, loading, full-pass validation.

Validation reports every violation at once instead of failing fast, so a
12-year run config can be fixed in one edit cycle. Flags on the CLI override
scalar fields after loading.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .news_ingest import DATE_POLICIES, SPLIT_MODES

DEFAULT_WINDOW_DAYS = 1826
DEFAULT_SEQ_LEN = 1024
DEFAULT_SMOOTHING_K = 0.01


@dataclass
class ExperimentConfig:
    years: list[int]
    wiki_dump: Path
    news_root: Path
    out_root: Path
    vital_root: Path | None = None
    seed: int = 0
    t_total: int = 10_000
    ratio_news: float = 0.6
    ratio_wiki: float = 0.4
    window_days: int = DEFAULT_WINDOW_DAYS
    tau_days: int | None = None
    seq_len: int = DEFAULT_SEQ_LEN
    date_policy: str = "mid-year"
    news_split: str = "blank-line"
    namespaces: list[int] = field(default_factory=lambda: [0])
    tokenizer: dict = field(default_factory=lambda: {"kind": "whitespace"})
    eval_block: dict | None = None
    base_dir: Path = Path(".")

    def validate(self) -> list[str]:
        """Every schema/invariant violation, one diagnostic per problem."""
        problems: list[str] = []
        if not self.years:
            problems.append("years: at least one year is required")
        elif any(b <= a for a, b in zip(self.years, self.years[1:])):
            problems.append(f"years: must be strictly increasing, got {self.years}")
        if self.ratio_news <= 0 or self.ratio_wiki <= 0:
            problems.append("ratio_news/ratio_wiki: both domain ratios must be positive")
        elif abs(self.ratio_news + self.ratio_wiki - 1.0) > 1e-9:
            problems.append(
                f"ratio_news/ratio_wiki: ratios must sum to 1, got "
                f"{self.ratio_news + self.ratio_wiki}"
            )
        if self.t_total <= 0:
            problems.append(f"t_total: must be positive, got {self.t_total}")
        if self.window_days <= 0:
            problems.append(f"window_days: must be positive, got {self.window_days}")
        if self.tau_days is not None and self.tau_days <= 0:
            problems.append(f"tau_days: must be positive, got {self.tau_days}")
        if self.seq_len <= 0:
            problems.append(f"seq_len: must be positive, got {self.seq_len}")
        if self.date_policy not in DATE_POLICIES:
            problems.append(f"date_policy: {self.date_policy!r} not in {DATE_POLICIES}")
        if self.news_split not in SPLIT_MODES:
            problems.append(f"news_split: {self.news_split!r} not in {SPLIT_MODES}")
        if not self.wiki_dump.exists():
            problems.append(f"paths.wiki_dump: {self.wiki_dump} does not exist")
        if not self.news_root.is_dir():
            problems.append(f"paths.news_root: {self.news_root} is not a directory")
        if self.vital_root is not None and not self.vital_root.is_dir():
            problems.append(f"paths.vital_root: {self.vital_root} is not a directory")
        problems.extend(self._validate_tokenizer())
        problems.extend(self._validate_eval())
        return problems

    def _validate_tokenizer(self) -> list[str]:
        tok = self.tokenizer
        if "path" in tok:
            path = self.base_dir / tok["path"]
            if not path.exists():
                return [f"tokenizer.path: {path} does not exist"]
            return []
        if tok.get("kind") == "whitespace":
            return []
        return [f"tokenizer: need a 'path' to a trained spec or kind 'whitespace', got {tok}"]

    def _validate_eval(self) -> list[str]:
        if self.eval_block is None:
            return []
        problems = []
        ev = self.eval_block
        if "events_csv" in ev and not (self.base_dir / ev["events_csv"]).exists():
            problems.append(f"eval.events_csv: {self.base_dir / ev['events_csv']} does not exist")
        if "alpha" in ev and ev["alpha"] <= 0:
            problems.append(f"eval.alpha: must be positive, got {ev['alpha']}")
        if "k" in ev and ev["k"] <= 0:
            problems.append(f"eval.k: must be positive, got {ev['k']}")
        return problems


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    base = path.parent
    paths = obj.get("paths", {})

    def _path(key, default=None):
        value = paths.get(key, default)
        return None if value is None else base / value

    return ExperimentConfig(
        years=[int(y) for y in obj.get("years", [])],
        wiki_dump=_path("wiki_dump", "wiki_dump.xml"),
        news_root=_path("news_root", "news"),
        out_root=_path("out_root", "out"),
        vital_root=_path("vital_root"),
        seed=int(obj.get("seed", 0)),
        t_total=int(obj.get("t_total", 10_000)),
        ratio_news=float(obj.get("ratio_news", 0.6)),
        ratio_wiki=float(obj.get("ratio_wiki", 0.4)),
        window_days=int(obj.get("window_days", DEFAULT_WINDOW_DAYS)),
        tau_days=None if obj.get("tau_days") is None else int(obj["tau_days"]),
        seq_len=int(obj.get("seq_len", DEFAULT_SEQ_LEN)),
        date_policy=obj.get("date_policy", "mid-year"),
        news_split=obj.get("news_split", "blank-line"),
        namespaces=[int(n) for n in obj.get("namespaces", [0])],
        tokenizer=obj.get("tokenizer", {"kind": "whitespace"}),
        eval_block=obj.get("eval"),
        base_dir=base,
    )


def validate_config(path) -> list[str]:
    """Diagnostics for a config file; unreadable file raises, bad JSON reports."""
    try:
        config = load_config(path)
    except OSError:
        raise
    except (json.JSONDecodeError, ValueError, TypeError, KeyError) as exc:
        return [f"config does not parse: {exc}"]
    return config.validate()
