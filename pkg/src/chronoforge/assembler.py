"""Yearly corpus assembly: domain ratio split, sampling, packing, manifest.

The news:wiki token split (default 0.6:0.4) is applied to the total budget
with the wiki target rounded to nearest and news absorbing the rounding
remainder. Each domain is sampled by the sampler module, the union is
shuffled with a seeded RNG, and a manifest captures every input, parameter
and count needed to rebuild the corpus byte for byte.
"""

from __future__ import annotations

import json
import logging
import random
import struct
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from . import __version__
from .records import DocRecord, day_of
from .sampler import BudgetState, CutoffSpec, compute_weights, sample_to_budget, wiki_select
from .tokenizer import tokenizer_digest

logger = logging.getLogger("chronoforge.assembler")

DEFAULT_SEQ_LEN = 1024
TOKENS_PER_PARAM = 20
POOL_SHORTFALL_TOLERANCE = 0.01


@dataclass
class SamplingConfig:
    year: int
    cutoff: CutoffSpec
    t_total: int
    seed: int = 0
    ratio_news: float = 0.6
    ratio_wiki: float = 0.4
    date_policy: str = "mid-year"

    def validate(self) -> list[str]:
        problems = []
        if self.ratio_news <= 0 or self.ratio_wiki <= 0:
            problems.append("domain ratios must both be positive")
        if abs(self.ratio_news + self.ratio_wiki - 1.0) > 1e-9:
            problems.append(
                f"domain ratios must sum to 1, got {self.ratio_news + self.ratio_wiki}"
            )
        if self.t_total <= 0:
            problems.append("t_total must be positive")
        return problems


def domain_targets(t_total: int, ratio_news: float, ratio_wiki: float) -> tuple[int, int]:
    """(news_target, wiki_target); news absorbs the rounding remainder."""
    wiki = round(ratio_wiki * t_total)
    return t_total - wiki, wiki


def chinchilla_budget(param_count: int) -> int:
    """Token budget for compute-optimal training at 20 tokens per parameter."""
    if param_count <= 0:
        raise ValueError("param_count must be positive")
    return TOKENS_PER_PARAM * param_count


@dataclass
class CorpusManifest:
    year: int
    config: dict
    domains: dict
    vital_article_count: int
    tokenizer_digest: str
    date_policy: str
    seed: int
    warnings: list[str]
    dedup: dict
    tool_version: str = __version__

    def to_dict(self) -> dict:
        # Fixed key order keeps manifest bytes comparable across runs.
        return {
            "tool_version": self.tool_version,
            "year": self.year,
            "config": self.config,
            "seed": self.seed,
            "tokenizer_digest": self.tokenizer_digest,
            "date_policy": self.date_policy,
            "vital_article_count": self.vital_article_count,
            "domains": self.domains,
            "dedup": self.dedup,
            "warnings": self.warnings,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"


def _domain_entry(target: int, state: BudgetState, pool_size: int, accepted_ids: list) -> dict:
    return {
        "target_tokens": target,
        "achieved_tokens": state.t_current,
        "residual_tokens": state.residual,
        "doc_count": len(state.accepted),
        "pool_size": pool_size,
        "rejected_overshoot": state.rejected_overshoot_count,
        "pool_exhausted": state.pool_exhausted,
        "accepted_ids": accepted_ids,
    }


def build_corpus(
    config: SamplingConfig,
    news_pool: Sequence[DocRecord],
    wiki_pool: Sequence[DocRecord],
    vital_ids: Iterable[str],
    tokenizer,
    dedup_stats: dict | None = None,
) -> tuple[list[DocRecord], CorpusManifest]:
    """Sample both domains to their targets and emit the shuffled corpus.

    Pools must already be deduplicated. Token counts are (re)computed here
    with the configured tokenizer so sampling and packing agree.
    """
    problems = config.validate()
    if problems:
        raise ValueError("; ".join(problems))
    news_target, wiki_target = domain_targets(config.t_total, config.ratio_news, config.ratio_wiki)
    warnings: list[str] = []

    for doc in list(news_pool) + list(wiki_pool):
        doc.token_count = tokenizer.count_tokens(doc.text)

    # News: recency-weighted draws over the in-window pool.
    eligible_news = [
        d for d in news_pool
        if d.token_count > 0 and config.cutoff.in_window(day_of(d.date))
    ]
    news_by_id = {d.doc_id: d for d in eligible_news}
    news_counts = {d.doc_id: d.token_count for d in eligible_news}
    if eligible_news:
        table = compute_weights(
            [(d.doc_id, config.cutoff.age_days(day_of(d.date))) for d in eligible_news],
            config.cutoff,
        )
        news_state = sample_to_budget(table, news_target, news_counts, _stage_seed(config.seed, "news"))
    else:
        news_state = BudgetState(t_needed=news_target, pool_exhausted=True)

    # Wiki: vital pages first, then uniform draws.
    wiki_by_id = {d.doc_id: d for d in wiki_pool if d.token_count > 0}
    wiki_counts = {d.doc_id: d.token_count for d in wiki_by_id.values()}
    requested_vital = set(str(v) for v in vital_ids)
    vital = sorted(requested_vital & set(wiki_by_id))
    missing_vital = requested_vital - set(wiki_by_id)
    if missing_vital:
        warnings.append(
            f"{len(missing_vital)} vital ids absent from the wiki pool (e.g. "
            f"{sorted(missing_vital)[:3]})"
        )
    if wiki_by_id:
        wiki_state = wiki_select(
            list(wiki_by_id), vital, wiki_target, wiki_counts, _stage_seed(config.seed, "wiki")
        )
    else:
        wiki_state = BudgetState(t_needed=wiki_target, pool_exhausted=True)

    for name, state, target in (("news", news_state, news_target), ("wiki", wiki_state, wiki_target)):
        if target > 0 and state.t_current < (1 - POOL_SHORTFALL_TOLERANCE) * target:
            msg = (
                f"{name} pool too small: achieved {state.t_current} of {target} target tokens"
            )
            warnings.append(msg)
            logger.warning(msg)

    docs = [news_by_id[i] for i in news_state.accepted] + [wiki_by_id[i] for i in wiki_state.accepted]
    random.Random(_stage_seed(config.seed, "shuffle")).shuffle(docs)

    manifest = CorpusManifest(
        year=config.year,
        config={
            "t_total": config.t_total,
            "ratio_news": config.ratio_news,
            "ratio_wiki": config.ratio_wiki,
            "cutoff_date": config.cutoff.cutoff_date.isoformat(),
            "window_days": config.cutoff.window_days,
            "tau_days": config.cutoff.tau_days,
        },
        domains={
            "news": _domain_entry(news_target, news_state, len(eligible_news), list(news_state.accepted)),
            "wiki": _domain_entry(wiki_target, wiki_state, len(wiki_by_id), list(wiki_state.accepted)),
        },
        vital_article_count=len(vital),
        tokenizer_digest=tokenizer_digest(tokenizer),
        date_policy=config.date_policy,
        seed=config.seed,
        warnings=warnings,
        dedup=dedup_stats or {},
    )
    return docs, manifest


def _stage_seed(seed: int, stage: str) -> str:
    # Distinct deterministic RNG streams per pipeline stage.
    return f"{seed}:{stage}"


@dataclass
class PackedSequence:
    token_ids: list[int]
    members: list[tuple] = field(default_factory=list)  # (doc_id, start, end)

    @property
    def length(self) -> int:
        return len(self.token_ids)


def pack_sequences(
    docs: Sequence[DocRecord],
    tokenizer,
    seq_len: int = DEFAULT_SEQ_LEN,
    separator_id: int | None = None,
) -> list[PackedSequence]:
    """Greedy in-order packing into sequences of at most ``seq_len`` tokens.

    A document joins the open sequence when it fits after one separator
    token; otherwise the sequence is flushed. Documents longer than
    ``seq_len`` are split into consecutive blocks, never truncated, so
    sum(doc tokens) + number of separators == sum(sequence lengths).
    """
    if seq_len <= 0:
        raise ValueError("seq_len must be positive")
    sep = tokenizer.separator_id if separator_id is None else separator_id
    sequences: list[PackedSequence] = []
    current = PackedSequence(token_ids=[])

    def flush():
        nonlocal current
        if current.token_ids:
            sequences.append(current)
            current = PackedSequence(token_ids=[])

    for doc in docs:
        ids = tokenizer.encode(doc.text)
        if not ids:
            continue
        if len(ids) > seq_len:
            flush()
            for start in range(0, len(ids), seq_len):
                block = ids[start : start + seq_len]
                piece = PackedSequence(token_ids=list(block), members=[(doc.doc_id, 0, len(block))])
                if len(block) == seq_len:
                    sequences.append(piece)
                else:
                    current = piece
            continue
        if not current.token_ids:
            current.token_ids = list(ids)
            current.members = [(doc.doc_id, 0, len(ids))]
        elif len(current.token_ids) + 1 + len(ids) <= seq_len:
            current.token_ids.append(sep)
            start = len(current.token_ids)
            current.token_ids.extend(ids)
            current.members.append((doc.doc_id, start, start + len(ids)))
        else:
            flush()
            current.token_ids = list(ids)
            current.members = [(doc.doc_id, 0, len(ids))]
    flush()
    return sequences


def write_packed_binary(sequences: Sequence[PackedSequence], bin_path, index_path, seq_len: int) -> None:
    """Little-endian uint32 token ids, sequences concatenated; lengths sidecar."""
    with open(bin_path, "wb") as fh:
        for seq in sequences:
            fh.write(struct.pack(f"<{len(seq.token_ids)}I", *seq.token_ids))
    index = {"seq_len": seq_len, "lengths": [seq.length for seq in sequences]}
    with open(index_path, "w", encoding="utf-8") as fh:
        json.dump(index, fh)
        fh.write("\n")
