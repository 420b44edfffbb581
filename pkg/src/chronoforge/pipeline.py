"""End-to-end orchestration: ingest → dedup → sample/assemble → eval.

Years run independently; within a year the stages run in order. Every stage
records a signature (input digests + parameters) and output digests in a
stage manifest next to its outputs, and is skipped on rerun when nothing
changed, so a completed experiment reruns as a no-op and a failed one resumes
at the first stale stage. A stage failure leaves partial outputs in place
plus a FAILED marker at the output root.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from datetime import date, timedelta
from pathlib import Path

from .assembler import SamplingConfig, build_corpus, pack_sequences, write_packed_binary
from .config import ExperimentConfig
from .dedup import DigestIndex, dedup_stream
from .evalsuite import (
    cta_adapt,
    count_occurrences,
    event_study,
    read_events_csv,
    train_scorer,
    zero_context_ppl,
)
from .news_ingest import ingest_year, news_doc_to_record, NewsIngestReport
from .records import read_jsonl, write_jsonl
from .sampler import CutoffSpec
from .tokenizer import WhitespaceTokenizer, load_tokenizer
from .wiki_ingest import IngestReport, stream_dump

logger = logging.getLogger("chronoforge.pipeline")

FAILED_MARKER = "FAILED"


class PipelineError(Exception):
    def __init__(self, stage: str, year, cause: BaseException):
        super().__init__(f"stage {stage!r} (year={year}) failed: {cause}")
        self.stage = stage
        self.year = year
        self.cause = cause


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def log_event(stage: str, year, **fields) -> None:
    logger.info("", extra={"stage": stage, "year": year, "counters": fields})


class StageRunner:
    """Runs a stage unless its signature and outputs are already current."""

    def __init__(self, state_dir: Path):
        self.state_dir = Path(state_dir)
        self.ran: list[str] = []
        self.skipped: list[str] = []

    def _manifest_path(self, name: str) -> Path:
        return self.state_dir / f"_stage_{name}.json"

    def run(self, name: str, year, inputs, params: dict, outputs, fn) -> None:
        inputs = [Path(p) for p in inputs]
        outputs = [Path(p) for p in outputs]
        # Keys carry the position so same-named inputs from different
        # directories (e.g. news bucket files) cannot shadow each other.
        signature = {
            "params": params,
            "inputs": {f"{i}:{p.name}": file_digest(p) for i, p in enumerate(inputs)},
        }
        manifest_path = self._manifest_path(name)
        if manifest_path.exists():
            try:
                recorded = json.loads(manifest_path.read_text())
            except json.JSONDecodeError:
                recorded = {}
            if recorded.get("signature") == signature and all(
                p.exists() and file_digest(p) == d
                for p, d in zip(outputs, recorded.get("outputs", {}).values())
            ) and list(recorded.get("outputs", {})) == [p.name for p in outputs]:
                self.skipped.append(name)
                log_event(name, year, skipped=True)
                return
        try:
            fn()
        except Exception as exc:
            raise PipelineError(name, year, exc) from exc
        manifest_path.parent.mkdir(parents=True, exist_ok=True)
        manifest_path.write_text(
            json.dumps(
                {
                    "signature": signature,
                    "outputs": {p.name: file_digest(p) for p in outputs},
                },
                indent=2,
            )
            + "\n"
        )
        self.ran.append(name)
        log_event(name, year, completed=True)


def _load_pipeline_tokenizer(config: ExperimentConfig):
    if "path" in config.tokenizer:
        return load_tokenizer(config.base_dir / config.tokenizer["path"])
    return WhitespaceTokenizer()


def _tokenizer_input(config: ExperimentConfig) -> list[Path]:
    if "path" in config.tokenizer:
        return [config.base_dir / config.tokenizer["path"]]
    return []


def _news_bucket_years(config: ExperimentConfig, year: int) -> list[int]:
    cutoff = date(year, 12, 31)
    start_year = (cutoff - timedelta(days=config.window_days)).year
    buckets = []
    for bucket in range(start_year, year + 1):
        if (config.news_root / str(bucket)).is_dir():
            buckets.append(bucket)
    return buckets


def run_pipeline(config: ExperimentConfig, only_years=None) -> dict:
    """Execute all configured years plus the optional eval block.

    Returns a summary dict {year: {stage: "ran"|"skipped"}}. Raises
    PipelineError on the first failing stage after writing the FAILED marker.
    """
    problems = config.validate()
    if problems:
        raise ValueError("invalid config: " + "; ".join(problems))
    years = [y for y in config.years if only_years is None or y in set(only_years)]
    config.out_root.mkdir(parents=True, exist_ok=True)
    marker = config.out_root / FAILED_MARKER
    if marker.exists():
        marker.unlink()

    summary: dict = {}
    try:
        for year in years:
            summary[year] = _run_year(config, year)
        if config.eval_block is not None:
            summary["eval"] = _run_eval(config, years)
    except PipelineError as exc:
        marker.write_text(
            json.dumps({"stage": exc.stage, "year": exc.year, "error": str(exc.cause)}) + "\n"
        )
        raise
    return summary


def _run_year(config: ExperimentConfig, year: int) -> dict:
    year_dir = config.out_root / str(year)
    year_dir.mkdir(parents=True, exist_ok=True)
    runner = StageRunner(year_dir)
    tokenizer = _load_pipeline_tokenizer(config)
    cutoff = CutoffSpec(date(year, 12, 31), config.window_days, config.tau_days)

    wiki_raw = year_dir / "wiki_raw.jsonl"
    wiki_report_path = year_dir / "wiki_ingest_report.json"

    def do_wiki():
        report = IngestReport()
        with open(wiki_raw, "w", encoding="utf-8", newline="\n") as fh:
            for page in stream_dump(
                config.wiki_dump,
                cutoff.cutoff_date,
                namespace_filter=config.namespaces,
                report=report,
            ):
                fh.write(page.to_doc_record().to_json() + "\n")
        payload = report.to_dict()
        wiki_report_path.write_text(json.dumps(payload, indent=2) + "\n")
        log_event("wiki_ingest", year, **{k: v for k, v in payload.items() if isinstance(v, int)})

    runner.run(
        "wiki_ingest",
        year,
        inputs=[config.wiki_dump],
        params={"cutoff": cutoff.cutoff_date.isoformat(), "ns": config.namespaces},
        outputs=[wiki_raw, wiki_report_path],
        fn=do_wiki,
    )

    news_raw = year_dir / "news_raw.jsonl"
    news_report_path = year_dir / "news_ingest_report.json"
    buckets = _news_bucket_years(config, year)
    bucket_files = sorted(
        p for b in buckets for p in (config.news_root / str(b)).iterdir() if p.is_file()
    )

    def do_news():
        report = NewsIngestReport()
        with open(news_raw, "w", encoding="utf-8", newline="\n") as fh:
            for bucket in buckets:
                for doc in ingest_year(config.news_root / str(bucket), bucket, config.news_split, report):
                    rec = news_doc_to_record(doc, config.date_policy, config.seed)
                    fh.write(rec.to_json() + "\n")
        news_report_path.write_text(json.dumps(report.to_dict(), indent=2) + "\n")
        log_event("news_ingest", year, buckets=len(buckets), **report.to_dict())

    runner.run(
        "news_ingest",
        year,
        inputs=bucket_files,
        params={
            "buckets": buckets,
            "split": config.news_split,
            "date_policy": config.date_policy,
            "seed": config.seed,
        },
        outputs=[news_raw, news_report_path],
        fn=do_news,
    )

    deduped = {}
    for domain, raw_path in (("wiki", wiki_raw), ("news", news_raw)):
        out_path = year_dir / f"{domain}_dedup.jsonl"
        report_path = year_dir / f"{domain}_dedup_report.json"
        deduped[domain] = (out_path, report_path)

        def do_dedup(raw_path=raw_path, out_path=out_path, report_path=report_path, domain=domain):
            index = DigestIndex(scope_key=domain)
            with open(raw_path, encoding="utf-8") as src, open(
                out_path, "w", encoding="utf-8", newline="\n"
            ) as dst:
                write_jsonl(dedup_stream(read_jsonl(src), domain, index), dst)
            report_path.write_text(json.dumps(index.to_dict(), indent=2) + "\n")
            log_event("dedup", year, domain=domain, kept=index.kept, dropped=index.dropped)

        runner.run(
            f"dedup_{domain}",
            year,
            inputs=[raw_path],
            params={"scope": domain},
            outputs=[out_path, report_path],
            fn=do_dedup,
        )

    corpus_path = year_dir / "corpus.jsonl"
    manifest_path = year_dir / "manifest.json"
    packed_path = year_dir / "packed.bin"
    packed_index_path = year_dir / "packed.idx.json"
    vital_path = None
    if config.vital_root is not None:
        candidate = config.vital_root / f"{year}.txt"
        if candidate.exists():
            vital_path = candidate
        else:
            logger.warning("no vital list for %s at %s; assembling without", year, candidate)

    def do_assemble():
        with open(deduped["news"][0], encoding="utf-8") as fh:
            news_pool = list(read_jsonl(fh))
        with open(deduped["wiki"][0], encoding="utf-8") as fh:
            wiki_pool = list(read_jsonl(fh))
        vital_ids = set()
        if vital_path is not None:
            vital_ids = {
                line.strip() for line in vital_path.read_text().splitlines() if line.strip()
            }
        dedup_stats = {
            domain: json.loads(deduped[domain][1].read_text()) for domain in ("news", "wiki")
        }
        sampling = SamplingConfig(
            year=year,
            cutoff=cutoff,
            t_total=config.t_total,
            seed=config.seed,
            ratio_news=config.ratio_news,
            ratio_wiki=config.ratio_wiki,
            date_policy=config.date_policy,
        )
        docs, manifest = build_corpus(
            sampling, news_pool, wiki_pool, vital_ids, tokenizer, dedup_stats
        )
        with open(corpus_path, "w", encoding="utf-8", newline="\n") as fh:
            write_jsonl(docs, fh)
        manifest_path.write_text(manifest.to_json())
        sequences = pack_sequences(docs, tokenizer, config.seq_len)
        write_packed_binary(sequences, packed_path, packed_index_path, config.seq_len)
        log_event(
            "assemble",
            year,
            docs=len(docs),
            news_tokens=manifest.domains["news"]["achieved_tokens"],
            wiki_tokens=manifest.domains["wiki"]["achieved_tokens"],
            sequences=len(sequences),
        )

    runner.run(
        "assemble",
        year,
        inputs=[deduped["news"][0], deduped["news"][1], deduped["wiki"][0], deduped["wiki"][1]]
        + ([vital_path] if vital_path else [])
        + _tokenizer_input(config),
        params={
            "t_total": config.t_total,
            "ratio_news": config.ratio_news,
            "ratio_wiki": config.ratio_wiki,
            "seed": config.seed,
            "seq_len": config.seq_len,
            "window_days": config.window_days,
            "tau_days": config.tau_days,
            "date_policy": config.date_policy,
            "tokenizer": config.tokenizer,
        },
        outputs=[corpus_path, manifest_path, packed_path, packed_index_path],
        fn=do_assemble,
    )
    return {name: "ran" for name in runner.ran} | {name: "skipped" for name in runner.skipped}


def _corpus_texts(path: Path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [rec.text for rec in read_jsonl(fh)]


def _run_eval(config: ExperimentConfig, years: list[int]) -> dict:
    ev = config.eval_block or {}
    eval_dir = config.out_root / "eval"
    eval_dir.mkdir(parents=True, exist_ok=True)
    runner = StageRunner(eval_dir)
    tokenizer = _load_pipeline_tokenizer(config)
    k = float(ev.get("k", 0.01))
    alpha = float(ev.get("alpha", 0.4))
    offsets = list(ev.get("offsets", range(-3, 4)))
    terms = list(ev.get("terms", []))
    corpora = {year: config.out_root / str(year) / "corpus.jsonl" for year in years}
    events_csv = (config.base_dir / ev["events_csv"]) if "events_csv" in ev else None

    ppl_path = eval_dir / "ppl.csv"
    study_path = eval_dir / "event_study.json"
    counts_path = eval_dir / "term_counts.csv"
    outputs = [ppl_path, counts_path] + ([study_path] if events_csv else [])

    def do_eval():
        texts = {year: _corpus_texts(path) for year, path in corpora.items()}
        pit = {
            year: train_scorer(texts[year], tokenizer, k, scorer_id=str(year))
            for year in years
        }
        base_year = max(years)
        cta = {
            year: cta_adapt(pit[base_year], texts[year], alpha, scorer_id=f"cta-{year}")
            for year in years
        }
        with open(ppl_path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["term", "year", "scorer", "ppl", "ceiling"])
            for term in terms:
                for year in years:
                    for kind, scorer in (("pit", pit[year]), ("cta", cta[year])):
                        rep = zero_context_ppl(term, scorer)
                        writer.writerow([term, year, kind, repr(rep.ppl), repr(rep.ceiling)])
        with open(counts_path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["term", "year", "count"])
            for term in terms:
                for year in years:
                    writer.writerow([term, year, count_occurrences(term, texts[year])])
        if events_csv:
            events = read_events_csv(events_csv)
            study = {
                "pit": event_study(events, pit, offsets).to_dict(),
                "cta": event_study(events, cta, offsets).to_dict(),
            }
            study_path.write_text(json.dumps(study, indent=2) + "\n")
        log_event("eval", None, terms=len(terms), years=len(years))

    runner.run(
        "eval",
        None,
        inputs=list(corpora.values()) + ([events_csv] if events_csv else []) + _tokenizer_input(config),
        params={"k": k, "alpha": alpha, "offsets": list(offsets), "terms": terms},
        outputs=outputs,
        fn=do_eval,
    )
    return {name: "ran" for name in runner.ran} | {name: "skipped" for name in runner.skipped}
