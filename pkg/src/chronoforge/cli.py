"""chronoforge command line: every pipeline stage as a subcommand.

Logs are line-delimited JSON on stderr (level via the CHRONOFORGE_LOG env
var); outputs go only where flags point them. Exit code 0 means every
requested stage succeeded.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from datetime import date
from pathlib import Path

from . import __version__
from .assembler import (
    SamplingConfig,
    build_corpus,
    chinchilla_budget,
    pack_sequences,
    write_packed_binary,
)
from .config import load_config, validate_config
from .dedup import DigestIndex, dedup_stream
from .evalsuite import (
    cta_adapt,
    count_occurrences,
    emissions,
    event_study,
    load_table_scorer,
    read_events_csv,
    train_scorer,
    zero_context_ppl,
)
from .news_ingest import DATE_POLICIES, SPLIT_MODES, ingest_year, news_doc_to_record, NewsIngestReport
from .pipeline import PipelineError, run_pipeline
from .records import read_jsonl, write_jsonl
from .sampler import CutoffSpec, compute_weights, sample_to_budget, wiki_select
from .tokenizer import load_tokenizer, save_tokenizer, train_bpe
from .wiki_ingest import IngestReport, stream_dump

logger = logging.getLogger("chronoforge.cli")


class JsonLineFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:
        payload = {"level": record.levelname.lower(), "logger": record.name}
        message = record.getMessage()
        if message:
            payload["message"] = message
        for attr in ("stage", "year"):
            value = getattr(record, attr, None)
            if value is not None:
                payload[attr] = value
        counters = getattr(record, "counters", None)
        if counters:
            payload.update(counters)
        return json.dumps(payload, ensure_ascii=False, default=str)


def _setup_logging() -> None:
    level = os.environ.get("CHRONOFORGE_LOG", "INFO").upper()
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(JsonLineFormatter())
    root = logging.getLogger("chronoforge")
    root.handlers[:] = [handler]
    root.setLevel(getattr(logging, level, logging.INFO))


def _read_texts(path: Path) -> list[str]:
    """Texts from a JSONL record file, or the whole file as one document."""
    if path.suffix == ".jsonl":
        with open(path, encoding="utf-8") as fh:
            return [rec.text for rec in read_jsonl(fh)]
    return [path.read_text(encoding="utf-8")]


def _read_records(path) -> list:
    with open(path, encoding="utf-8") as fh:
        return list(read_jsonl(fh))


def _parse_year_paths(pairs: list[str]) -> dict[int, Path]:
    out = {}
    for pair in pairs:
        year, _, path = pair.partition("=")
        if not path:
            raise SystemExit(f"expected YEAR=PATH, got {pair!r}")
        out[int(year)] = Path(path)
    return out


# ---------------------------------------------------------------------------
# subcommand handlers
# ---------------------------------------------------------------------------


def cmd_ingest_wiki(args) -> int:
    report = IngestReport()
    cutoff = date.fromisoformat(args.cutoff)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        for page in stream_dump(args.dump, cutoff, namespace_filter=set(args.ns), report=report):
            fh.write(page.to_doc_record().to_json() + "\n")
    if args.report:
        Path(args.report).write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    logger.info(
        "",
        extra={
            "stage": "ingest-wiki",
            "year": cutoff.year,
            "counters": {"pages_seen": report.pages_seen, "pages_emitted": report.pages_emitted},
        },
    )
    return 0


def cmd_ingest_news(args) -> int:
    report = NewsIngestReport()
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        for doc in ingest_year(args.dir, args.year, args.split, report):
            fh.write(news_doc_to_record(doc, args.date_policy, args.seed).to_json() + "\n")
    if args.report:
        Path(args.report).write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    logger.info(
        "",
        extra={"stage": "ingest-news", "year": args.year, "counters": report.to_dict()},
    )
    return 0


def cmd_dedup(args) -> int:
    index = DigestIndex(scope_key=args.scope)
    with open(args.infile, encoding="utf-8") as src, open(
        args.out, "w", encoding="utf-8", newline="\n"
    ) as dst:
        write_jsonl(dedup_stream(read_jsonl(src), args.scope, index), dst)
    if args.report:
        Path(args.report).write_text(json.dumps(index.to_dict(), indent=2) + "\n")
    logger.info(
        "",
        extra={"stage": "dedup", "counters": {"kept": index.kept, "dropped": index.dropped}},
    )
    return 0


def cmd_tokenizer_train(args) -> int:
    texts: list[str] = []
    for path in args.infile:
        texts.extend(_read_texts(Path(path)))
    tok = train_bpe(texts, args.vocab, seed=args.seed)
    save_tokenizer(tok, args.out)
    logger.info(
        "",
        extra={
            "stage": "tokenizer-train",
            "counters": {"vocab_size": tok.vocab_size, "merges": len(tok.merges)},
        },
    )
    return 0


def cmd_tokenizer_count(args) -> int:
    tok = load_tokenizer(args.spec)
    total = sum(tok.count_tokens(t) for t in _read_texts(Path(args.infile)))
    print(total)
    return 0


def cmd_sample(args) -> int:
    tok = load_tokenizer(args.spec)
    records = _read_records(args.pool)
    counts = {r.doc_id: tok.count_tokens(r.text) for r in records}
    counts = {d: c for d, c in counts.items() if c > 0}
    pool_ids = [r.doc_id for r in records if r.doc_id in counts]
    if args.vital:
        vital = {
            line.strip() for line in Path(args.vital).read_text().splitlines() if line.strip()
        }
        state = wiki_select(pool_ids, vital, args.budget, counts, args.seed)
    else:
        if not args.cutoff:
            raise SystemExit("--cutoff is required for recency-weighted sampling")
        spec = CutoffSpec(date.fromisoformat(args.cutoff), args.window, args.tau)
        by_id = {r.doc_id: r for r in records}
        pool = [
            (doc_id, spec.age_days(by_id[doc_id].date.date()))
            for doc_id in pool_ids
            if spec.in_window(by_id[doc_id].date.date())
        ]
        table = compute_weights(pool, spec)
        state = sample_to_budget(table, args.budget, counts, args.seed)
    Path(args.out).write_text(
        json.dumps(
            {
                "accepted": list(state.accepted),
                "t_current": state.t_current,
                "t_needed": state.t_needed,
                "rejected_overshoot": state.rejected_overshoot_count,
                "draws": state.draws,
                "pool_exhausted": state.pool_exhausted,
            },
            indent=2,
        )
        + "\n"
    )
    return 0


def cmd_assemble(args) -> int:
    config = load_config(args.config)
    year = args.year if args.year is not None else config.years[0]
    if args.year is None and len(config.years) > 1:
        raise SystemExit("config lists multiple years; pick one with --year")
    tokenizer = _load_tokenizer_for_config(config)
    news_pool = _read_records(args.news)
    wiki_pool = _read_records(args.wiki)
    vital_ids = set()
    if args.vital:
        vital_ids = {
            line.strip() for line in Path(args.vital).read_text().splitlines() if line.strip()
        }
    sampling = SamplingConfig(
        year=year,
        cutoff=CutoffSpec(date(year, 12, 31), config.window_days, config.tau_days),
        t_total=config.t_total,
        seed=config.seed,
        ratio_news=config.ratio_news,
        ratio_wiki=config.ratio_wiki,
        date_policy=config.date_policy,
    )
    docs, manifest = build_corpus(sampling, news_pool, wiki_pool, vital_ids, tokenizer)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "corpus.jsonl", "w", encoding="utf-8", newline="\n") as fh:
        write_jsonl(docs, fh)
    (out_dir / "manifest.json").write_text(manifest.to_json())
    sequences = pack_sequences(docs, tokenizer, config.seq_len)
    write_packed_binary(
        sequences, out_dir / "packed.bin", out_dir / "packed.idx.json", config.seq_len
    )
    return 0


def _load_tokenizer_for_config(config):
    from .pipeline import _load_pipeline_tokenizer

    return _load_pipeline_tokenizer(config)


def cmd_pack(args) -> int:
    tok = load_tokenizer(args.spec)
    docs = _read_records(args.infile)
    sequences = pack_sequences(docs, tok, args.seq_len)
    out = Path(args.out)
    write_packed_binary(sequences, out, out.with_suffix(out.suffix + ".idx.json"), args.seq_len)
    logger.info(
        "",
        extra={"stage": "pack", "counters": {"sequences": len(sequences)}},
    )
    return 0


def _build_scorers(args) -> tuple[dict, dict]:
    """(pit scorers by year, cta scorers by year) from corpus/table flags."""
    tok = load_tokenizer(args.spec)
    corpora = _parse_year_paths(args.corpus or [])
    tables = _parse_year_paths(getattr(args, "scorer_table", None) or [])
    pit: dict[int, object] = {}
    texts: dict[int, list[str]] = {}
    for year, path in sorted(corpora.items()):
        texts[year] = _read_texts(path)
        pit[year] = train_scorer(texts[year], tok, args.k, scorer_id=str(year))
    for year, path in sorted(tables.items()):
        pit[year] = load_table_scorer(path, tok)
    cta: dict[int, object] = {}
    if getattr(args, "cta_alpha", None):
        base_year = args.cta_base_year if args.cta_base_year else max(corpora)
        base = pit[base_year]
        for year in sorted(corpora):
            cta[year] = cta_adapt(base, texts[year], args.cta_alpha, scorer_id=f"cta-{year}")
    return pit, cta


def _term_list(args) -> list[str]:
    terms = list(args.term or [])
    if args.terms:
        terms.extend(
            line.strip() for line in Path(args.terms).read_text().splitlines() if line.strip()
        )
    if not terms:
        raise SystemExit("no terms given; use --term or --terms FILE")
    return terms


def cmd_eval_ppl(args) -> int:
    pit, cta = _build_scorers(args)
    terms = _term_list(args)
    rows = [["term", "year", "scorer", "ppl", "ceiling"]]
    for term in terms:
        for year in sorted(pit):
            rep = zero_context_ppl(term, pit[year])
            rows.append([term, year, "pit", repr(rep.ppl), repr(rep.ceiling)])
            if year in cta:
                rep = zero_context_ppl(term, cta[year])
                rows.append([term, year, "cta", repr(rep.ppl), repr(rep.ceiling)])
    _write_csv(rows, args.out)
    return 0


def cmd_eval_event_study(args) -> int:
    pit, cta = _build_scorers(args)
    events = read_events_csv(args.events)
    offsets = [int(o) for o in args.offsets.split(",")]
    result = {"pit": event_study(events, pit, offsets).to_dict()}
    if cta:
        result["cta"] = event_study(events, cta, offsets).to_dict()
    payload = json.dumps(result, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(payload)
    else:
        sys.stdout.write(payload)
    return 0


def cmd_eval_counts(args) -> int:
    corpora = _parse_year_paths(args.corpus or [])
    terms = _term_list(args)
    rows = [["term", "year", "count"]]
    for term in terms:
        for year, path in sorted(corpora.items()):
            n = count_occurrences(term, _read_texts(path), not args.case_insensitive)
            rows.append([term, year, n])
    _write_csv(rows, args.out)
    return 0


def cmd_eval_emissions(args) -> int:
    report = emissions(args.energy_kwh, args.intensity)
    payload = json.dumps(report.to_dict(), indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(payload)
    else:
        sys.stdout.write(payload)
    return 0


def cmd_chinchilla(args) -> int:
    print(chinchilla_budget(args.params))
    return 0


def cmd_run(args) -> int:
    config = load_config(args.config)
    problems = config.validate()
    if problems:
        for problem in problems:
            logger.error(problem)
        return 1
    only = [int(y) for y in args.years] if args.years else None
    try:
        summary = run_pipeline(config, only_years=only)
    except PipelineError as exc:
        logger.error(str(exc), extra={"stage": exc.stage, "year": exc.year})
        return 1
    logger.info("", extra={"stage": "run", "counters": {"summary": summary}})
    return 0


def cmd_validate(args) -> int:
    problems = validate_config(args.config)
    for problem in problems:
        print(problem)
    if problems:
        return 1
    print("config OK")
    return 0


def _write_csv(rows, out) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            csv.writer(fh).writerows(rows)
    else:
        csv.writer(sys.stdout).writerows(rows)


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chronoforge", description=__doc__)
    parser.add_argument("--version", action="version", version=f"chronoforge {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    ingest = sub.add_parser("ingest", help="ingest raw sources into DocRecord JSONL")
    ingest_sub = ingest.add_subparsers(dest="source", required=True)

    wiki = ingest_sub.add_parser("wiki", help="stream a pages-meta-history dump")
    wiki.add_argument("--dump", required=True)
    wiki.add_argument("--cutoff", required=True, help="YYYY-MM-DD, inclusive end of day")
    wiki.add_argument("--ns", type=int, nargs="*", default=[0])
    wiki.add_argument("--out", required=True)
    wiki.add_argument("--report")
    wiki.set_defaults(func=cmd_ingest_wiki)

    news = ingest_sub.add_parser("news", help="ingest one yearly news bucket")
    news.add_argument("--dir", required=True)
    news.add_argument("--year", type=int, required=True)
    news.add_argument("--split", choices=SPLIT_MODES, default="blank-line")
    news.add_argument("--date-policy", choices=DATE_POLICIES, default="mid-year")
    news.add_argument("--seed", type=int, default=0)
    news.add_argument("--out", required=True)
    news.add_argument("--report")
    news.set_defaults(func=cmd_ingest_news)

    dedup = sub.add_parser("dedup", help="drop exact-duplicate documents")
    dedup.add_argument("--in", dest="infile", required=True)
    dedup.add_argument("--out", required=True)
    dedup.add_argument("--report")
    dedup.add_argument("--scope", default="")
    dedup.set_defaults(func=cmd_dedup)

    tok = sub.add_parser("tokenizer", help="train or apply a tokenizer")
    tok_sub = tok.add_subparsers(dest="action", required=True)
    tok_train = tok_sub.add_parser("train")
    tok_train.add_argument("--in", dest="infile", nargs="+", required=True)
    tok_train.add_argument("--vocab", type=int, required=True)
    tok_train.add_argument("--seed", type=int, default=0)
    tok_train.add_argument("--out", required=True)
    tok_train.set_defaults(func=cmd_tokenizer_train)
    tok_count = tok_sub.add_parser("count")
    tok_count.add_argument("--spec", required=True)
    tok_count.add_argument("--in", dest="infile", required=True)
    tok_count.set_defaults(func=cmd_tokenizer_count)

    sample = sub.add_parser("sample", help="sample a pool to a token budget")
    sample.add_argument("--pool", required=True)
    sample.add_argument("--spec", required=True, help="tokenizer spec JSON")
    sample.add_argument("--budget", type=int, required=True)
    sample.add_argument("--seed", type=int, default=0)
    sample.add_argument("--vital", help="vital id list: uniform sampling with forced inclusion")
    sample.add_argument("--cutoff", help="YYYY-MM-DD for recency-weighted sampling")
    sample.add_argument("--window", type=int, default=1826)
    sample.add_argument("--tau", type=int, default=None)
    sample.add_argument("--out", required=True)
    sample.set_defaults(func=cmd_sample)

    assemble = sub.add_parser("assemble", help="build one yearly corpus with manifest")
    assemble.add_argument("--config", required=True)
    assemble.add_argument("--news", required=True)
    assemble.add_argument("--wiki", required=True)
    assemble.add_argument("--vital")
    assemble.add_argument("--year", type=int)
    assemble.add_argument("--out-dir", required=True)
    assemble.set_defaults(func=cmd_assemble)

    pack = sub.add_parser("pack", help="pack a corpus into fixed-length sequences")
    pack.add_argument("--in", dest="infile", required=True)
    pack.add_argument("--spec", required=True)
    pack.add_argument("--seq-len", type=int, default=1024)
    pack.add_argument("--out", required=True)
    pack.set_defaults(func=cmd_pack)

    evalp = sub.add_parser("eval", help="perplexity / leakage reports")
    eval_sub = evalp.add_subparsers(dest="report", required=True)

    def add_scorer_flags(p):
        p.add_argument("--spec", required=True, help="tokenizer spec JSON")
        p.add_argument("--corpus", action="append", metavar="YEAR=PATH")
        p.add_argument("--scorer-table", action="append", metavar="YEAR=PATH",
                       help="imported zero-context probability table")
        p.add_argument("--k", type=float, default=0.01)
        p.add_argument("--cta-alpha", type=float)
        p.add_argument("--cta-base-year", type=int)

    ppl = eval_sub.add_parser("ppl")
    add_scorer_flags(ppl)
    ppl.add_argument("--term", action="append")
    ppl.add_argument("--terms", help="file with one term per line")
    ppl.add_argument("--out")
    ppl.set_defaults(func=cmd_eval_ppl)

    study = eval_sub.add_parser("event-study")
    add_scorer_flags(study)
    study.add_argument("--events", required=True, help="CSV with term,event_year")
    study.add_argument("--offsets", default="-3,-2,-1,0,1,2,3")
    study.add_argument("--out")
    study.set_defaults(func=cmd_eval_event_study)

    counts = eval_sub.add_parser("counts")
    counts.add_argument("--corpus", action="append", metavar="YEAR=PATH", required=True)
    counts.add_argument("--term", action="append")
    counts.add_argument("--terms")
    counts.add_argument("--case-insensitive", action="store_true")
    counts.add_argument("--out")
    counts.set_defaults(func=cmd_eval_counts)

    emis = eval_sub.add_parser("emissions")
    emis.add_argument("--energy-kwh", required=True)
    emis.add_argument("--intensity", required=True, help="gCO2eq per kWh")
    emis.add_argument("--out")
    emis.set_defaults(func=cmd_eval_emissions)

    chin = sub.add_parser("chinchilla", help="token budget for a parameter count")
    chin.add_argument("--params", type=int, required=True)
    chin.set_defaults(func=cmd_chinchilla)

    run = sub.add_parser("run", help="run the full pipeline from a config")
    run.add_argument("--config", required=True)
    run.add_argument("--years", nargs="*")
    run.set_defaults(func=cmd_run)

    validate = sub.add_parser("validate", help="check a config, reporting all problems")
    validate.add_argument("--config", required=True)
    validate.set_defaults(func=cmd_validate)

    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        logger.error(str(exc))
        return 1


if __name__ == "__main__":
    sys.exit(main())
