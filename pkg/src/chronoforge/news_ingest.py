"""Ingestion of yearly, document-split news text collections.

Sources arrive in per-year buckets without finer timestamps, so each document
gets a synthesized day-granularity date inside its bucket year: either the
deterministic mid-year anchor (July 2) or a seeded uniform draw over the
year's days. The chosen policy is recorded downstream in the corpus manifest
because recency weights are computed from these synthesized ages.
"""

from __future__ import annotations

import random
import re
import unicodedata
from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone
from pathlib import Path
from typing import Iterator

from .records import DocRecord

SPLIT_MODES = ("blank-line", "per-line")
DATE_POLICIES = ("mid-year", "uniform")

# Document delimiter for blank-line split mode: one or more blank lines,
# tolerating \r and stray horizontal whitespace on the blank lines.
_BLANK_RUN_RE = re.compile(rb"(?:\r?\n)(?:[ \t]*\r?\n)+")


@dataclass
class NewsDoc:
    source_file: str
    ordinal: int
    year: int
    text: str


@dataclass
class NewsIngestReport:
    files_read: int = 0
    docs_emitted: int = 0
    docs_dropped_empty: int = 0
    docs_dropped_undecodable: int = 0

    def to_dict(self) -> dict:
        return {
            "files_read": self.files_read,
            "docs_emitted": self.docs_emitted,
            "docs_dropped_empty": self.docs_dropped_empty,
            "docs_dropped_undecodable": self.docs_dropped_undecodable,
        }


def _split_documents(data: bytes, split: str) -> list[bytes]:
    if split == "per-line":
        return data.split(b"\n")
    if split == "blank-line":
        return _BLANK_RUN_RE.split(data)
    raise ValueError(f"unknown split mode {split!r}; expected one of {SPLIT_MODES}")


def ingest_year(
    dir_path,
    year: int,
    split: str = "blank-line",
    report: NewsIngestReport | None = None,
) -> Iterator[NewsDoc]:
    """Yield normalized NewsDocs for one bucket year, in (file, ordinal) order.

    Files are visited in lexicographic name order. Ordinals number the kept
    documents per file from 0. A document that does not decode as UTF-8 is
    dropped and counted; an unreadable file aborts with its path.
    """
    if report is None:
        report = NewsIngestReport()
    root = Path(dir_path)
    if not root.is_dir():
        raise FileNotFoundError(f"news directory not found: {root}")
    for path in sorted(p for p in root.iterdir() if p.is_file()):
        report.files_read += 1
        data = path.read_bytes()
        ordinal = 0
        for chunk in _split_documents(data, split):
            try:
                text = chunk.decode("utf-8")
            except UnicodeDecodeError:
                report.docs_dropped_undecodable += 1
                continue
            text = unicodedata.normalize("NFC", text).strip()
            if not text:
                report.docs_dropped_empty += 1
                continue
            report.docs_emitted += 1
            yield NewsDoc(source_file=path.name, ordinal=ordinal, year=year, text=text)
            ordinal += 1


def assign_day_timestamp(doc: NewsDoc, policy: str, seed: int = 0) -> date:
    """Day-granularity date within the document's bucket year.

    mid-year: July 2, the fixed midpoint anchor.
    uniform: seeded uniform draw over the year's days, stable per document.
    """
    if policy == "mid-year":
        return date(doc.year, 7, 2)
    if policy == "uniform":
        start = date(doc.year, 1, 1)
        n_days = (date(doc.year + 1, 1, 1) - start).days
        rng = random.Random(f"{seed}:{doc.source_file}:{doc.ordinal}:{doc.year}")
        return start + timedelta(days=rng.randrange(n_days))
    raise ValueError(f"unknown date policy {policy!r}; expected one of {DATE_POLICIES}")


def news_doc_to_record(doc: NewsDoc, policy: str = "mid-year", seed: int = 0) -> DocRecord:
    day = assign_day_timestamp(doc, policy, seed)
    return DocRecord(
        doc_id=f"news:{doc.year}:{doc.source_file}:{doc.ordinal}",
        source="news",
        date=datetime(day.year, day.month, day.day, tzinfo=timezone.utc),
        title="",
        text=doc.text,
        extra={"file": doc.source_file, "ordinal": doc.ordinal, "year": doc.year},
    )
