"""Shared document record type and JSONL serialization.

Every pipeline stage exchanges documents as JSONL: one UTF-8 encoded JSON
object per line, LF line endings. A record always carries the core fields
``doc_id``, ``source``, ``date``, ``title``, ``text``; domain-specific fields
(``page_id``/``rev_id`` for wiki, ``file``/``ordinal``/``year`` for news) ride
along in ``extra`` and are emitted as flat keys so downstream tools can grep
them directly.
"""

from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from typing import IO, Iterable, Iterator

CORE_FIELDS = ("doc_id", "source", "date", "title", "text")


def normalize_text(text: str) -> str:
    """Unicode NFC plus leading/trailing whitespace strip.

    Applied at ingestion and again before hashing, so digests never differ on
    whitespace or normalization-form noise. Idempotent.
    """
    return unicodedata.normalize("NFC", text).strip()


def parse_timestamp(value: str) -> datetime:
    """Parse an RFC 3339 / MediaWiki timestamp into an aware UTC datetime.

    Accepts the trailing-``Z`` form that ``datetime.fromisoformat`` rejects on
    Python 3.10.
    """
    raw = value.strip()
    if raw.endswith(("Z", "z")):
        raw = raw[:-1] + "+00:00"
    dt = datetime.fromisoformat(raw)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def format_timestamp(dt: datetime) -> str:
    """RFC 3339 with Z suffix, second precision."""
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass
class DocRecord:
    """One cleaned, dated document: the unit of dedup, sampling and assembly."""

    doc_id: str
    source: str  # "wiki" | "news"
    date: datetime
    title: str
    text: str
    token_count: int | None = None
    extra: dict = field(default_factory=dict)

    @property
    def year(self) -> int:
        return self.date.year

    def to_json(self) -> str:
        obj = {
            "doc_id": self.doc_id,
            "source": self.source,
            "date": format_timestamp(self.date),
            "title": self.title,
            "text": self.text,
        }
        if self.token_count is not None:
            obj["token_count"] = self.token_count
        obj.update(self.extra)
        return json.dumps(obj, ensure_ascii=False)

    @classmethod
    def from_json(cls, line: str) -> "DocRecord":
        obj = json.loads(line)
        extra = {k: v for k, v in obj.items() if k not in CORE_FIELDS and k != "token_count"}
        return cls(
            doc_id=str(obj["doc_id"]),
            source=obj["source"],
            date=parse_timestamp(obj["date"]),
            title=obj.get("title", ""),
            text=obj["text"],
            token_count=obj.get("token_count"),
            extra=extra,
        )


def write_jsonl(records: Iterable[DocRecord], fh: IO[str]) -> int:
    """Write records one per line; returns the number written."""
    n = 0
    for rec in records:
        fh.write(rec.to_json())
        fh.write("\n")
        n += 1
    return n


def read_jsonl(fh: IO[str]) -> Iterator[DocRecord]:
    for line in fh:
        line = line.strip()
        if line:
            yield DocRecord.from_json(line)


def day_of(dt: datetime | date) -> date:
    if isinstance(dt, datetime):
        return dt.date()
    return dt
