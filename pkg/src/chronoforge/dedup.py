"""Exact-match document deduplication by SHA-256 content digest.

Digests are computed over the UTF-8 bytes of normalized text (NFC, stripped),
so whitespace noise cannot make two copies of an article look distinct. The
first document in stream order wins; later exact duplicates are dropped.
Wiki and news pools are deduplicated separately (one scope per call).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .records import DocRecord, normalize_text


def content_digest(text: str) -> bytes:
    return hashlib.sha256(normalize_text(text).encode("utf-8")).digest()


@dataclass
class DigestIndex:
    """Digests observed so far plus kept/dropped accounting."""

    scope_key: str = ""
    seen: set[bytes] = field(default_factory=set)
    kept: int = 0
    dropped: int = 0
    kept_by_year: dict[int, int] = field(default_factory=dict)
    dropped_by_year: dict[int, int] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return self.kept + self.dropped

    def add(self, digest: bytes, year: int) -> bool:
        """Record one document; True if it is first-seen (kept)."""
        if digest in self.seen:
            self.dropped += 1
            self.dropped_by_year[year] = self.dropped_by_year.get(year, 0) + 1
            return False
        self.seen.add(digest)
        self.kept += 1
        self.kept_by_year[year] = self.kept_by_year.get(year, 0) + 1
        return True

    def to_dict(self) -> dict:
        return {
            "scope": self.scope_key,
            "total": self.total,
            "kept": self.kept,
            "dropped": self.dropped,
            "kept_by_year": {str(y): n for y, n in sorted(self.kept_by_year.items())},
            "dropped_by_year": {str(y): n for y, n in sorted(self.dropped_by_year.items())},
        }


def dedup_stream(
    docs: Iterable[DocRecord],
    scope_key: str = "",
    index: DigestIndex | None = None,
) -> Iterator[DocRecord]:
    """Yield first-seen documents; pass an index to collect the report.

    Re-running over the same stream yields the identical output (keep-first
    is deterministic).
    """
    if index is None:
        index = DigestIndex(scope_key=scope_key)
    for doc in docs:
        digest = content_digest(doc.text)
        if index.add(digest, doc.year):
            doc.extra["sha256"] = digest.hex()
            yield doc


def dedup_list(docs: Iterable[DocRecord], scope_key: str = "") -> tuple[list[DocRecord], DigestIndex]:
    index = DigestIndex(scope_key=scope_key)
    kept = list(dedup_stream(docs, scope_key, index))
    return kept, index
