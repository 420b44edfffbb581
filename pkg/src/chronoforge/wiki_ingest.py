"""Streaming ingestion of MediaWiki pages-meta-history XML dumps.

For each page the latest revision at or before a cutoff instant is selected,
its wikitext cleaned to plain text, and a :class:`SnapshotPage` emitted. The
parse is a single forward pass over the XML (``iterparse`` with element
recycling), so peak memory tracks the largest single page's revision set and
not the dump size.

Page identity is the numeric page id: titles change across revisions, ids do
not. Revision elements may carry their own ``<title>`` (history exports that
record per-revision titles); when absent, the page-level title applies to all
revisions.
"""

from __future__ import annotations

import logging
import xml.etree.ElementTree as ET
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, time, timezone
from typing import IO, Iterable, Iterator

from .records import DocRecord, format_timestamp, parse_timestamp
from .wikitext import clean_wikitext_flagged

logger = logging.getLogger("chronoforge.wiki_ingest")

DEFAULT_NAMESPACES = frozenset({0})
DEFAULT_MAX_TEXT_CHARS = 10_000_000


class DumpFormatError(Exception):
    """The dump violates the expected XML structure; parsing cannot continue."""


class RevisionError(Exception):
    """A single revision is unusable (e.g. malformed timestamp)."""


@dataclass
class RevisionRecord:
    page_id: int
    rev_id: int
    timestamp: datetime
    title: str
    wikitext: str


@dataclass
class SnapshotPage:
    page_id: int
    chosen_rev_id: int
    chosen_timestamp: datetime
    title_at_cutoff: str
    clean_text: str

    def to_doc_record(self) -> DocRecord:
        # "timestamp" duplicates the core date field under the name the wiki
        # JSONL interface promises (page_id, rev_id, timestamp, title, text).
        return DocRecord(
            doc_id=str(self.page_id),
            source="wiki",
            date=self.chosen_timestamp,
            title=self.title_at_cutoff,
            text=self.clean_text,
            extra={
                "page_id": self.page_id,
                "rev_id": self.chosen_rev_id,
                "timestamp": format_timestamp(self.chosen_timestamp),
            },
        )


@dataclass
class IngestReport:
    """Counters and cleaning flags accumulated over one dump pass."""

    pages_seen: int = 0
    pages_emitted: int = 0
    skipped_namespace: int = 0
    skipped_post_cutoff: int = 0
    skipped_redirect: int = 0
    skipped_oversized: int = 0
    skipped_malformed: int = 0
    cleaning_flagged: int = 0
    flagged_page_ids: list[int] = field(default_factory=list)
    revision_year_histogram: dict[int, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "pages_seen": self.pages_seen,
            "pages_emitted": self.pages_emitted,
            "skipped_namespace": self.skipped_namespace,
            "skipped_post_cutoff": self.skipped_post_cutoff,
            "skipped_redirect": self.skipped_redirect,
            "skipped_oversized": self.skipped_oversized,
            "skipped_malformed": self.skipped_malformed,
            "cleaning_flagged": self.cleaning_flagged,
            "flagged_page_ids": self.flagged_page_ids,
            "revision_year_histogram": {
                str(y): n for y, n in sorted(self.revision_year_histogram.items())
            },
        }


def cutoff_instant(cutoff_date) -> datetime:
    """End-of-day UTC instant for a cutoff date (Dec 31 23:59:59Z inclusive)."""
    if isinstance(cutoff_date, datetime):
        dt = cutoff_date
    else:
        dt = datetime.combine(cutoff_date, time(23, 59, 59))
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def select_revision(revisions: list[RevisionRecord], cutoff: datetime) -> int | None:
    """Rev id of the latest revision at or before the cutoff, if any.

    Ties on identical timestamps go to the larger rev id (the later edit).
    Returns None when the page has no qualifying revision (created after the
    cutoff).
    """
    best: RevisionRecord | None = None
    for rev in revisions:
        if rev.timestamp > cutoff:
            continue
        if best is None or (rev.timestamp, rev.rev_id) > (best.timestamp, best.rev_id):
            best = rev
    return best.rev_id if best is not None else None


def is_redirect(wikitext: str) -> bool:
    return wikitext.lstrip().lower().startswith("#redirect")


def _local(tag) -> str:
    tag = str(tag)
    return tag.rsplit("}", 1)[-1]


class _CountingReader:
    """Binary reader wrapper tracking bytes fed to the XML parser."""

    def __init__(self, fh: IO[bytes]):
        self._fh = fh
        self.bytes_read = 0
        self.saw_content = False

    def read(self, size=-1) -> bytes:
        data = self._fh.read(size)
        self.bytes_read += len(data)
        if not self.saw_content and data.strip():
            self.saw_content = True
        return data


def _parse_page(elem) -> tuple[str, int, int | None, list[tuple]]:
    """Extract (title, ns, page_id, raw revisions) from a completed <page>.

    Raw revisions are (rev_id, timestamp_string, title_override, text) tuples;
    timestamp parsing is deferred so the caller can apply record-level error
    policy with page context.
    """
    title = ""
    ns = 0
    page_id: int | None = None
    revisions = []
    for child in elem:
        tag = _local(child.tag)
        if tag == "title":
            title = child.text or ""
        elif tag == "ns":
            ns = int(child.text or 0)
        elif tag == "id" and page_id is None:
            page_id = int(child.text or 0)
        elif tag == "revision":
            rev_id = None
            ts_raw = None
            rev_title = None
            text = ""
            for sub in child:
                sub_tag = _local(sub.tag)
                if sub_tag == "id" and rev_id is None:
                    rev_id = int(sub.text or 0)
                elif sub_tag == "timestamp":
                    ts_raw = sub.text or ""
                elif sub_tag == "title":
                    rev_title = sub.text or ""
                elif sub_tag == "text":
                    text = sub.text or ""
            revisions.append((rev_id, ts_raw, rev_title, text))
    return title, ns, page_id, revisions


def parse_revisions(elem) -> tuple[int, list[RevisionRecord]]:
    """Namespace and RevisionRecords of a completed <page> element.

    Raises RevisionError on a malformed or missing timestamp so the caller
    can skip the page with context.
    """
    page_title, ns, page_id, raw = _parse_page(elem)
    if page_id is None:
        raise DumpFormatError("page element without an id")
    records = []
    for rev_id, ts_raw, rev_title, text in raw:
        if rev_id is None or not ts_raw:
            raise RevisionError(f"page {page_id}: revision missing id or timestamp")
        try:
            ts = parse_timestamp(ts_raw)
        except ValueError as exc:
            raise RevisionError(f"page {page_id}: bad timestamp {ts_raw!r}: {exc}") from exc
        records.append(
            RevisionRecord(
                page_id=page_id,
                rev_id=rev_id,
                timestamp=ts,
                title=rev_title if rev_title is not None else page_title,
                wikitext=text,
            )
        )
    return ns, records


def stream_dump(
    dump_path,
    cutoff: datetime,
    namespace_filter: Iterable[int] = DEFAULT_NAMESPACES,
    max_text_chars: int = DEFAULT_MAX_TEXT_CHARS,
    report: IngestReport | None = None,
    include_redirects: bool = False,
) -> Iterator[SnapshotPage]:
    """Yield one SnapshotPage per page with a qualifying revision.

    Pages are yielded in dump order; two passes over the same bytes produce
    identical sequences. Content-level problems (bad timestamp, oversized
    text) skip the affected page and continue; structural XML errors abort
    with the approximate byte offset.
    """
    namespaces = frozenset(namespace_filter)
    cutoff = cutoff_instant(cutoff)
    if report is None:
        report = IngestReport()

    with open(dump_path, "rb") as raw:
        counting = _CountingReader(raw)
        try:
            context = ET.iterparse(counting, events=("start", "end"))
            event, root = next(context, (None, None))
            if root is None:
                return
            for event, elem in context:
                if event != "end" or _local(elem.tag) != "page":
                    continue
                page = _process_page(
                    elem, cutoff, namespaces, max_text_chars, report, include_redirects
                )
                root.clear()
                if page is not None:
                    yield page
        except ET.ParseError as exc:
            if not counting.saw_content:
                return  # zero-byte / whitespace-only dump: empty stream
            line, col = exc.position
            raise DumpFormatError(
                f"{dump_path}: XML structure violation at line {line}, column {col} "
                f"(within the first {counting.bytes_read} bytes): {exc}"
            ) from exc


def _process_page(
    elem, cutoff, namespaces, max_text_chars, report, include_redirects
) -> SnapshotPage | None:
    report.pages_seen += 1
    try:
        ns, revisions = parse_revisions(elem)
    except RevisionError as exc:
        report.skipped_malformed += 1
        logger.warning("skipping page: %s", exc)
        return None
    if not revisions:
        report.skipped_malformed += 1
        return None

    page_id = revisions[0].page_id
    if ns not in namespaces:
        report.skipped_namespace += 1
        return None

    chosen_id = select_revision(revisions, cutoff)
    if chosen_id is None:
        report.skipped_post_cutoff += 1
        return None
    chosen = next(r for r in revisions if r.rev_id == chosen_id)

    if len(chosen.wikitext) > max_text_chars:
        report.skipped_oversized += 1
        logger.warning(
            "skipping page %s: text of %d chars exceeds cap %d",
            page_id,
            len(chosen.wikitext),
            max_text_chars,
        )
        return None
    if not include_redirects and is_redirect(chosen.wikitext):
        report.skipped_redirect += 1
        return None

    cleaned = clean_wikitext_flagged(chosen.wikitext)
    if cleaned.flags:
        report.cleaning_flagged += 1
        report.flagged_page_ids.append(page_id)
        logger.warning("page %s cleaned with flags: %s", page_id, ",".join(cleaned.flags))

    report.pages_emitted += 1
    year = chosen.timestamp.year
    report.revision_year_histogram[year] = report.revision_year_histogram.get(year, 0) + 1
    return SnapshotPage(
        page_id=page_id,
        chosen_rev_id=chosen.rev_id,
        chosen_timestamp=chosen.timestamp,
        title_at_cutoff=chosen.title,
        clean_text=cleaned.text,
    )


def revision_age_report(pages: Iterable[SnapshotPage], cutoff: datetime) -> dict[int, int]:
    """Histogram of chosen revision timestamps by calendar year."""
    cutoff = cutoff_instant(cutoff)
    hist: Counter[int] = Counter()
    for page in pages:
        if page.chosen_timestamp > cutoff:
            raise ValueError(
                f"page {page.page_id} chosen at {page.chosen_timestamp} is after cutoff"
            )
        hist[page.chosen_timestamp.year] += 1
    return dict(sorted(hist.items()))
