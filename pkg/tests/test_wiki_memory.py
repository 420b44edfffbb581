"""Peak-memory check: streaming a dump must not buffer the whole file."""

import os
from datetime import date

import psutil
import pytest

from chronoforge.wiki_ingest import stream_dump

# Default is desk scale; set CHRONOFORGE_BIG_DUMP_MB=1024 for the full-size
# check (same ceiling: peak memory must not track file size).
DUMP_MB_TARGET = int(os.environ.get("CHRONOFORGE_BIG_DUMP_MB", "48"))
# Generous headroom over interpreter noise, but far below the dump size, so a
# parser that slurped the file would trip it.
RSS_DELTA_CEILING = 24 * 1024 * 1024


def _write_big_dump(path):
    filler = "lorem ipsum dolor sit amet consectetur " * 50  # ~2 KB per revision
    with open(path, "w", encoding="utf-8") as fh:
        fh.write('<mediawiki xmlns="http://www.mediawiki.org/xml/export-0.10/">\n')
        page_id = 0
        written = 0
        target = DUMP_MB_TARGET * 1024 * 1024
        while written < target:
            page_id += 1
            chunk = (
                f"<page><title>Page {page_id}</title><ns>0</ns><id>{page_id}</id>"
                f"<revision><id>{page_id * 10}</id>"
                f"<timestamp>2015-06-15T12:00:00Z</timestamp>"
                f"<text>Page {page_id}: {filler}</text></revision>"
                f"<revision><id>{page_id * 10 + 1}</id>"
                f"<timestamp>2018-06-15T12:00:00Z</timestamp>"
                f"<text>Page {page_id} updated: {filler}</text></revision></page>\n"
            )
            fh.write(chunk)
            written += len(chunk)
        fh.write("</mediawiki>\n")
    return page_id


@pytest.mark.slow
def test_streaming_memory_stays_bounded(tmp_path):
    dump = tmp_path / "big.xml"
    n_pages = _write_big_dump(dump)
    assert dump.stat().st_size >= DUMP_MB_TARGET * 1024 * 1024

    proc = psutil.Process(os.getpid())
    baseline = proc.memory_info().rss
    peak_delta = 0
    emitted = 0
    for page in stream_dump(dump, date(2020, 12, 31)):
        emitted += 1
        assert page.chosen_timestamp.year == 2018
        if emitted % 500 == 0:
            peak_delta = max(peak_delta, proc.memory_info().rss - baseline)
    peak_delta = max(peak_delta, proc.memory_info().rss - baseline)
    assert emitted == n_pages
    assert peak_delta < RSS_DELTA_CEILING, f"peak RSS delta {peak_delta / 2**20:.1f} MiB"
