"""Shared fixtures: synthetic dumps, decade corpora, pipeline trees.

Everything here is deterministic (literal content or seeded RNG) so tests
that compare bytes across runs stay meaningful.
"""

from __future__ import annotations

import json
import random
from datetime import datetime, timezone
from pathlib import Path
from xml.sax.saxutils import escape

import pytest

# ---------------------------------------------------------------------------
# MediaWiki dump synthesis
# ---------------------------------------------------------------------------


def dump_xml(pages) -> str:
    """Serialize page dicts into the MediaWiki export subset.

    Page dict: {"page_id", "ns", "title", "revisions": [{"rev_id",
    "timestamp", "text", "title"?}]}. A revision-level title, when present,
    is written as a <title> child of <revision>.
    """
    parts = ['<mediawiki xmlns="http://www.mediawiki.org/xml/export-0.10/">']
    for page in pages:
        parts.append("  <page>")
        parts.append(f"    <title>{escape(page['title'])}</title>")
        parts.append(f"    <ns>{page.get('ns', 0)}</ns>")
        parts.append(f"    <id>{page['page_id']}</id>")
        for rev in page["revisions"]:
            parts.append("    <revision>")
            parts.append(f"      <id>{rev['rev_id']}</id>")
            parts.append(f"      <timestamp>{rev['timestamp']}</timestamp>")
            if "title" in rev:
                parts.append(f"      <title>{escape(rev['title'])}</title>")
            parts.append(f"      <text>{escape(rev['text'])}</text>")
            parts.append("    </revision>")
        parts.append("  </page>")
    parts.append("</mediawiki>")
    parts.append("")
    return "\n".join(parts)


def ts(year, month=6, day=15, hour=12) -> str:
    return f"{year:04d}-{month:02d}-{day:02d}T{hour:02d}:00:00Z"


def utc(year, month=6, day=15, hour=12) -> datetime:
    return datetime(year, month, day, hour, tzinfo=timezone.utc)


def random_dump_pages(rng: random.Random, n_pages: int = 50, max_revs: int = 20) -> list[dict]:
    """Pages with random revision histories: renames, post-cutoff-only pages."""
    pages = []
    for pid in range(1, n_pages + 1):
        n_revs = rng.randint(1, max_revs)
        post_cutoff_only = rng.random() < 0.1
        base_year = 2021 if post_cutoff_only else rng.randint(2014, 2020)
        renamed = rng.random() < 0.3
        revisions = []
        # Allow duplicate timestamps so rev-id tie-breaking gets exercised.
        stamps = sorted(
            ts(
                rng.randint(base_year, 2022),
                rng.randint(1, 12),
                rng.randint(1, 28),
                rng.randint(0, 23),
            )
            for _ in range(n_revs)
        )
        rename_at = rng.randrange(n_revs) if renamed and n_revs > 1 else None
        for i, stamp in enumerate(stamps):
            rev = {
                "rev_id": pid * 1000 + i,
                "timestamp": stamp,
                "text": f"Page {pid} content at revision {i}. " + "word " * rng.randint(1, 30),
            }
            if rename_at is not None:
                rev["title"] = f"Page {pid}" if i < rename_at else f"Page {pid} (renamed)"
            revisions.append(rev)
        pages.append(
            {
                "page_id": pid,
                "ns": 0 if rng.random() > 0.1 else 10,
                "title": revisions[-1].get("title", f"Page {pid}"),
                "revisions": revisions,
            }
        )
    return pages


@pytest.fixture
def write_dump(tmp_path):
    def _write(pages, name="dump.xml") -> Path:
        path = tmp_path / name
        path.write_text(dump_xml(pages), encoding="utf-8")
        return path

    return _write


# ---------------------------------------------------------------------------
# Synthetic decade fixture (leakage-shape and event-study tests)
# ---------------------------------------------------------------------------

DECADE_YEARS = list(range(2011, 2021))
EMERGENT_TERM = "zubraxin"
EMERGENCE_YEAR = 2017  # absent 2011-2016 (years 1-6), present 2017-2020

_BASE_WORDS = (
    "the a of to and in that for it with as on be at by this from or an "
    "market report year price growth trade state plan group week news world"
).split()


def decade_corpora(seed: int = 11) -> dict[int, list[str]]:
    """Ten yearly corpora; EMERGENT_TERM appears only from EMERGENCE_YEAR on."""
    rng = random.Random(seed)
    corpora = {}
    for year in DECADE_YEARS:
        docs = []
        for _ in range(40):
            words = [rng.choice(_BASE_WORDS) for _ in range(50)]
            docs.append(" ".join(words))
        if year >= EMERGENCE_YEAR:
            for i in range(0, 40, 2):
                docs[i] = docs[i] + f" {EMERGENT_TERM} report on {EMERGENT_TERM}"
        corpora[year] = docs
    return corpora


@pytest.fixture(scope="session")
def decade():
    return decade_corpora()


def leader_events(n: int = 20, seed: int = 3) -> list[tuple[str, int]]:
    """(name, emergence_year) pairs landing inside the decade's offset range."""
    rng = random.Random(seed)
    return [(f"leader{i:02d}", rng.randint(2014, 2018)) for i in range(n)]


def decade_with_leaders(seed: int = 11) -> tuple[dict[int, list[str]], list[tuple[str, int]]]:
    corpora = decade_corpora(seed)
    events = leader_events()
    for i, (term, start_year) in enumerate(events):
        for year in DECADE_YEARS:
            if year >= start_year:
                corpora[year][(i * 7) % 40] += f" {term} spoke today. {term} again."
    return corpora, events


# ---------------------------------------------------------------------------
# End-to-end pipeline fixture
# ---------------------------------------------------------------------------


def _pipeline_dump_pages() -> list[dict]:
    pages = [
        {
            "page_id": 1,
            "ns": 0,
            "title": "Alpha",
            "revisions": [
                {"rev_id": 11, "timestamp": ts(2015, 3, 1), "text": "Alpha ancient text. " + "alpha " * 40},
                {"rev_id": 12, "timestamp": ts(2019, 5, 2), "text": "Alpha newer text. " + "alpha " * 45},
                {"rev_id": 13, "timestamp": ts(2021, 1, 3), "text": "Alpha future text."},
            ],
        },
        {
            "page_id": 2,
            "ns": 0,
            "title": "Beta (renamed)",
            "revisions": [
                {"rev_id": 21, "timestamp": ts(2016, 2, 2), "text": "Beta early. " + "beta " * 30, "title": "Beta"},
                {"rev_id": 22, "timestamp": ts(2018, 7, 9), "text": "Beta renamed era. " + "beta " * 35, "title": "Beta (renamed)"},
            ],
        },
        {
            "page_id": 3,
            "ns": 0,
            "title": "Gamma",
            "revisions": [
                {"rev_id": 31, "timestamp": ts(2021, 6, 1), "text": "Created after both cutoffs."},
            ],
        },
        {
            "page_id": 4,
            "ns": 10,
            "title": "Template:Skip",
            "revisions": [{"rev_id": 41, "timestamp": ts(2015, 1, 1), "text": "{{template junk}}"}],
        },
        {
            "page_id": 5,
            "ns": 0,
            "title": "Redirector",
            "revisions": [{"rev_id": 51, "timestamp": ts(2015, 1, 1), "text": "#REDIRECT [[Alpha]]"}],
        },
    ]
    # Filler pages so sampling has a pool to draw from.
    rng = random.Random(1234)
    for pid in range(6, 30):
        year = rng.randint(2012, 2019)
        words = " ".join(rng.choice(_BASE_WORDS) for _ in range(rng.randint(30, 70)))
        pages.append(
            {
                "page_id": pid,
                "ns": 0,
                "title": f"Filler {pid}",
                "revisions": [
                    {"rev_id": pid * 10, "timestamp": ts(year, 4, 4), "text": f"Filler {pid}: {words}"}
                ],
            }
        )
    return pages


def build_pipeline_fixture(root: Path, years=(2019, 2020), with_eval: bool = True) -> Path:
    """Write a complete deterministic input tree; returns the config path."""
    root.mkdir(parents=True, exist_ok=True)
    (root / "dump.xml").write_text(dump_xml(_pipeline_dump_pages()), encoding="utf-8")

    rng = random.Random(99)
    for bucket in range(2015, 2021):
        bucket_dir = root / "news" / str(bucket)
        bucket_dir.mkdir(parents=True, exist_ok=True)
        for fi in range(2):
            docs = []
            for di in range(6):
                words = " ".join(rng.choice(_BASE_WORDS) for _ in range(rng.randint(20, 60)))
                docs.append(f"Bucket {bucket} file {fi} story {di}. {words}")
            if fi == 1:
                docs[3] = docs[0]  # planted exact duplicate
            if bucket >= 2019:
                docs[1] += " zubraxin outbreak coverage zubraxin"
            (bucket_dir / f"{bucket}-{fi}.txt").write_text("\n\n".join(docs), encoding="utf-8")

    vital_dir = root / "vital"
    vital_dir.mkdir(exist_ok=True)
    for year in years:
        (vital_dir / f"{year}.txt").write_text("1\n2\n", encoding="utf-8")

    events_csv = root / "events.csv"
    events_csv.write_text("term,event_year\nzubraxin,2019\n", encoding="utf-8")

    config = {
        "years": list(years),
        "seed": 7,
        "t_total": 400,
        "ratio_news": 0.6,
        "ratio_wiki": 0.4,
        "window_days": 1826,
        "seq_len": 64,
        "date_policy": "mid-year",
        "news_split": "blank-line",
        "tokenizer": {"kind": "whitespace"},
        "paths": {
            "wiki_dump": "dump.xml",
            "news_root": "news",
            "vital_root": "vital",
            "out_root": "out",
        },
    }
    if with_eval:
        config["eval"] = {
            "terms": ["zubraxin"],
            "events_csv": "events.csv",
            "alpha": 0.4,
            "k": 0.01,
            "offsets": [-1, 0, 1],
        }
    config_path = root / "config.json"
    config_path.write_text(json.dumps(config, indent=2), encoding="utf-8")
    return config_path


@pytest.fixture
def pipeline_fixture(tmp_path):
    return build_pipeline_fixture(tmp_path / "exp")
