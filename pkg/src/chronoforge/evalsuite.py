"""Temporal-leakage audit: zero-context perplexity across yearly scorers.

A scorer maps each token of a term to a probability with no preceding
context; the term's perplexity is ``exp(-mean(log p))`` over its tokens.
The built-in scorer is count-based with add-k smoothing,

    p(x) = (count(x) + k) / (total + k * V),

where V is the number of distinct tokens seen in training. Its ceiling
``(total + k*V) / k`` is the perplexity of a never-seen token and is reported
next to every value so "never seen" is distinguishable from "rare".
External per-token probability tables can be imported as scorers under the
same zero-context contract.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Iterable, Mapping, Sequence

from .tokenizer import tokenizer_digest


@dataclass
class PerplexityReport:
    term: str
    scorer_id: str
    token_reprs: list[str]
    log_probs: list[float]
    ppl: float
    ceiling: float | None

    @property
    def token_count(self) -> int:
        return len(self.log_probs)


class CountScorer:
    """Unigram counts with add-k smoothing over one training corpus."""

    def __init__(self, tokenizer, counts: Mapping, total, k: float, scorer_id: str = ""):
        if k <= 0:
            raise ValueError("smoothing k must be positive")
        if total <= 0:
            raise ValueError("scorer trained on an empty corpus")
        self.tokenizer = tokenizer
        self.tokenizer_digest = tokenizer_digest(tokenizer)
        self.counts = dict(counts)
        self.total = total
        self.k = k
        self.scorer_id = scorer_id
        self.vocab_size = len(self.counts)

    def prob(self, key) -> float:
        return (self.counts.get(key, 0) + self.k) / (self.total + self.k * self.vocab_size)

    def log_prob(self, key) -> float:
        return math.log(self.prob(key))

    @property
    def ceiling(self) -> float:
        """Perplexity of a fully-unseen single token."""
        return (self.total + self.k * self.vocab_size) / self.k


def train_scorer(corpus: Iterable[str], tokenizer, k: float = 0.01, scorer_id: str = "") -> CountScorer:
    """Count every token occurrence in the corpus texts."""
    counts: dict = {}
    total = 0
    for text in corpus:
        for key in tokenizer.scoring_keys(text):
            counts[key] = counts.get(key, 0) + 1
            total += 1
    if total == 0:
        raise ValueError("cannot train a scorer on an empty corpus")
    return CountScorer(tokenizer, counts, total, k, scorer_id)


class CtaScorer:
    """Base scorer further trained on period data: the audited leakage path.

    Adaptation mixes the two smoothed components in proportion to effective
    token mass (base total vs alpha * adaptation total) over their union
    vocabulary. Adapting a scorer on its own training corpus leaves every
    probability unchanged, and as alpha grows the probabilities converge to
    the adaptation corpus's own smoothed distribution; anything the base
    scorer saw retains probability mass forever, which is exactly the
    foresight this suite measures.
    """

    def __init__(self, base: CountScorer, adapt: CountScorer, alpha: float, scorer_id: str = ""):
        if alpha <= 0:
            raise ValueError("alpha must be positive")
        if base.tokenizer_digest != adapt.tokenizer_digest:
            raise ValueError("base and adaptation scorers use different tokenizers")
        self.tokenizer = base.tokenizer
        self.tokenizer_digest = base.tokenizer_digest
        self.base = base
        self.adapt = adapt
        self.alpha = alpha
        self.k = base.k
        self.scorer_id = scorer_id or f"{base.scorer_id}+cta"
        self.vocab_size = len(set(base.counts) | set(adapt.counts))
        mass = base.total + alpha * adapt.total
        self._w_base = base.total / mass
        self._w_adapt = alpha * adapt.total / mass

    def _component(self, scorer: CountScorer, key) -> float:
        return (scorer.counts.get(key, 0) + self.k) / (scorer.total + self.k * self.vocab_size)

    def prob(self, key) -> float:
        return self._w_base * self._component(self.base, key) + self._w_adapt * self._component(
            self.adapt, key
        )

    def log_prob(self, key) -> float:
        return math.log(self.prob(key))

    @property
    def ceiling(self) -> float:
        floor = self._w_base * self.k / (self.base.total + self.k * self.vocab_size) + (
            self._w_adapt * self.k / (self.adapt.total + self.k * self.vocab_size)
        )
        return 1.0 / floor


def cta_adapt(base: CountScorer, adaptation_corpus: Iterable[str], alpha: float, scorer_id: str = "") -> CtaScorer:
    """Further train an existing scorer on adaptation-period texts.

    ``alpha`` is the adaptation weight (adaptation budget / base budget).
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    adapt = train_scorer(adaptation_corpus, base.tokenizer, base.k, f"{base.scorer_id}-period")
    return CtaScorer(base, adapt, alpha, scorer_id)


class TableScorer:
    """Imported zero-context probability table (e.g. from a neural model).

    Every token probability must be conditioned on an empty prefix. Tokens
    are looked up by their string form under the declared tokenizer.
    """

    def __init__(self, probs: Mapping[str, float], tokenizer, scorer_id: str = "", unseen_prob: float | None = None):
        self.tokenizer = tokenizer
        self.tokenizer_digest = tokenizer_digest(tokenizer)
        self.probs = dict(probs)
        self.scorer_id = scorer_id
        self.unseen_prob = unseen_prob

    def log_prob(self, key) -> float:
        rep = self.tokenizer.key_repr(key)
        p = self.probs.get(rep, self.unseen_prob)
        if p is None:
            raise ValueError(f"imported table has no probability for token {rep!r}")
        return math.log(p)

    @property
    def ceiling(self) -> float | None:
        return 1.0 / self.unseen_prob if self.unseen_prob else None


def load_table_scorer(path, tokenizer) -> TableScorer:
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    declared = obj.get("tokenizer_digest")
    actual = tokenizer_digest(tokenizer)
    if declared and declared != actual:
        raise ValueError(
            f"imported scorer declares tokenizer {declared[:12]}… but the "
            f"configured tokenizer is {actual[:12]}…"
        )
    return TableScorer(
        obj["probabilities"],
        tokenizer,
        scorer_id=obj.get("scorer_id", ""),
        unseen_prob=obj.get("unseen_prob"),
    )


def zero_context_ppl(term: str, scorer) -> PerplexityReport:
    """Perplexity of a term's tokens, each scored with no preceding context."""
    if not term or not term.strip():
        raise ValueError("term must be non-empty")
    keys = scorer.tokenizer.scoring_keys(term)
    if not keys:
        raise ValueError(f"term {term!r} produced no tokens")
    log_probs = [scorer.log_prob(key) for key in keys]
    ppl = math.exp(-sum(log_probs) / len(log_probs))
    return PerplexityReport(
        term=term,
        scorer_id=getattr(scorer, "scorer_id", ""),
        token_reprs=[scorer.tokenizer.key_repr(k) for k in keys],
        log_probs=log_probs,
        ppl=ppl,
        ceiling=scorer.ceiling,
    )


@dataclass
class EventStudy:
    events: list[tuple]
    offsets: list[int]
    mean_ppl: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "events": [[term, year] for term, year in self.events],
            "offsets": list(self.offsets),
            "mean_ppl": {str(o): self.mean_ppl[o] for o in self.offsets},
            "counts": {str(o): self.counts[o] for o in self.offsets},
        }


def event_study(
    events: Sequence[tuple],
    scorers_by_year: Mapping[int, object],
    offsets: Sequence[int],
) -> EventStudy:
    """Mean term perplexity by year offset relative to each event year."""
    if not events:
        raise ValueError("need at least one (term, event_year) pair")
    study = EventStudy(events=[(t, int(y)) for t, y in events], offsets=list(offsets))
    covered = 0
    for offset in study.offsets:
        values = []
        for term, year in study.events:
            scorer = scorers_by_year.get(year + offset)
            if scorer is None:
                continue
            values.append(zero_context_ppl(term, scorer).ppl)
        study.counts[offset] = len(values)
        study.mean_ppl[offset] = (sum(values) / len(values)) if values else None
        covered += len(values)
    if covered == 0:
        raise ValueError("no scorer covers any (event, offset) combination")
    return study


def read_events_csv(path) -> list[tuple]:
    """Events file: CSV with columns term, event_year."""
    events = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "term" not in reader.fieldnames or "event_year" not in reader.fieldnames:
            raise ValueError(f"{path}: events CSV needs 'term' and 'event_year' columns")
        for row in reader:
            events.append((row["term"], int(row["event_year"])))
    return events


def count_occurrences(term: str, texts: Iterable[str], case_sensitive: bool = True) -> int:
    """Non-overlapping substring occurrences of the term."""
    if not term:
        raise ValueError("term must be non-empty")
    if case_sensitive:
        return sum(text.count(term) for text in texts)
    folded = term.casefold()
    return sum(text.casefold().count(folded) for text in texts)


def count_occurrences_by_year(
    term: str, texts_by_year: Mapping[int, Iterable[str]], case_sensitive: bool = True
) -> dict[int, int]:
    return {
        year: count_occurrences(term, texts, case_sensitive)
        for year, texts in sorted(texts_by_year.items())
    }


@dataclass
class EmissionsReport:
    energy_kwh: Decimal
    intensity_g_per_kwh: Decimal
    emissions_g: Decimal

    def to_dict(self) -> dict:
        return {
            "energy_kwh": str(self.energy_kwh),
            "carbon_intensity_g_per_kwh": str(self.intensity_g_per_kwh),
            "emissions_g_co2eq": str(self.emissions_g),
            "emissions_kg_co2eq": str(self.emissions_g / Decimal(1000)),
        }


def _as_decimal(value) -> Decimal:
    if isinstance(value, Decimal):
        return value
    if isinstance(value, float):
        return Decimal(str(value))
    return Decimal(value)


def emissions(energy_kwh, intensity_g_per_kwh) -> EmissionsReport:
    """Exact product of energy and grid carbon intensity (decimal math)."""
    e = _as_decimal(energy_kwh)
    ci = _as_decimal(intensity_g_per_kwh)
    if e < 0 or ci < 0:
        raise ValueError("energy and carbon intensity must be non-negative")
    return EmissionsReport(energy_kwh=e, intensity_g_per_kwh=ci, emissions_g=e * ci)
