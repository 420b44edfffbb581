"""Temporal sampling: recency weighting, budgeted draws, vital inclusion.

News entries inside the recency window get exponential age weights
``W_i = exp(-(D_max - D_i) / tau)`` and selection probability proportional to
``1 / W_i``, so newer entries (smaller age ``D_i``) are more probable; only
the age differences ``D_max - D_i`` matter. Wikipedia pages are sampled
uniformly, with vital pages force-included first.

Draw protocol (relied on by callers that replay a run): a single
``random.Random(seed)`` stream, one ``u = rng.random()`` per draw, selecting
the first entry whose running score sum exceeds ``u * total_score`` over the
currently remaining pool. A drawn entry whose token count would push the
total past the budget is discarded (and removed from the pool when sampling
without replacement). Sampling halts when the budget is met exactly, nothing
remaining fits the residual, or the pool is exhausted; with replacement a cap
of 50 draws per pool entry guarantees halting.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from datetime import date
from typing import Mapping, Sequence

DEFAULT_WINDOW_DAYS = 1826  # ~5 years
REPLACEMENT_DRAW_CAP_FACTOR = 50


@dataclass(frozen=True)
class CutoffSpec:
    """Cutoff date plus the recency window geometry.

    ``tau_days`` is the decay scale measured from window start to cutoff; by
    construction it defaults to ``window_days``.
    """

    cutoff_date: date
    window_days: int = DEFAULT_WINDOW_DAYS
    tau_days: int | None = None

    def __post_init__(self):
        if self.window_days <= 0:
            raise ValueError("window_days must be positive")
        if self.tau_days is None:
            object.__setattr__(self, "tau_days", self.window_days)
        if self.tau_days <= 0:
            raise ValueError("tau_days must be positive")

    def age_days(self, day: date) -> int:
        return (self.cutoff_date - day).days

    def in_window(self, day: date) -> bool:
        return 0 <= self.age_days(day) <= self.window_days


@dataclass
class WeightTable:
    doc_ids: list
    ages: list[int]
    d_max: int
    weights: list[float]
    probs: list[float]

    @property
    def n(self) -> int:
        return len(self.doc_ids)

    def selection_scores(self) -> list[float]:
        """Unnormalized per-entry draw scores (1/W_i); probs renormalize."""
        return [1.0 / w for w in self.weights]


@dataclass
class BudgetState:
    t_needed: int
    t_current: int = 0
    accepted: list = field(default_factory=list)
    rejected_overshoot_count: int = 0
    draws: int = 0
    pool_exhausted: bool = False

    @property
    def residual(self) -> int:
        return self.t_needed - self.t_current


def compute_weights(pool: Sequence[tuple], spec: CutoffSpec) -> WeightTable:
    """Weight table for (doc_id, age_days) entries inside the window."""
    if not pool:
        raise ValueError("cannot compute weights for an empty pool")
    tau = float(spec.tau_days)
    ages = []
    for doc_id, age in pool:
        if not 0 <= age <= spec.window_days:
            raise ValueError(
                f"doc {doc_id!r} has age {age} days, outside [0, {spec.window_days}]"
            )
        ages.append(age)
    d_max = max(ages)
    weights = [math.exp(-(d_max - a) / tau) for a in ages]
    scores = [1.0 / w for w in weights]
    total = math.fsum(scores)
    probs = [s / total for s in scores]
    return WeightTable(
        doc_ids=[doc_id for doc_id, _ in pool],
        ages=ages,
        d_max=d_max,
        weights=weights,
        probs=probs,
    )


def uniform_weights(doc_ids: Sequence) -> WeightTable:
    n = len(doc_ids)
    if n == 0:
        raise ValueError("cannot compute weights for an empty pool")
    return WeightTable(
        doc_ids=list(doc_ids),
        ages=[0] * n,
        d_max=0,
        weights=[1.0] * n,
        probs=[1.0 / n] * n,
    )


def _draw_index(rng: random.Random, scores: list[float], live: list[bool]) -> int | None:
    total = 0.0
    for i, alive in enumerate(live):
        if alive:
            total += scores[i]
    if total <= 0.0:
        return None
    target = rng.random() * total
    acc = 0.0
    last = None
    for i, alive in enumerate(live):
        if not alive:
            continue
        acc += scores[i]
        last = i
        if acc > target:
            return i
    return last  # float round-off on the final prefix sum


def _run_draws(
    weights: WeightTable,
    token_counts: Mapping,
    rng: random.Random,
    state: BudgetState,
    replacement: bool,
) -> BudgetState:
    scores = weights.selection_scores()
    live = [True] * weights.n
    counts = [token_counts[d] for d in weights.doc_ids]
    for c, d in zip(counts, weights.doc_ids):
        if c <= 0:
            raise ValueError(f"doc {d!r} has non-positive token count {c}")
    draw_cap = REPLACEMENT_DRAW_CAP_FACTOR * weights.n if replacement else None

    while state.t_current < state.t_needed:
        fitting = any(
            live[i] and counts[i] <= state.residual for i in range(weights.n)
        )
        if not fitting:
            state.pool_exhausted = not any(live)
            break
        if draw_cap is not None and state.draws >= draw_cap:
            break
        idx = _draw_index(rng, scores, live)
        if idx is None:
            state.pool_exhausted = True
            break
        state.draws += 1
        doc_id = weights.doc_ids[idx]
        if state.t_current + counts[idx] <= state.t_needed:
            state.accepted.append(doc_id)
            state.t_current += counts[idx]
            if not replacement:
                live[idx] = False
        else:
            state.rejected_overshoot_count += 1
            if not replacement:
                live[idx] = False
    return state


def sample_to_budget(
    weights: WeightTable,
    t_needed: int,
    token_counts: Mapping,
    seed: int,
    replacement: bool = False,
) -> BudgetState:
    """Draw documents under the budget-acceptance rule until sampling halts.

    The accumulated total never exceeds ``t_needed``; an empty or exhausted
    pool leaves a partial result with the residual recorded, not an error.
    """
    if t_needed < 0:
        raise ValueError("t_needed must be >= 0")
    state = BudgetState(t_needed=t_needed)
    if t_needed == 0:
        return state
    return _run_draws(weights, token_counts, random.Random(seed), state, replacement)


def wiki_select(
    pool_ids: Sequence,
    vital_ids,
    wiki_budget: int,
    token_counts: Mapping,
    seed: int,
) -> BudgetState:
    """Vital pages first (unconditionally), then uniform draws to budget."""
    vital = set(vital_ids)
    pool_set = set(pool_ids)
    missing = vital - pool_set
    if missing:
        raise ValueError(f"vital ids not present in pool: {sorted(missing)[:5]}")
    vital_tokens = sum(token_counts[d] for d in vital)
    if vital_tokens > wiki_budget:
        raise ValueError(
            f"vital pages need {vital_tokens} tokens but the budget is {wiki_budget}; "
            "increase the wiki budget"
        )
    state = BudgetState(t_needed=wiki_budget)
    for doc_id in pool_ids:
        if doc_id in vital:
            state.accepted.append(doc_id)
            state.t_current += token_counts[doc_id]
    rest = [d for d in pool_ids if d not in vital]
    if not rest or state.t_current >= state.t_needed:
        state.pool_exhausted = not rest
        return state
    return _run_draws(uniform_weights(rest), token_counts, random.Random(seed), state, False)
