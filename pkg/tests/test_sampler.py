"""Weight math against an arbitrary-precision oracle; draw-by-draw replay."""

import math
import random
from datetime import date

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chronoforge.sampler import (
    BudgetState,
    CutoffSpec,
    compute_weights,
    sample_to_budget,
    uniform_weights,
    wiki_select,
)

SPEC = CutoffSpec(date(2020, 12, 31), window_days=1826)


# ---------------------------------------------------------------------------
# compute_weights
# ---------------------------------------------------------------------------


def mp_probs(ages, tau):
    """Direct high-precision evaluation of the weight/probability formulas."""
    with mpmath.workdps(60):
        d_max = max(ages)
        inv_w = [mpmath.e ** (mpmath.mpf(d_max - a) / tau) for a in ages]
        # inverse of W_i = exp(-(d_max - a)/tau)
        inv = [1 / mpmath.e ** (-(mpmath.mpf(d_max - a)) / tau) for a in ages]
        assert all(abs(x - y) < mpmath.mpf("1e-50") for x, y in zip(inv_w, inv))
        total = sum(inv_w)
        return [x / total for x in inv_w]


def test_weight_is_one_at_max_age():
    table = compute_weights([("a", 300), ("b", 1826)], SPEC)
    assert table.weights[1] == 1.0
    assert table.d_max == 1826


def test_equal_ages_split_evenly():
    table = compute_weights([("a", 100), ("b", 100)], SPEC)
    assert table.probs == [0.5, 0.5]


def test_probs_match_arbitrary_precision_oracle():
    ages = [0, 913, 1826]
    table = compute_weights(list(zip("abc", ages)), SPEC)
    expected = mp_probs(ages, 1826)
    for got, want in zip(table.probs, expected):
        assert abs(got - float(want)) / float(want) < 1e-12
    # frozen reference values
    assert table.probs[0] == pytest.approx(0.50648, abs=5e-6)
    assert table.probs[1] == pytest.approx(0.30720, abs=5e-6)
    assert table.probs[2] == pytest.approx(0.18632, abs=5e-6)


def test_newest_to_oldest_ratio_is_e_when_tau_equals_dmax():
    table = compute_weights([("new", 0), ("mid", 913), ("old", 1826)], SPEC)
    assert abs(table.probs[0] / table.probs[2] - math.e) < 1e-9


def test_empty_pool_rejected():
    with pytest.raises(ValueError, match="empty"):
        compute_weights([], SPEC)


def test_age_outside_window_names_doc():
    with pytest.raises(ValueError, match="doc 'late'"):
        compute_weights([("ok", 10), ("late", 1827)], SPEC)
    with pytest.raises(ValueError, match="doc 'future'"):
        compute_weights([("future", -1)], SPEC)


@given(st.lists(st.integers(min_value=0, max_value=1826), min_size=1, max_size=50))
@settings(max_examples=200)
def test_normalization_and_monotonicity(ages):
    pool = [(f"d{i}", a) for i, a in enumerate(ages)]
    table = compute_weights(pool, SPEC)
    assert abs(sum(table.probs) - 1.0) < 1e-9
    assert all(p > 0 for p in table.probs)
    assert all(0.0 < w <= 1.0 for w in table.weights)
    for i in range(len(ages)):
        for j in range(len(ages)):
            if ages[i] < ages[j]:
                assert table.probs[i] > table.probs[j]


@given(
    st.lists(st.integers(min_value=0, max_value=900), min_size=1, max_size=30),
    st.integers(min_value=0, max_value=900),
)
@settings(max_examples=200)
def test_shift_invariance(ages, shift):
    base = compute_weights([(f"d{i}", a) for i, a in enumerate(ages)], SPEC)
    shifted = compute_weights([(f"d{i}", a + shift) for i, a in enumerate(ages)], SPEC)
    for p, q in zip(base.probs, shifted.probs):
        assert abs(p - q) < 1e-12


@pytest.mark.slow
def test_normalization_on_million_entry_pool():
    rng = random.Random(0)
    pool = [(i, rng.randint(0, 1826)) for i in range(1_000_000)]
    table = compute_weights(pool, SPEC)
    assert abs(sum(table.probs) - 1.0) < 1e-9


# ---------------------------------------------------------------------------
# reference simulation of the draw protocol
# ---------------------------------------------------------------------------


def reference_simulation(doc_ids, scores, t_needed, token_counts, seed, replacement=False):
    """Step-by-step replay of the documented protocol, kept deliberately
    naive: recompute the remaining pool and its score sum on every draw."""
    rng = random.Random(seed)
    remaining = list(range(len(doc_ids)))
    accepted = []
    t_current = 0
    rejected = 0
    draws = 0
    cap = 50 * len(doc_ids)
    while t_current < t_needed:
        if not any(token_counts[doc_ids[i]] <= t_needed - t_current for i in remaining):
            break
        if replacement and draws >= cap:
            break
        total = sum(scores[i] for i in remaining)
        if total <= 0:
            break
        target = rng.random() * total
        acc = 0.0
        chosen = remaining[-1]
        for i in remaining:
            acc += scores[i]
            if acc > target:
                chosen = i
                break
        draws += 1
        if t_current + token_counts[doc_ids[chosen]] <= t_needed:
            accepted.append(doc_ids[chosen])
            t_current += token_counts[doc_ids[chosen]]
            if not replacement:
                remaining.remove(chosen)
        else:
            rejected += 1
            if not replacement:
                remaining.remove(chosen)
    return accepted, t_current, rejected


def test_zero_budget():
    table = uniform_weights(["a", "b"])
    state = sample_to_budget(table, 0, {"a": 5, "b": 5}, seed=1)
    assert state.accepted == [] and state.t_current == 0


def test_single_doc_exact_fit():
    table = uniform_weights(["only"])
    state = sample_to_budget(table, 10, {"only": 10}, seed=1)
    assert state.accepted == ["only"] and state.t_current == 10


def test_nonpositive_token_count_rejected():
    table = uniform_weights(["a"])
    with pytest.raises(ValueError, match="non-positive"):
        sample_to_budget(table, 5, {"a": 0}, seed=1)


def test_negative_budget_rejected():
    with pytest.raises(ValueError):
        sample_to_budget(uniform_weights(["a"]), -1, {"a": 1}, seed=1)


def test_draws_match_reference_simulation_over_seeds():
    doc_ids = ["p5", "p7", "p9"]
    counts = {"p5": 5, "p7": 7, "p9": 9}
    table = compute_weights([("p5", 100), ("p7", 800), ("p9", 1500)], SPEC)
    scores = table.selection_scores()
    for seed in range(1000):
        state = sample_to_budget(table, 12, counts, seed)
        ref_accepted, ref_total, ref_rejected = reference_simulation(
            doc_ids, scores, 12, counts, seed
        )
        assert state.accepted == ref_accepted
        assert state.t_current == ref_total
        assert state.rejected_overshoot_count == ref_rejected
        assert state.t_current <= 12
        # 5+7=12 fits; any other realized prefix leaves a maximal fitting set
        assert state.t_current in (5, 7, 9, 12)


def test_budget_safety_and_exact_replay_random_triples():
    rng = random.Random(2024)
    for _ in range(300):
        n = rng.randint(1, 12)
        doc_ids = [f"d{i}" for i in range(n)]
        counts = {d: rng.randint(1, 40) for d in doc_ids}
        ages = [rng.randint(0, 1826) for _ in range(n)]
        table = compute_weights(list(zip(doc_ids, ages)), SPEC)
        budget = rng.randint(0, 120)
        seed = rng.randrange(10_000)
        state = sample_to_budget(table, budget, counts, seed)
        ref = reference_simulation(doc_ids, table.selection_scores(), budget, counts, seed)
        assert state.accepted == ref[0]
        assert state.t_current == ref[1] <= budget
        assert len(set(state.accepted)) == len(state.accepted)


def test_replacement_mode_halts_and_matches_reference():
    table = uniform_weights(["a", "b"])
    counts = {"a": 3, "b": 4}
    state = sample_to_budget(table, 9, counts, seed=5, replacement=True)
    ref = reference_simulation(["a", "b"], [1.0, 1.0], 9, counts, 5, replacement=True)
    assert state.accepted == ref[0]
    assert state.t_current <= 9
    assert state.draws <= 50 * 2


def test_seed_determinism():
    table = compute_weights([(f"d{i}", i * 90) for i in range(20)], SPEC)
    counts = {f"d{i}": 3 + i for i in range(20)}
    first = sample_to_budget(table, 60, counts, seed=42)
    second = sample_to_budget(table, 60, counts, seed=42)
    assert first.accepted == second.accepted


# ---------------------------------------------------------------------------
# wiki_select
# ---------------------------------------------------------------------------


def test_vital_set_equal_to_pool_accepted_iff_fits():
    counts = {"a": 4, "b": 5}
    state = wiki_select(["a", "b"], {"a", "b"}, 9, counts, seed=1)
    assert sorted(state.accepted) == ["a", "b"]
    with pytest.raises(ValueError, match="increase the wiki budget"):
        wiki_select(["a", "b"], {"a", "b"}, 8, counts, seed=1)


def test_empty_vital_reduces_to_uniform_sampling():
    pool = [f"d{i}" for i in range(8)]
    counts = {d: 5 for d in pool}
    via_wiki = wiki_select(pool, set(), 20, counts, seed=3)
    via_uniform = sample_to_budget(uniform_weights(pool), 20, counts, seed=3)
    assert via_wiki.accepted == via_uniform.accepted


def test_vital_ids_must_be_in_pool():
    with pytest.raises(ValueError, match="not present in pool"):
        wiki_select(["a"], {"ghost"}, 10, {"a": 1}, seed=1)


def test_all_vital_present_across_seeds():
    pool = [f"d{i}" for i in range(100)]
    counts = {d: 10 for d in pool}
    vital = {f"d{i}" for i in range(10)}
    budget = 500  # fits ~50 docs
    for seed in range(1, 101):
        state = wiki_select(pool, vital, budget, counts, seed)
        assert vital <= set(state.accepted)
        assert state.t_current <= budget
        assert len(set(state.accepted)) == len(state.accepted)


def test_budget_state_residual():
    state = BudgetState(t_needed=10, t_current=7)
    assert state.residual == 3
