import math
import warnings

import pytest
from hypothesis import assume, given, settings, strategies as st

from modalroute.complexity import (
    ComplexitySettings, ComplexityWeights, KeywordDictionary, Threshold, calibrate_tau, class_distribution,
    complexity, detect_signals, intent_alignment, linguistic_complexity, profile_from_features,
    structural_complexity, tau_grid, token_entropy,
)
from modalroute.core import Query, TaskCategory
from modalroute.errors import BudgetInfeasible, EmptyText
from modalroute.evaluation.corpus import VALIDATION_PATH, load_corpus, validation_items

unit = st.floats(0.0, 1.0, allow_nan=False)


def test_weights_must_sum_to_one():
    with pytest.raises(ValueError):
        ComplexityWeights(0.5, 0.5, 0.5)


def test_intent_alignment_examples():
    d = KeywordDictionary({TaskCategory.MATH: {"integral": 5, "derivative": 3}})
    assert intent_alignment("hello", d) == 0.0
    assert intent_alignment("the integral and the derivative", d, 8.0) == pytest.approx(0.5)
    assert intent_alignment("integral", d) <= intent_alignment("integral derivative", d)


def test_dictionary_validation():
    with pytest.raises(ValueError):
        KeywordDictionary({TaskCategory.MATH: {"Integral": 3}})
    with pytest.raises(ValueError):
        KeywordDictionary({TaskCategory.MATH: {"integral": 6}})


def test_linguistic_examples():
    assert linguistic_complexity("") == 0.0
    assert token_entropy("a a a a".split()) == 0.0
    assert token_entropy("w x y z".split()) == pytest.approx(1.0)


def test_structural_examples():
    assert structural_complexity("the weather was pleasant all week") == (0.0, set())
    assert "code_block" in detect_signals("```def f(x): return x```")
    assert "sql" in detect_signals("SELECT name FROM users WHERE id = 3")


def test_complexity_examples():
    s = ComplexitySettings()
    zero = profile_from_features(0, 0, 0, s)
    assert zero.score == 0.0
    assert zero.class_dist["low"] == max(zero.class_dist.values())
    eq = ComplexitySettings(weights=ComplexityWeights(1 / 3, 1 / 3, 1 / 3))
    assert profile_from_features(0.6, 0.6, 0.6, eq).score == pytest.approx(0.6)
    with pytest.raises(EmptyText):
        complexity("  ", KeywordDictionary({}))


@settings(max_examples=1000)
@given(unit, unit, unit, st.sampled_from([0, 1, 2]), st.floats(-0.3, 0.3, allow_nan=False))
def test_score_is_linear_in_each_feature(i, l, s, which, delta):
    cfg = ComplexitySettings()
    w = cfg.weights
    base = profile_from_features(i, l, s, cfg).score
    feats = [i, l, s]
    feats[which] += delta
    moved = profile_from_features(*feats, cfg).score
    coef = (w.alpha, w.beta, w.gamma)[which]
    assert moved - base == pytest.approx(coef * delta, abs=1e-12)
    assert base == w.alpha * i + w.beta * l + w.gamma * s


@settings(max_examples=1000)
@given(unit, unit, unit, unit, unit, unit)
def test_p_high_strictly_monotone(i1, l1, s1, i2, l2, s2):
    cfg = ComplexitySettings()
    a = profile_from_features(i1, l1, s1, cfg)
    b = profile_from_features(i2, l2, s2, cfg)
    assume(abs(a.score - b.score) > 1e-9)
    hi, lo = (a, b) if a.score > b.score else (b, a)
    assert hi.p_high > lo.p_high
    assert sum(a.class_dist.values()) == pytest.approx(1.0, abs=1e-9)
    assert all(p >= 0 for p in a.class_dist.values())


@given(st.text(max_size=300))
def test_features_stay_in_unit_interval(text):
    d = KeywordDictionary({TaskCategory.MATH: {"solve": 3}})
    assert 0.0 <= intent_alignment(text, d) < 1.0
    assert 0.0 <= linguistic_complexity(text) <= 1.0
    s, _ = structural_complexity(text)
    assert 0.0 <= s <= 1.0


def test_class_distribution_cut_points():
    assert class_distribution(0.35)["low"] == pytest.approx(0.5, abs=0.03)
    assert class_distribution(0.65)["high"] == pytest.approx(0.5)


class FixedPlanner:
    def __init__(self, rows):
        self.rows = rows

    def split_decision(self, q):
        return self.rows[q.id]


def _fixture(n=10, gold="premium"):
    rows = {f"q{k}": (k / n, "efficient", 0.1, "premium", 1.0) for k in range(n)}
    items = [(Query(f"q{k}", "x"), TaskCategory.GENERAL, gold) for k in range(n)]
    return items, FixedPlanner(rows)


def test_zero_budget_forces_never_escalate():
    items, planner = _fixture()
    with pytest.warns(BudgetInfeasible):
        th = calibrate_tau(items, 0.0, planner)
    assert th.tau == 1.0 and not th.feasible


def test_all_premium_picks_largest_maximizer():
    items, planner = _fixture()
    th = calibrate_tau(items, float("inf"), planner)
    # every item scores below 1.0, so any tau <= 0.0 escalates all of them; the largest such grid point is 0.0
    assert th.accuracy == 1.0
    assert th.tau == 0.0


def test_tie_break_prefers_larger_tau():
    rows = {"a": (0.5, "efficient", 0.1, "premium", 1.0)}
    items = [(Query("a", "x"), TaskCategory.GENERAL, "premium")]
    th = calibrate_tau(items, 10.0, FixedPlanner(rows))
    assert th.tau == 0.5


def grid_oracle(decisions, golds, budget):
    """Independent re-implementation: enumerate tau = k/100 and keep the best feasible row."""
    best = None
    for k in range(101):
        tau = k / 100
        hits, cost = 0, 0.0
        for (score, t_lo, c_lo, t_hi, c_hi), gold in zip(decisions, golds):
            if score >= tau:
                hits += t_hi == gold
                cost += c_hi
            else:
                hits += t_lo == gold
                cost += c_lo
        acc = hits / len(golds)
        if cost <= budget + 1e-12 and (best is None or acc > best[1] or (acc == best[1] and tau > best[0])):
            best = (tau, acc, cost)
    return best


@pytest.mark.parametrize("budget", [40.0, 80.0, 120.0, 1e9])
def test_calibrate_matches_grid_oracle_on_validation(engine, budget):
    val = validation_items(load_corpus(VALIDATION_PATH))
    assert len(val) == 200
    decisions = [engine.split_decision(q) for q, _, _ in val]
    oracle = grid_oracle(decisions, [g for _, _, g in val], budget)
    th = calibrate_tau(val, budget, engine)
    assert oracle is not None
    assert th.tau == pytest.approx(oracle[0], abs=1e-12)
    assert th.accuracy == oracle[1]
    assert th.budget_used == pytest.approx(oracle[2], abs=1e-9)


def test_more_budget_never_lowers_accuracy():
    items, planner = _fixture(20, "premium")
    accs = []
    for b in (0.0, 2.0, 5.0, 9.0, 15.0, 100.0):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", BudgetInfeasible)
            accs.append(calibrate_tau(items, b, planner).accuracy)
    assert accs == sorted(accs)


def test_threshold_bounds_and_grid():
    with pytest.raises(ValueError):
        Threshold(1.5, 0.0, 0.0)
    g = tau_grid(0.01)
    assert len(g) == 101 and g[0] == 0.0 and g[-1] == 1.0
    assert math.isclose(g[55], 0.55)
