import random

import pytest
from hypothesis import given, strategies as st

from modalroute.complexity import ComplexityProfile
from modalroute.core import Modality, PolicyMode, TaskCategory, Tier, UserPolicy
from modalroute.errors import ConfigError, NoFeasibleRoute
from modalroute.intent import IntentResult
from modalroute.routing import (
    Route, RouteContext, RouteKind, RoutingWeights, route_nontext, route_text, score_route, select_route,
)

W = RoutingWeights()
CATS = list(TaskCategory)
MODS = [Modality.TEXT, Modality.IMAGE, Modality.AUDIO, Modality.VIDEO, Modality.DOCUMENT]


def mk(rid, tier=Tier.OPEN_SOURCE, mods=(Modality.TEXT,), aff=None, cost=0.1, kind=None):
    kind = kind or (RouteKind.PREMIUM if tier is Tier.PREMIUM else RouteKind.EFFICIENT)
    return Route(rid, kind, f"{rid}-b", tier, frozenset(mods), aff or {}, cost)


def ctx(category=TaskCategory.GENERAL, mods=(Modality.TEXT,), policy=None, modality=Modality.TEXT):
    return RouteContext(modality, frozenset(mods), category, policy or UserPolicy())


def test_weights_invariants():
    assert sum((W.delta_m, W.delta_u, W.delta_t, W.lambda_c)) == pytest.approx(1.0)
    with pytest.raises(ConfigError):
        RoutingWeights(0.2, 0.3, 0.4, 0.1)  # priority order violated
    w = RoutingWeights.normalized(4, 3, 2, 1)
    assert w == RoutingWeights(0.4, 0.3, 0.2, 0.1)


def test_efficient_route_cannot_be_premium():
    with pytest.raises(ConfigError):
        Route("x", RouteKind.EFFICIENT, "b", Tier.PREMIUM, frozenset({Modality.TEXT}), {}, 0.1)


def test_score_examples():
    r = mk("a", aff={TaskCategory.MATH: 1.0}, cost=0.0)
    u, _ = score_route(ctx(TaskCategory.MATH), r, W)
    assert u == pytest.approx(W.delta_m + W.delta_u + W.delta_t)
    u2, comp = score_route(ctx(TaskCategory.MATH, (Modality.IMAGE,), modality=Modality.IMAGE), r, W)
    assert comp.s_m == 0.0
    assert u - u2 == pytest.approx(W.delta_m)


def test_three_route_hand_computation():
    routes = [
        mk("r1", aff={TaskCategory.CODING: 0.9}, cost=0.16),
        mk("r2", tier=Tier.PREMIUM, aff={TaskCategory.CODING: 1.0}, cost=1.0),
        mk("r3", mods=(Modality.IMAGE,), aff={TaskCategory.CODING: 0.2}, cost=0.2),
    ]
    d = select_route(ctx(TaskCategory.CODING), routes, W, cost_scale=1.0)
    # r1: .4 + .3 + .2*.9 - .1*.16 = 0.864 ; r2: .4 + .3 + .2 - .1 = 0.8 ; r3: 0 + .3 + .04 - .02 = 0.32
    expected = {"r1": 0.864, "r2": 0.8, "r3": 0.32}
    for rid, comp in d.components.items():
        assert comp.utility(W) == pytest.approx(expected[rid], abs=1e-12)
    assert d.chosen.id == "r1"
    assert d.recomputed_utility() == pytest.approx(d.utility, abs=1e-9)


def test_single_candidate_and_infeasible():
    only = mk("solo")
    assert select_route(ctx(), [only], W).chosen is only
    osonly = UserPolicy(PolicyMode.OPEN_SOURCE_ONLY)
    with pytest.raises(NoFeasibleRoute):
        select_route(ctx(policy=osonly), [mk("p", tier=Tier.PREMIUM)], W)
    with pytest.raises(NoFeasibleRoute):
        select_route(ctx(), [], W)


def _random_instance(rng):
    n = rng.randint(1, 6)
    routes = []
    for k in range(n):
        tier = rng.choice([Tier.OPEN_SOURCE, Tier.PREMIUM, Tier.TOOL])
        kind = RouteKind.PREMIUM if tier is Tier.PREMIUM else rng.choice([RouteKind.EFFICIENT, RouteKind.PIPELINE])
        mods = frozenset(rng.sample(MODS, rng.randint(1, 3)))
        aff = {c: round(rng.random(), rng.choice([1, 2, 6])) for c in rng.sample(CATS, rng.randint(0, 4))}
        cost = round(rng.uniform(0.0, 1.5), rng.choice([1, 2, 6]))
        routes.append(Route(f"r{rng.randint(0, 99):02d}_{k}", kind, "b", tier, mods, aff, cost))
    mode = rng.choice(list(PolicyMode))
    unlimited = rng.random() < 0.7
    policy = UserPolicy(mode, rng.uniform(0, 1.5), unlimited)
    c = RouteContext(Modality.TEXT, frozenset(rng.sample(MODS, rng.randint(1, 2))), rng.choice(CATS), policy)
    raw = [rng.random() for _ in range(4)]
    raw.sort(reverse=True)
    w = RoutingWeights.normalized(raw[0], raw[1], raw[2], rng.random())
    return c, routes, w


def enumeration_oracle(c, routes, w):
    scale = max(r.cost for r in routes) or 1.0
    best = None
    for r in routes:
        if c.policy.mode is PolicyMode.OPEN_SOURCE_ONLY and r.tier is Tier.PREMIUM:
            continue
        if not c.policy.unlimited and r.cost > c.policy.cost_budget:
            continue
        s_m = 1.0 if c.components <= r.supported_modalities else 0.0
        s_t = r.task_affinity.get(c.category, 0.0)
        u = w.delta_m * s_m + w.delta_u * 1.0 + w.delta_t * s_t - w.lambda_c * (r.cost / scale)
        key = (-u, r.cost, r.id)
        if best is None or key < best[0]:
            best = (key, r.id)
    return None if best is None else best[1]


def test_select_route_matches_enumeration_oracle():
    rng = random.Random(1234)
    mismatches = 0
    for _ in range(500):
        c, routes, w = _random_instance(rng)
        want = enumeration_oracle(c, routes, w)
        try:
            got = select_route(c, routes, w).chosen.id
        except NoFeasibleRoute:
            got = None
        mismatches += got != want
    assert mismatches == 0


@given(st.integers(0, 10_000), st.floats(-5, 5, allow_nan=False))
def test_argmax_invariant_under_constant_shift(seed, shift):
    c, routes, w = _random_instance(random.Random(seed))
    try:
        d = select_route(c, routes, w)
    except NoFeasibleRoute:
        return
    utils = {rid: comp.utility(w) for rid, comp in d.components.items()}
    by_id = {r.id: r for r in routes}
    shifted = min(utils, key=lambda rid: (-(utils[rid] + shift), by_id[rid].cost, rid))
    assert shifted == d.chosen.id
    assert d.chosen.id not in {rid for rid, _ in d.excluded}


@given(st.integers(0, 10_000))
def test_raising_cost_eventually_loses_argmax(seed):
    c, routes, w = _random_instance(random.Random(seed))
    if w.lambda_c <= 1e-6:
        return
    try:
        d = select_route(c, routes, w, cost_scale=1.0)
    except NoFeasibleRoute:
        return
    feasible = [r for r in routes if r.id in d.components]
    if len(feasible) < 2:
        return
    chosen = d.chosen
    prev = d.utility
    from dataclasses import replace
    for bump in (0.5, 2.0, 10.0, 100.0 / w.lambda_c):
        pricier = replace(chosen, cost=chosen.cost + bump)
        u, _ = score_route(c, pricier, w, 1.0)
        assert u <= prev
        prev = u
    others = [r for r in routes if r.id != chosen.id]
    d2 = select_route(c, others + [pricier], w, cost_scale=1.0)
    assert d2.chosen.id != chosen.id


def _tr(registry, category, score, stage="keyword", followup=False, policy=None):
    prof = ComplexityProfile(0, 0, 0, score, {"low": 1, "medium": 0, "high": 0})
    intent = IntentResult(category, 0.9, stage, followup)
    return route_text(ctx(category, policy=policy), prof, intent, 0.55, registry, W)


def test_text_cases(config):
    reg = config.registry
    d = _tr(reg, TaskCategory.CODING, 0.3)
    assert d.chosen.id == "eff:coding" and d.rationale == "efficient"
    d = _tr(reg, TaskCategory.CODING, 0.9)
    assert d.chosen.kind is RouteKind.PREMIUM and d.rationale == "premium"
    assert _tr(reg, TaskCategory.AMBIGUOUS, 0.2, "unresolved").chosen.id == "cascade"
    assert _tr(reg, TaskCategory.COMPLEX, 0.1, "structure").rationale == "premium"
    assert _tr(reg, TaskCategory.IMAGE_GEN, 0.1).chosen.id == "pipe:image_gen"
    assert _tr(reg, TaskCategory.TEXT_MOE, 0.1, followup=True).chosen.id == "followup:moe"


def test_open_source_only_substitutes_strongest_efficient(config):
    d = _tr(config.registry, TaskCategory.MATH, 0.9, policy=UserPolicy(PolicyMode.OPEN_SOURCE_ONLY))
    assert d.rationale == "premium_substitute"
    assert d.chosen.tier is not Tier.PREMIUM
    assert d.chosen.id == "eff:math"


def test_rationale_partition_is_total(config):
    tags = set()
    for cat in CATS:
        for score in (0.0, 0.54, 0.55, 1.0):
            stage = "unresolved" if cat in (TaskCategory.AMBIGUOUS, TaskCategory.COMPLEX) and score == 0.54 else "keyword"
            tags.add(_tr(config.registry, cat, score, stage, cat is TaskCategory.TEXT_MOE).rationale)
    assert tags <= {"followup", "image_gen", "cascade", "premium", "efficient"}


def test_nontext_examples(config):
    reg = config.registry
    img = route_nontext(ctx(TaskCategory.VISION, (Modality.IMAGE,), modality=Modality.IMAGE), reg, W)
    assert img.chosen.id in ("pipe:image", "couplet")
    doc = route_nontext(ctx(TaskCategory.DOCUMENT, (Modality.DOCUMENT, Modality.TEXT), modality=Modality.DOCUMENT), reg, W)
    assert doc.chosen.id == "pipe:document"
    mm = route_nontext(ctx(TaskCategory.COMPLEX, (Modality.IMAGE, Modality.AUDIO), modality=Modality.MULTIMODAL), reg, W)
    assert mm.chosen.id == "cascade"
    for rid, comp in mm.components.items():
        if rid.startswith("pipe:") or rid == "couplet":
            assert comp.s_m == 0.0
