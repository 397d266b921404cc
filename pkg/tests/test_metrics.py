import math
import random

import numpy as np
import pytest
from hypothesis import given, strategies as st

from modalroute.errors import LengthMismatch
from modalroute.evaluation.metrics import (
    accuracy, cohens_kappa, macro_prf, pareto_mask, similarity_report, tfidf_cosines,
)

labels = st.lists(st.sampled_from("abcde"), min_size=1, max_size=60)


def kappa_oracle(a, b):
    cats = sorted(set(a) | set(b))
    idx = {c: i for i, c in enumerate(cats)}
    m = np.zeros((len(cats), len(cats)))
    for x, y in zip(a, b):
        m[idx[x], idx[y]] += 1
    n = m.sum()
    po = np.trace(m) / n
    pe = float((m.sum(axis=1) * m.sum(axis=0)).sum()) / n ** 2
    if pe == 1.0:
        return 1.0 if po == 1.0 else 0.0
    return (po - pe) / (1 - pe)


def prf_oracle(pred, gold, labs):
    cats = list(labs)
    idx = {c: i for i, c in enumerate(cats)}
    m = np.zeros((len(cats), len(cats)))  # rows gold, cols pred
    for p, g in zip(pred, gold):
        m[idx[g], idx[p]] += 1
    tp = np.diag(m)
    col, row = m.sum(axis=0), m.sum(axis=1)
    prec = np.divide(tp, col, out=np.zeros_like(tp), where=col > 0)
    rec = np.divide(tp, row, out=np.zeros_like(tp), where=row > 0)
    P, R = prec.mean(), rec.mean()
    return P, R, (2 * P * R / (P + R) if P + R else 0.0)


def test_kappa_examples():
    assert cohens_kappa(list("abcab"), list("abcab")) == 1.0
    assert cohens_kappa(list("xxyy"), list("xyxy")) == pytest.approx(0.0, abs=1e-12)
    assert cohens_kappa(list("xxyy"), list("yyxx")) == pytest.approx(-1.0)
    with pytest.raises(LengthMismatch):
        cohens_kappa(["a"], [])


@given(labels, st.integers(0, 10**6))
def test_kappa_matches_oracle(a, seed):
    rng = random.Random(seed)
    b = [x if rng.random() < 0.6 else rng.choice("abcde") for x in a]
    assert cohens_kappa(a, b) == pytest.approx(kappa_oracle(a, b), abs=1e-9)


def test_macro_on_hand_built_confusion_matrix():
    # 50 records over 3 classes; gold rows x predicted columns
    cm = {("a", "a"): 15, ("a", "b"): 3, ("a", "c"): 2,
          ("b", "a"): 4, ("b", "b"): 10, ("b", "c"): 1,
          ("c", "a"): 0, ("c", "b"): 5, ("c", "c"): 10}
    gold, pred = [], []
    for (g, p), n in cm.items():
        gold += [g] * n
        pred += [p] * n
    assert len(gold) == 50
    m = macro_prf(pred, gold, ["a", "b", "c"])
    # hand: P = (15/19 + 10/18 + 10/13) / 3, R = (15/20 + 10/15 + 10/15) / 3
    P = (15 / 19 + 10 / 18 + 10 / 13) / 3
    R = (15 / 20 + 10 / 15 + 10 / 15) / 3
    assert m.precision == pytest.approx(P, abs=1e-9)
    assert m.recall == pytest.approx(R, abs=1e-9)
    assert m.f1 == pytest.approx(2 * P * R / (P + R), abs=1e-9)
    assert accuracy(pred, gold) == pytest.approx(35 / 50)


@given(labels, st.integers(0, 10**6))
def test_macro_matches_oracle(gold, seed):
    rng = random.Random(seed)
    pred = [g if rng.random() < 0.7 else rng.choice("abcde") for g in gold]
    m = macro_prf(pred, gold, list("abcde"))
    P, R, F = prf_oracle(pred, gold, "abcde")
    assert (m.precision, m.recall, m.f1) == pytest.approx((P, R, F), abs=1e-9)


def test_similarity_identical_pairs():
    texts = ["a red car", "sum of the series", "the quarterly sales call"]
    assert similarity_report(texts, list(texts)).as_tuple() == (1.0, 1.0, 1.0)


def test_tfidf_disjoint_is_zero():
    assert tfidf_cosines(["alpha beta"], ["gamma delta"]) == [0.0]


def test_tfidf_three_pair_worksheet():
    responses = ["a b", "b b", "c d"]
    references = ["a c", "b", "e f"]
    # union corpus N = 6; document frequencies a:2 b:3 c:2 d:1 e:1 f:1
    ia = math.log(7 / 3) + 1
    ib = math.log(7 / 4) + 1
    ic = ia
    pair1 = (ia * ia) / (math.sqrt(ia ** 2 + ib ** 2) * math.sqrt(ia ** 2 + ic ** 2))
    got = tfidf_cosines(responses, references)
    assert got[0] == pytest.approx(pair1, abs=1e-9)
    assert got[1] == pytest.approx(1.0, abs=1e-9)
    assert got[2] == pytest.approx(0.0, abs=1e-9)
    rep = similarity_report(responses, references)
    assert rep.mean_tfidf == pytest.approx((pair1 + 1.0) / 3, abs=1e-9)


def dominance_oracle(points):
    out = []
    for i, (c, a) in enumerate(points):
        dominated = any((c2 <= c and a2 >= a) and (c2 < c or a2 > a) for j, (c2, a2) in enumerate(points) if j != i)
        out.append(not dominated)
    return out


def test_pareto_examples():
    assert pareto_mask([(1.0, 0.5)]) == [True]
    assert pareto_mask([(1.0, 0.9), (2.0, 0.8)]) == [True, False]


@given(st.lists(st.tuples(st.integers(0, 6).map(float), st.integers(0, 6).map(lambda x: x / 6)), min_size=1, max_size=25))
def test_pareto_matches_dominance_oracle(points):
    assert pareto_mask(points) == dominance_oracle(points)
