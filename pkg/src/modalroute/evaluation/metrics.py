"""Classification, agreement, similarity and Pareto metrics."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Hashable, Sequence

from ..core import cosine, embed_text, tokenize
from ..errors import LengthMismatch


def _check(a: Sequence, b: Sequence) -> None:
    if len(a) != len(b):
        raise LengthMismatch(f"paired inputs differ in length: {len(a)} vs {len(b)}")


def accuracy(pred: Sequence[Hashable], gold: Sequence[Hashable]) -> float:
    _check(pred, gold)
    return sum(p == g for p, g in zip(pred, gold)) / len(gold) if gold else 0.0


def cohens_kappa(a: Sequence[Hashable], b: Sequence[Hashable]) -> float:
    """(p_o - p_e) / (1 - p_e); 1.0 when chance agreement is already total and the labels agree."""
    _check(a, b)
    n = len(a)
    if n == 0:
        return 1.0
    p_o = sum(x == y for x, y in zip(a, b)) / n
    ca, cb = Counter(a), Counter(b)
    p_e = sum(ca[k] * cb.get(k, 0) for k in ca) / (n * n)
    if p_e >= 1.0:
        return 1.0 if p_o == 1.0 else 0.0
    return (p_o - p_e) / (1.0 - p_e)


@dataclass(frozen=True)
class ClassScores:
    label: Hashable
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class MacroScores:
    precision: float
    recall: float
    f1: float
    per_class: tuple[ClassScores, ...]


def per_class_scores(pred: Sequence[Hashable], gold: Sequence[Hashable], labels: Sequence[Hashable]) -> list[ClassScores]:
    _check(pred, gold)
    out = []
    for lab in labels:
        tp = sum(1 for p, g in zip(pred, gold) if p == lab and g == lab)
        fp = sum(1 for p, g in zip(pred, gold) if p == lab and g != lab)
        fn = sum(1 for p, g in zip(pred, gold) if p != lab and g == lab)
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        out.append(ClassScores(lab, prec, rec, f1, tp + fn))
    return out


def macro_prf(pred: Sequence[Hashable], gold: Sequence[Hashable], labels: Sequence[Hashable]) -> MacroScores:
    """Unweighted means over ``labels``; macro F1 is the harmonic mean of macro P and macro R."""
    rows = per_class_scores(pred, gold, labels)
    k = len(rows) or 1
    p = sum(r.precision for r in rows) / k
    r = sum(r.recall for r in rows) / k
    f1 = 2 * p * r / (p + r) if p + r else 0.0
    return MacroScores(p, r, f1, tuple(rows))


# ---------------------------------------------------------------- similarity

def tfidf_vectors(docs: Sequence[str]) -> list[dict[str, float]]:
    """Raw term counts weighted by smoothed idf: idf(t) = ln((1 + N) / (1 + df(t))) + 1."""
    toks = [tokenize(d) for d in docs]
    n = len(docs)
    df: Counter = Counter()
    for t in toks:
        df.update(set(t))
    idf = {term: math.log((1 + n) / (1 + c)) + 1.0 for term, c in df.items()}
    return [{term: cnt * idf[term] for term, cnt in Counter(t).items()} for t in toks]


def sparse_cosine(a: dict[str, float], b: dict[str, float]) -> float:
    na = math.sqrt(sum(v * v for v in a.values()))
    nb = math.sqrt(sum(v * v for v in b.values()))
    if na == 0 or nb == 0:
        return 0.0
    dot = sum(v * b[k] for k, v in a.items() if k in b)
    return dot / (na * nb)


def tfidf_cosines(responses: Sequence[str], references: Sequence[str]) -> list[float]:
    _check(responses, references)
    vecs = tfidf_vectors(list(responses) + list(references))
    n = len(responses)
    return [sparse_cosine(vecs[i], vecs[n + i]) for i in range(n)]


@dataclass(frozen=True)
class SimilarityReport:
    mean_tfidf: float
    mean_embedding: float
    fraction_above: float
    n: int
    threshold: float = 0.8

    def as_tuple(self) -> tuple[float, float, float]:
        return self.mean_tfidf, self.mean_embedding, self.fraction_above


def similarity_report(responses: Sequence[str], references: Sequence[str], threshold: float = 0.8) -> SimilarityReport:
    """TF-IDF is fitted on the union of both sides; identical strings score exactly 1."""
    _check(responses, references)
    if not responses:
        return SimilarityReport(0.0, 0.0, 0.0, 0, threshold)
    tf = [1.0 if r == f else c for r, f, c in zip(responses, references, tfidf_cosines(responses, references))]
    emb = [1.0 if r == f else cosine(embed_text(r), embed_text(f)) for r, f in zip(responses, references)]
    n = len(responses)
    return SimilarityReport(sum(tf) / n, sum(emb) / n, sum(e > threshold for e in emb) / n, n, threshold)


# ---------------------------------------------------------------- pareto

def pareto_mask(points: Sequence[tuple[float, float]]) -> list[bool]:
    """Points are (cost, accuracy); a point is optimal unless another is no worse on both and better on one.

    Sorted sweep: ascending cost, descending accuracy; a point survives if its accuracy beats every
    strictly cheaper point's and nothing at equal cost is more accurate.
    """
    order = sorted(range(len(points)), key=lambda i: (points[i][0], -points[i][1]))
    mask = [False] * len(points)
    best_acc = -math.inf
    i = 0
    while i < len(order):
        cost = points[order[i]][0]
        group = []
        while i < len(order) and points[order[i]][0] == cost:
            group.append(order[i])
            i += 1
        top = points[group[0]][1]
        if top > best_acc:
            for j in group:
                if points[j][1] == top:
                    mask[j] = True
            best_acc = top
    return mask
