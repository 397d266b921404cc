"""Complexity features, the scalar difficulty score, and escalation-threshold calibration."""

from __future__ import annotations

import math
import re
import time
import warnings
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Protocol, Sequence

from .core import Query, TaskCategory, tokenize
from .errors import BudgetInfeasible, EmptyText

CLASSES = ("low", "medium", "high")


@dataclass(frozen=True)
class ComplexityWeights:
    alpha: float = 0.4
    beta: float = 0.25
    gamma: float = 0.35

    def __post_init__(self) -> None:
        if min(self.alpha, self.beta, self.gamma) < 0:
            raise ValueError("complexity weights must be non-negative")
        if abs(self.alpha + self.beta + self.gamma - 1.0) > 1e-9:
            raise ValueError("complexity weights must sum to 1")


@dataclass(frozen=True)
class ComplexityProfile:
    intent_align: float
    linguistic: float
    structural: float
    score: float
    class_dist: dict[str, float]
    signals: frozenset[str] = frozenset()

    @property
    def p_high(self) -> float:
        return self.class_dist["high"]


class KeywordDictionary:
    """Per-category weighted keywords and phrases, matched on whole tokens."""

    def __init__(self, entries: dict[TaskCategory, dict[str, int]]) -> None:
        self.entries: dict[TaskCategory, dict[tuple[str, ...], int]] = {}
        longest = 1
        for cat, words in entries.items():
            table = {}
            for phrase, weight in words.items():
                if phrase != phrase.lower():
                    raise ValueError(f"keyword {phrase!r} must be lowercase")
                if not 1 <= int(weight) <= 5:
                    raise ValueError(f"keyword {phrase!r}: weight {weight} outside 1-5")
                key = tuple(tokenize(phrase))
                if not key:
                    raise ValueError(f"keyword {phrase!r} has no tokens")
                table[key] = int(weight)
                longest = max(longest, len(key))
            self.entries[cat] = table
        self.max_len = longest

    @classmethod
    def from_config(cls, section: dict[str, dict[str, int]]) -> KeywordDictionary:
        return cls({TaskCategory.parse(k): v for k, v in section.items()})

    def ngrams(self, tokens: Sequence[str]) -> set[tuple[str, ...]]:
        grams = set()
        for n in range(1, self.max_len + 1):
            for i in range(len(tokens) - n + 1):
                grams.add(tuple(tokens[i:i + n]))
        return grams

    def category_sums(self, text_or_tokens: str | Sequence[str]) -> dict[TaskCategory, int]:
        """Sum of matched keyword weights per category; each keyword counts once."""
        tokens = tokenize(text_or_tokens) if isinstance(text_or_tokens, str) else text_or_tokens
        grams = self.ngrams(tokens)
        sums = {}
        for cat, table in self.entries.items():
            total = sum(w for key, w in table.items() if key in grams)
            if total:
                sums[cat] = total
        return sums

    def matches(self, text: str, category: TaskCategory) -> list[str]:
        grams = self.ngrams(tokenize(text))
        return [" ".join(k) for k in self.entries.get(category, {}) if k in grams]


def intent_alignment(text: str, dicts: KeywordDictionary, k_sat: float = 8.0) -> float:
    sums = dicts.category_sums(text)
    best = max(sums.values(), default=0)
    return best / (best + k_sat) if best else 0.0


_SENTENCE = re.compile(r"[.!?]+(?:\s+|$)|\n+")
_CLAUSE = re.compile(r"[,;:]")


def _nesting_depth(s: str) -> int:
    depth = best = 0
    for ch in s:
        if ch in "([{":
            depth += 1
            best = max(best, depth)
        elif ch in ")]}" and depth:
            depth -= 1
    return best


def clause_depth(text: str) -> float:
    """Mean per-sentence count of clause separators plus bracket nesting, squashed to [0, 1)."""
    sentences = [s for s in _SENTENCE.split(text) if s.strip()]
    if not sentences:
        return 0.0
    raw = sum(len(_CLAUSE.findall(s)) + _nesting_depth(s) for s in sentences) / len(sentences)
    return raw / (raw + 3.0)


def token_entropy(tokens: Sequence[str]) -> float:
    counts = Counter(tokens)
    if len(counts) <= 1:
        return 0.0
    n = len(tokens)
    h = -sum((c / n) * math.log2(c / n) for c in counts.values())
    return min(1.0, h / math.log2(len(counts)))


def linguistic_complexity(text: str) -> float:
    tokens = tokenize(text)
    if not tokens:
        return 0.0
    length = len(tokens) / (len(tokens) + 64.0)
    return (length + clause_depth(text) + token_entropy(tokens)) / 3.0


SIGNAL_WEIGHTS = {
    "code_block": 0.5,
    "sql": 0.45,
    "math": 0.35,
    "structured_data": 0.3,
    "table": 0.3,
    "steps": 0.2,
}

_FENCE = re.compile(r"```|~~~")
_CODE_SYMBOLS = set("{}()[];=<>+-*/%&|:!")
_SQL_PATTERNS = [
    re.compile(
        r"\bselect\s+(?:distinct\s+)?(?:\*|[\w.()*]+(?:\s+as\s+\w+)?(?:\s*,\s*[\w.()*]+(?:\s+as\s+\w+)?)*)"
        r"\s+from\s+[\w.]+(?:\s+(?:where|join|inner|left|right|group\s+by|order\s+by|limit|as)\b|\s*;|\s*$)",
        re.I,
    ),
    re.compile(r"\binsert\s+into\s+[\w.]+\s*(?:\([\w\s,]+\))?\s*(?:values\s*\(|select\b)", re.I),
    re.compile(r"\bupdate\s+[\w.]+\s+set\s+\w+\s*=", re.I),
    re.compile(r"\bcreate\s+(?:table|index|view|database)\s+(?:if\s+not\s+exists\s+)?[\w.]+", re.I),
    re.compile(r"\bdelete\s+from\s+[\w.]+\s+where\b", re.I),
]
_MATH_PATTERNS = [
    re.compile(r"\\(?:frac|int|sum|sqrt|lim|partial|cdot|times|infty|pi|alpha|beta|theta|begin\{)"),
    re.compile(r"\$[^$\n]+\$"),
    re.compile(r"\b\d+(?:\.\d+)?\s*[+*/^×÷]\s*\d+|\b\d+\s+-\s+\d+"),
    re.compile(r"\b[a-z]\s*\^\s*\d", re.I),
    re.compile(r"\b[a-z]\d?\s*[=<>≤≥]\s*[-\d(a-z]", re.I),
    re.compile(r"\b\d*[a-z]\s*[+\-]\s*\d+\s*=\s*-?\d", re.I),
    re.compile(r"[∫∑√π≤≥≠∞∂]"),
    re.compile(r"\b(?:sin|cos|tan|log|ln|exp)\s*\(", re.I),
]
_KV = re.compile(r"""(?:"[^"\n]+"|'[^'\n]+'|\b\w+)\s*[:=]\s*(?:"[^"\n]*"|'[^'\n]*'|[\w.\-]+|\[|\{)""")
_TABLE_ROW = re.compile(r"^\s*\|.*\|\s*$", re.M)
_STEP_LINE = re.compile(r"^\s*(?:\d+[.)]|step\s+\d+|[-*•])\s+\S", re.I | re.M)


def _balanced(text: str) -> bool:
    stack = []
    pairs = {")": "(", "]": "[", "}": "{"}
    for ch in text:
        if ch in "([{":
            stack.append(ch)
        elif ch in pairs:
            if not stack or stack[-1] != pairs[ch]:
                return False
            stack.pop()
    return not stack


def _code_lines(text: str) -> bool:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    candidates = [
        ln for ln in lines
        if ln.startswith(("    ", "\t")) or ln.rstrip().endswith((":", "{", "}", ";"))
    ]
    if len(candidates) < 2:
        return False
    chars = "".join(candidates)
    density = sum(ch in _CODE_SYMBOLS for ch in chars) / max(1, len(chars))
    return density >= 0.06


def detect_signals(text: str) -> set[str]:
    signals = set()
    if _FENCE.search(text) or _code_lines(text):
        signals.add("code_block")
    if any(p.search(text) for p in _SQL_PATTERNS):
        signals.add("sql")
    if any(p.search(text) for p in _MATH_PATTERNS):
        signals.add("math")
    if ("{" in text or "[" in text) and _balanced(text) and len(_KV.findall(text)) >= 2:
        signals.add("structured_data")
    if len(_TABLE_ROW.findall(text)) >= 2:
        signals.add("table")
    if len(_STEP_LINE.findall(text)) >= 2:
        signals.add("steps")
    return signals


def structural_complexity(text: str, weights: dict[str, float] | None = None) -> tuple[float, set[str]]:
    weights = weights or SIGNAL_WEIGHTS
    signals = detect_signals(text)
    return min(1.0, sum(weights.get(s, 0.0) for s in signals)), signals


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


def class_distribution(score: float, cuts: tuple[float, float] = (0.35, 0.65), sharpness: float = 10.0) -> dict[str, float]:
    """Cumulative-logit map; P(high) is strictly increasing in ``score``."""
    above_low = _sigmoid(sharpness * (score - cuts[0]))
    above_mid = _sigmoid(sharpness * (score - cuts[1]))
    return {"low": 1.0 - above_low, "medium": above_low - above_mid, "high": above_mid}


@dataclass(frozen=True)
class ComplexitySettings:
    weights: ComplexityWeights = field(default_factory=ComplexityWeights)
    k_sat: float = 8.0
    cuts: tuple[float, float] = (0.35, 0.65)
    sharpness: float = 10.0
    signal_weights: dict[str, float] = field(default_factory=lambda: dict(SIGNAL_WEIGHTS))


def profile_from_features(i: float, l: float, s: float, settings: ComplexitySettings, signals=frozenset()) -> ComplexityProfile:
    w = settings.weights
    score = w.alpha * i + w.beta * l + w.gamma * s
    return ComplexityProfile(i, l, s, score, class_distribution(score, settings.cuts, settings.sharpness), frozenset(signals))


def complexity(q: Query | str, dicts: KeywordDictionary, settings: ComplexitySettings | None = None) -> ComplexityProfile:
    settings = settings or ComplexitySettings()
    text = q if isinstance(q, str) else q.text
    if not text.strip():
        raise EmptyText("complexity scoring needs query text")
    i = intent_alignment(text, dicts, settings.k_sat)
    l = linguistic_complexity(text)
    s, signals = structural_complexity(text, settings.signal_weights)
    return profile_from_features(i, l, s, settings, signals)


# ---------------------------------------------------------------- calibration


class TauPlanner(Protocol):
    def split_decision(self, query: Query) -> tuple[float, str, float, str, float]:
        """Return (score, tier_below, cost_below, tier_above, cost_above) for one query.

        "below" is the outcome when the score is under tau, "above" when it is at or over.
        """
        ...


@dataclass(frozen=True)
class Threshold:
    tau: float
    calibrated_at: float
    budget_used: float
    accuracy: float = 0.0
    feasible: bool = True
    grid: tuple[tuple[float, float, float], ...] = ()

    def __post_init__(self) -> None:
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError("tau must lie in [0, 1]")


def tau_grid(step: float = 0.01) -> list[float]:
    n = int(round(1.0 / step))
    return [round(k * step, 10) for k in range(n + 1)]


def sweep_rows(
    validation: Iterable[tuple[Query, TaskCategory, str]], planner: TauPlanner, step: float = 0.01
) -> list[tuple[float, float, float]]:
    """(tau, accuracy, total cost) for every grid point."""
    items = [(planner.split_decision(q), gold_tier) for q, _, gold_tier in validation]
    if not items:
        raise ValueError("validation set is empty")
    rows = []
    for tau in tau_grid(step):
        correct = 0
        cost = 0.0
        for (score, tier_lo, cost_lo, tier_hi, cost_hi), gold in items:
            tier, c = (tier_lo, cost_lo) if score < tau else (tier_hi, cost_hi)
            correct += tier == gold
            cost += c
        rows.append((tau, correct / len(items), cost))
    return rows


def calibrate_tau(
    validation: Sequence[tuple[Query, TaskCategory, str]], budget: float, planner: TauPlanner, step: float = 0.01
) -> Threshold:
    """Pick the most accurate tau whose validation cost fits the budget; ties go to the larger tau."""
    rows = sweep_rows(validation, planner, step)
    feasible = [r for r in rows if r[2] <= budget + 1e-12]
    if not feasible:
        warnings.warn(BudgetInfeasible(f"no tau meets budget {budget}; using tau=1.0"), stacklevel=2)
        last = rows[-1]
        return Threshold(1.0, time.time(), last[2], last[1], False, tuple(rows))
    best = max(feasible, key=lambda r: (r[1], r[0]))
    return Threshold(best[0], time.time(), best[2], best[1], True, tuple(rows))
