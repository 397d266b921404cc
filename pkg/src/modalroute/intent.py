"""Four-stage intent cascade plus follow-up detection."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Protocol, Sequence

import numpy as np

from .complexity import ComplexityProfile, KeywordDictionary, detect_signals
from .core import Modality, Query, TaskCategory, cosine, embed_content, embed_text, normalize, tokenize
from .errors import EmptyText

NO_CENTROID = frozenset({TaskCategory.TEXT_MOE, TaskCategory.COMPLEX, TaskCategory.AMBIGUOUS})

# structural signal -> (category, stage confidence); earlier entries win
SIGNAL_CATEGORIES: list[tuple[str, TaskCategory, float]] = [
    ("code_block", TaskCategory.CODING, 0.85),
    ("sql", TaskCategory.CODING, 0.8),
    ("math", TaskCategory.MATH, 0.75),
    ("table", TaskCategory.DOCUMENT, 0.65),
    ("structured_data", TaskCategory.DOCUMENT, 0.65),
]

DEFAULT_ACTION_VERBS = frozenset(
    """summarize summarise translate chart plot graph compute calculate solve write generate draw create
    transcribe detect count extract read describe compare explain list analyze analyse classify convert
    find prove implement debug refactor draft rewrite visualize tabulate identify locate caption tag
    estimate outline review check verify answer design""".split()
)

_FENCED = re.compile(r"```.*?(?:```|$)|~~~.*?(?:~~~|$)", re.S)
_SPLIT = re.compile(r"(?:,\s*|\s+)(?:and\s+)?then\b|\bafter\s+that\b|\bafterwards\b|\band\s+also\b|;", re.I)


def split_subtasks(text: str) -> list[str]:
    """Break on sequencing connectives ("then", "after that", "and also", semicolons).

    Fenced code is removed first so statement separators inside it are not read as subtasks.
    """
    text = _FENCED.sub(" ", text)
    return [p.strip(" ,.") for p in _SPLIT.split(text) if p and p.strip(" ,.")]


def actionable(segment: str, verbs: frozenset[str] = DEFAULT_ACTION_VERBS) -> bool:
    return any(t in verbs for t in tokenize(segment))


@dataclass(frozen=True)
class IntentSettings:
    theta_kw: float = 0.6
    k_kw: float = 2.0
    theta_struct: float = 0.6
    theta_clf: float = 0.5
    centroid_gap: float = 0.05
    centroid_temperature: float = 0.05
    centroid_min_cosine: float = 0.1
    multi_category_weight: int = 8
    theta_fu: float = 0.45
    action_verbs: frozenset[str] = DEFAULT_ACTION_VERBS
    anaphora: tuple[str, ...] = ()


@dataclass(frozen=True)
class IntentResult:
    category: TaskCategory
    confidence: float
    stage: str  # keyword | structure | classifier | centroid | unresolved
    is_followup: bool = False
    followup_target: str | None = None

    def __post_init__(self) -> None:
        if self.stage == "unresolved" and self.category not in (TaskCategory.COMPLEX, TaskCategory.AMBIGUOUS):
            raise ValueError("unresolved intent must be complex or ambiguous")


class CentroidIndex:
    """Exact nearest-centroid index over normalized exemplar means."""

    def __init__(self, centroids: dict[TaskCategory, np.ndarray], counts: dict[TaskCategory, int]) -> None:
        self.categories = sorted(centroids, key=lambda c: c.value)
        self.centroids = {c: centroids[c] for c in self.categories}
        self.counts = dict(counts)
        self._matrix = np.stack([self.centroids[c] for c in self.categories]) if self.categories else None

    @classmethod
    def build(cls, exemplars: Iterable[tuple[TaskCategory, str]]) -> CentroidIndex:
        sums: dict[TaskCategory, np.ndarray] = {}
        counts: dict[TaskCategory, int] = {}
        for cat, text in exemplars:
            if cat in NO_CENTROID:
                continue
            vec = embed_content(text)
            sums[cat] = sums.get(cat, 0) + vec
            counts[cat] = counts.get(cat, 0) + 1
        return cls({c: normalize(v) for c, v in sums.items()}, counts)

    def ranked(self, vec: np.ndarray) -> list[tuple[TaskCategory, float]]:
        if self._matrix is None or not vec.any():
            return []
        sims = self._matrix @ vec
        return sorted(zip(self.categories, (float(s) for s in sims)), key=lambda p: (-p[1], p[0].value))


class IntentClassifier(Protocol):
    def classify(self, text: str, signals: frozenset[str]) -> tuple[str, float] | None:
        """Return a fine-grained label and its confidence, or None."""
        ...


FINE_LABELS: dict[str, TaskCategory] = {
    "mathematical reasoning": TaskCategory.MATH,
    "coding": TaskCategory.CODING,
    "summarization": TaskCategory.SUMMARIZATION_WRITING,
    "creative writing": TaskCategory.SUMMARIZATION_WRITING,
    "image generation": TaskCategory.IMAGE_GEN,
    "question answering": TaskCategory.GENERAL,
    "document qa": TaskCategory.DOCUMENT,
}

_CATEGORY_LABEL = {
    TaskCategory.MATH: "mathematical reasoning",
    TaskCategory.CODING: "coding",
    TaskCategory.SUMMARIZATION_WRITING: "summarization",
    TaskCategory.IMAGE_GEN: "image generation",
    TaskCategory.GENERAL: "question answering",
    TaskCategory.DOCUMENT: "document qa",
}


class RuleCompositeClassifier:
    """Default offline classifier: keyword weights plus structural signal votes."""

    def __init__(self, dicts: KeywordDictionary, signal_votes: float = 4.0, prior: float = 3.0) -> None:
        self.dicts = dicts
        self.signal_votes = signal_votes
        self.prior = prior

    def classify(self, text: str, signals: frozenset[str]) -> tuple[str, float] | None:
        scores: dict[TaskCategory, float] = {c: float(w) for c, w in self.dicts.category_sums(text).items()}
        for sig, cat, _ in SIGNAL_CATEGORIES:
            if sig in signals:
                scores[cat] = scores.get(cat, 0.0) + self.signal_votes
        scores = {c: s for c, s in scores.items() if c in _CATEGORY_LABEL}
        if not scores:
            return None
        best = max(scores, key=lambda c: (scores[c], c.value))
        conf = scores[best] / (sum(scores.values()) + self.prior)
        return _CATEGORY_LABEL[best], conf


def keyword_stage(text: str, dicts: KeywordDictionary, settings: IntentSettings | None = None) -> tuple[TaskCategory, float] | None:
    """Best category's share of all matched weight, shrunk by a small prior; None below threshold."""
    settings = settings or IntentSettings()
    sums = dicts.category_sums(text)
    if not sums:
        return None
    best = max(sums, key=lambda c: (sums[c], c.value))
    conf = sums[best] / (sum(sums.values()) + settings.k_kw)
    if conf >= settings.theta_kw:
        return best, conf
    return None


def structure_stage(signals: Iterable[str], settings: IntentSettings | None = None) -> tuple[TaskCategory, float] | None:
    settings = settings or IntentSettings()
    present = set(signals)
    for sig, cat, conf in SIGNAL_CATEGORIES:
        if sig in present and conf >= settings.theta_struct:
            return cat, conf
    return None


def centroid_stage(
    text: str, index: CentroidIndex, settings: IntentSettings | None = None
) -> tuple[TaskCategory | None, float, float]:
    """Returns (category or None, confidence, raw cosine gap)."""
    settings = settings or IntentSettings()
    ranked = index.ranked(embed_content(text))
    if not ranked:
        return None, 0.0, 0.0
    top_cat, top = ranked[0]
    second = ranked[1][1] if len(ranked) > 1 else 0.0
    gap = top - second
    # softmax over the top two cosines at the configured temperature, as a margin
    conf = math.tanh(gap / (2.0 * settings.centroid_temperature))
    if top < settings.centroid_min_cosine or gap < settings.centroid_gap:
        return None, conf, gap
    return top_cat, conf, gap


def detect_complex(text: str, dicts: KeywordDictionary, settings: IntentSettings) -> str | None:
    segments = split_subtasks(text)
    if sum(actionable(s, settings.action_verbs) for s in segments) >= 2:
        return "structure"
    sums = dicts.category_sums(text)
    if sum(1 for w in sums.values() if w >= settings.multi_category_weight) >= 2:
        return "keyword"
    return None


def classify_intent(
    q: Query | str,
    profile: ComplexityProfile | None,
    signals: Iterable[str] | None,
    index: CentroidIndex,
    clf: IntentClassifier | None,
    dicts: KeywordDictionary,
    settings: IntentSettings | None = None,
) -> IntentResult:
    settings = settings or IntentSettings()
    text = q if isinstance(q, str) else q.text
    if not text.strip():
        raise EmptyText("intent classification needs query text")
    if signals is None:
        signals = profile.signals if profile is not None else detect_signals(text)
    signals = frozenset(signals)

    stage = detect_complex(text, dicts, settings)
    if stage is not None:
        return IntentResult(TaskCategory.COMPLEX, 1.0, stage)

    hit = keyword_stage(text, dicts, settings)
    if hit:
        return IntentResult(hit[0], hit[1], "keyword")
    hit = structure_stage(signals, settings)
    if hit:
        return IntentResult(hit[0], hit[1], "structure")
    if clf is not None:
        out = clf.classify(text, signals)
        if out is not None:
            label, conf = out
            cat = FINE_LABELS.get(label)
            if cat is not None and conf >= settings.theta_clf:
                return IntentResult(cat, conf, "classifier")
    cat, conf, _ = centroid_stage(text, index, settings)
    if cat is not None:
        return IntentResult(cat, conf, "centroid")
    return IntentResult(TaskCategory.AMBIGUOUS, conf, "unresolved")


# ---------------------------------------------------------------- follow-ups

DEFAULT_ANAPHORA = (
    "it", "its", "that image", "this image", "the image", "the picture", "the photo", "that photo",
    "the video", "this video", "the clip", "the audio", "the recording", "this file", "that file",
    "the file", "the document", "the pdf", "the scan", "the chart", "the table", "the transcript",
    "the speaker", "the scene", "the diagram", "them", "those", "this one", "that one",
)


@dataclass(frozen=True)
class PriorInteraction:
    interaction_id: str
    modality: Modality
    non_text: bool
    embedding: np.ndarray = field(repr=False)
    followup_target: str | None = None
    target_modality: Modality | None = None


def _has_phrase(tokens: Sequence[str], phrase: Sequence[str]) -> bool:
    n = len(phrase)
    return any(tuple(tokens[i:i + n]) == tuple(phrase) for i in range(len(tokens) - n + 1))


def followup_trigger(
    q: Query | str, history: Sequence[PriorInteraction], settings: IntentSettings | None = None
) -> tuple[str | None, str | None]:
    """Returns (trigger, target id); trigger is "anaphora", "similarity" or None."""
    settings = settings or IntentSettings()
    if not history:
        return None, None
    text = q if isinstance(q, str) else q.text
    prev = history[-1]
    if prev.non_text:
        target = prev.interaction_id
    elif prev.followup_target is not None:
        target = prev.followup_target
    else:
        return None, None
    tokens = tokenize(text)
    lexicon = settings.anaphora or DEFAULT_ANAPHORA
    if any(_has_phrase(tokens, tokenize(p)) for p in lexicon):
        return "anaphora", target
    if cosine(embed_text(text), prev.embedding) >= settings.theta_fu:
        return "similarity", target
    return None, None


def detect_followup(
    q: Query | str, history: Sequence[PriorInteraction], settings: IntentSettings | None = None
) -> tuple[bool, str | None]:
    """Fires only right after a non-text exchange (or a follow-up anchored to one)."""
    trigger, target = followup_trigger(q, history, settings)
    return trigger is not None, target
