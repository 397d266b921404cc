"""Layered session memory and ContextScore-based context selection."""

from __future__ import annotations

import hashlib
import json
import logging
import math
import re
import threading
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .core import Modality, NamedEnum, cosine, embed_text, normalize
from .errors import ConfigError
from .intent import PriorInteraction

logger = logging.getLogger(__name__)

BASE_MODALITIES = frozenset({Modality.IMAGE, Modality.AUDIO, Modality.VIDEO, Modality.DOCUMENT})


class MemoryLayer(NamedEnum):
    SHORT_TERM = "short_term"
    FULL_HISTORY = "full_history"
    MODULE_SPECIFIC = "module_specific"
    RELEVANT_CONTEXT = "relevant_context"
    COMPRESSED = "compressed"


# dedupe preference when one interaction surfaces through several layers
LAYER_PRIORITY = {
    MemoryLayer.MODULE_SPECIFIC: 0,
    MemoryLayer.RELEVANT_CONTEXT: 1,
    MemoryLayer.SHORT_TERM: 2,
    MemoryLayer.FULL_HISTORY: 3,
    MemoryLayer.COMPRESSED: 4,
}


@dataclass
class MemoryItem:
    item_id: str
    layer: MemoryLayer
    content: str
    modality: Modality
    session_id: str
    last_access: int
    interaction_id: str | None = None
    embedding: np.ndarray = field(default=None, repr=False)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.embedding is None:
            self.embedding = embed_text(self.content)

    def touch(self, now: int) -> None:
        self.last_access = max(self.last_access, now)

    def as_layer(self, layer: MemoryLayer) -> MemoryItem:
        return MemoryItem(self.item_id, layer, self.content, self.modality, self.session_id, self.last_access,
                          self.interaction_id, self.embedding)


@dataclass(frozen=True)
class MemorySettings:
    short_term_k: int = 8
    tau_decay_ms: float = 600_000.0
    threshold: float = 0.35
    budget_chars: int = 4000
    compression_stride: int = 10
    compression_sentences: int = 5
    drift_threshold: int = 30
    drift_step: float = 0.05
    theta_s_cap: float = 0.8
    relevant_k: int = 3
    mismatch_m: float = 0.3
    thetas: tuple[float, float, float] = (0.6, 0.2, 0.2)

    def __post_init__(self) -> None:
        if min(self.thetas) < 0 or abs(sum(self.thetas) - 1.0) > 1e-9:
            raise ConfigError(f"memory thetas must be non-negative and sum to 1, got {self.thetas}")


@dataclass(frozen=True)
class ScoredItem:
    item: MemoryItem
    total: float
    r: float
    t: float
    m: float


@dataclass(frozen=True)
class ContextBundle:
    items: tuple[ScoredItem, ...] = ()
    budget_chars: int = 4000
    truncated: bool = False
    thetas: tuple[float, float, float] = (0.6, 0.2, 0.2)

    @property
    def rendered(self) -> str:
        return "\n".join(s.item.content for s in self.items)

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.rendered.encode("utf-8")).hexdigest()[:16]

    def __len__(self) -> int:
        return len(self.items)


def context_score(
    item: MemoryItem, query_vec: np.ndarray, now: int, thetas: tuple[float, float, float],
    required: Modality | None = None, tau_decay_ms: float = 600_000.0, mismatch_m: float = 0.3,
) -> tuple[float, float, float, float]:
    """Returns (total, R, T, M)."""
    ts, tt, tm = thetas
    r = max(0.0, cosine(query_vec, item.embedding))
    t = math.exp(-max(0, now - item.last_access) / tau_decay_ms)
    if item.layer is MemoryLayer.COMPRESSED or required is None or item.modality is required:
        m = 1.0
    else:
        m = mismatch_m
    return ts * r + tt * t + tm * m, r, t, m


def drift_thetas(thetas: tuple[float, float, float], history_len: int, settings: MemorySettings) -> tuple[float, float, float]:
    """Long sessions lean on semantic relevance: theta_s grows per drift step, theta_t pays for it."""
    ts, tt, tm = thetas
    steps = history_len // settings.drift_threshold
    if steps <= 0:
        return thetas
    new_ts = min(ts + settings.drift_step * steps, max(ts, settings.theta_s_cap))
    delta = min(new_ts - ts, tt)
    return ts + delta, tt - delta, tm


_SENT = re.compile(r"(?<=[.!?])\s+|\n+")


def compress(contents: Iterable[str], n: int = 5) -> str:
    """Extractive summary: the n sentences closest to the history centroid."""
    sentences = [s.strip() for c in contents for s in _SENT.split(c) if s.strip()]
    if not sentences:
        return ""
    vecs = [embed_text(s) for s in sentences]
    centroid = normalize(np.sum(vecs, axis=0))
    ranked = sorted(range(len(sentences)), key=lambda i: (-cosine(vecs[i], centroid), i))
    chosen = sorted(ranked[:n])
    return " ".join(sentences[i] for i in chosen)


@dataclass
class Interaction:
    interaction_id: str
    modality: Modality
    components: frozenset[Modality]
    non_text: bool
    content: str
    timestamp: int
    followup_target: str | None = None
    target_modality: Modality | None = None

    def prior(self) -> PriorInteraction:
        return PriorInteraction(self.interaction_id, self.modality, self.non_text, embed_text(self.content),
                                self.followup_target, self.target_modality)


class SessionMemory:
    def __init__(self, session_id: str, settings: MemorySettings) -> None:
        self.session_id = session_id
        self.settings = settings
        self.lock = threading.RLock()
        self.short_term: deque[MemoryItem] = deque(maxlen=settings.short_term_k)
        self.full_history: list[MemoryItem] = []
        self.module: dict[Modality, list[MemoryItem]] = {}
        self.compressed: MemoryItem | None = None
        self.interactions: list[Interaction] = []

    def history(self) -> list[PriorInteraction]:
        with self.lock:
            return [i.prior() for i in self.interactions]

    def last_non_text(self) -> Interaction | None:
        with self.lock:
            for i in reversed(self.interactions):
                if i.non_text:
                    return i
        return None

    def interaction(self, interaction_id: str) -> Interaction | None:
        with self.lock:
            return next((i for i in self.interactions if i.interaction_id == interaction_id), None)

    def all_items(self) -> list[MemoryItem]:
        with self.lock:
            items = list(self.short_term) + list(self.full_history)
            for bank in self.module.values():
                items.extend(bank)
            if self.compressed is not None:
                items.append(self.compressed)
            return items


class MemoryStore:
    """Session-partitioned store; optional append-only JSONL persistence, one file per session."""

    def __init__(self, settings: MemorySettings | None = None, directory: str | Path | None = None) -> None:
        self.settings = settings or MemorySettings()
        self.directory = Path(directory) if directory else None
        self._sessions: dict[str, SessionMemory] = {}
        self._lock = threading.Lock()
        if self.directory:
            self.directory.mkdir(parents=True, exist_ok=True)

    def session(self, session_id: str) -> SessionMemory:
        with self._lock:
            s = self._sessions.get(session_id)
            if s is None:
                s = SessionMemory(session_id, self.settings)
                self._sessions[session_id] = s
                if self.directory:
                    self._reload(s)
            return s

    def has_session(self, session_id: str) -> bool:
        with self._lock:
            return session_id in self._sessions

    # ------------------------------------------------------------------ writes
    def record_interaction(
        self,
        session_id: str,
        interaction_id: str,
        query_text: str,
        response: str,
        modality: Modality,
        components: frozenset[Modality] = frozenset(),
        non_text: bool = False,
        now: int = 0,
        followup_target: str | None = None,
        target_modality: Modality | None = None,
        persist: bool = True,
    ) -> SessionMemory:
        s = self.session(session_id)
        content = f"Q: {query_text.strip() or '[' + modality.value + ' input]'} A: {response.strip()}"
        with s.lock:
            item_modality = modality if non_text and modality in BASE_MODALITIES else Modality.TEXT
            hist = MemoryItem(f"{interaction_id}/h", MemoryLayer.FULL_HISTORY, content, item_modality, session_id,
                              now, interaction_id)
            s.full_history.append(hist)
            s.short_term.append(hist.as_layer(MemoryLayer.SHORT_TERM))
            banks = sorted((components or {modality}) & BASE_MODALITIES, key=lambda m: m.value) if non_text else []
            for m in banks:
                item = MemoryItem(f"{interaction_id}/{m.value}", MemoryLayer.MODULE_SPECIFIC, content, m,
                                  session_id, now, interaction_id, hist.embedding)
                s.module.setdefault(m, []).append(item)
            s.interactions.append(Interaction(interaction_id, modality, frozenset(components), non_text, content, now,
                                              followup_target, target_modality))
            if len(s.full_history) % self.settings.compression_stride == 0:
                summary = compress((i.content for i in s.full_history), self.settings.compression_sentences)
                s.compressed = MemoryItem(f"{session_id}/compressed", MemoryLayer.COMPRESSED, summary, Modality.TEXT,
                                          session_id, now)
            if persist and self.directory:
                self._append(session_id, {
                    "timestamp": now, "layer": MemoryLayer.FULL_HISTORY.value, "modality": modality.value,
                    "content": content, "embedding_digest": _vec_digest(hist.embedding),
                    "interaction_id": interaction_id, "components": sorted(c.value for c in components),
                    "non_text": non_text, "followup_target": followup_target,
                    "target_modality": target_modality.value if target_modality else None,
                    "query_text": query_text, "response": response,
                })
        return s

    # ------------------------------------------------------------------ reads
    def build_context(
        self,
        session_id: str,
        query_text: str,
        now: int,
        scope: tuple[Modality, str | None] | None = None,
        required: Modality | None = None,
        thetas: tuple[float, float, float] | None = None,
        threshold: float | None = None,
        budget_chars: int | None = None,
    ) -> ContextBundle:
        st = self.settings
        thetas = thetas or st.thetas
        threshold = st.threshold if threshold is None else threshold
        budget = st.budget_chars if budget_chars is None else budget_chars
        if not self.has_session(session_id) and not self.directory:
            return ContextBundle((), budget, False, thetas)
        s = self.session(session_id)
        with s.lock:
            thetas = drift_thetas(thetas, len(s.full_history), st)
            qv = embed_text(query_text)
            scope_mod = scope[0] if scope else None
            required = required or scope_mod

            candidates: list[MemoryItem] = list(s.short_term)
            for m, bank in s.module.items():
                if scope_mod is None or m is scope_mod:
                    candidates.extend(bank)
            in_short = {i.interaction_id for i in s.short_term}
            older = [i for i in s.full_history if i.interaction_id not in in_short]
            ranked = sorted(older, key=lambda i: (-max(0.0, cosine(qv, i.embedding)), i.item_id))
            candidates.extend(i.as_layer(MemoryLayer.RELEVANT_CONTEXT) for i in ranked[: st.relevant_k])
            candidates.extend(ranked[st.relevant_k:])
            if s.compressed is not None and s.compressed.content:
                candidates.append(s.compressed)
            if scope_mod is not None:
                candidates = [c for c in candidates if c.modality in (Modality.TEXT, scope_mod)]

            best: dict[str, MemoryItem] = {}
            for c in candidates:
                key = c.interaction_id or c.item_id
                cur = best.get(key)
                if cur is None or LAYER_PRIORITY[c.layer] < LAYER_PRIORITY[cur.layer]:
                    best[key] = c

            scored = []
            for c in best.values():
                total, r, t, m = context_score(c, qv, now, thetas, required, st.tau_decay_ms, st.mismatch_m)
                if total >= threshold:
                    scored.append(ScoredItem(c, total, r, t, m))
            scored.sort(key=lambda x: (-x.total, x.item.item_id))

            chosen: list[ScoredItem] = []
            used = 0
            truncated = False
            for sc in scored:
                cost = len(sc.item.content) + (1 if chosen else 0)
                if used + cost > budget:
                    truncated = True
                    break
                chosen.append(sc)
                used += cost
            for sc in chosen:
                self._touch(s, sc.item, now)
            return ContextBundle(tuple(chosen), budget, truncated, thetas)

    @staticmethod
    def _touch(s: SessionMemory, item: MemoryItem, now: int) -> None:
        item.touch(now)
        # the same interaction lives in several layers; keep their access times aligned
        if item.interaction_id is None:
            return
        for other in s.all_items():
            if other.interaction_id == item.interaction_id:
                other.touch(now)

    # ------------------------------------------------------------------ persistence
    def _path(self, session_id: str) -> Path:
        assert self.directory is not None
        safe = re.sub(r"[^A-Za-z0-9_.-]", "_", session_id)
        return self.directory / f"{safe}.jsonl"

    def _append(self, session_id: str, row: dict) -> None:
        with open(self._path(session_id), "a", encoding="utf-8") as fh:
            fh.write(json.dumps(row, sort_keys=True) + "\n")

    def _reload(self, s: SessionMemory) -> None:
        path = self._path(s.session_id)
        if not path.exists():
            return
        # we are inside self._lock; record_interaction needs it, so rebuild through a scratch store
        scratch = MemoryStore(self.settings)
        with open(path, encoding="utf-8") as fh:
            for n, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                row = json.loads(line)
                if _vec_digest(embed_text(row["content"])) != row["embedding_digest"]:
                    raise ValueError(f"{path}:{n}: embedding digest mismatch")
                tgt = row.get("target_modality")
                scratch.record_interaction(
                    s.session_id, row["interaction_id"], row.get("query_text", ""), row.get("response", ""),
                    Modality.parse(row["modality"]), frozenset(Modality.parse(c) for c in row.get("components", [])),
                    bool(row.get("non_text")), int(row["timestamp"]), row.get("followup_target"),
                    Modality.parse(tgt) if tgt else None, persist=False,
                )
        loaded = scratch._sessions[s.session_id]
        s.short_term, s.full_history, s.module = loaded.short_term, loaded.full_history, loaded.module
        s.compressed, s.interactions = loaded.compressed, loaded.interactions
        logger.info("reloaded session %s with %d interactions", s.session_id, len(s.interactions))


def _vec_digest(vec: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(vec, dtype=np.float64).tobytes()).hexdigest()[:16]
