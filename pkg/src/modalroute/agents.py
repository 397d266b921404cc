"""Complex-query decomposition into an agent DAG, scheduled execution, and MoE fusion."""

from __future__ import annotations

import logging
import re
import threading
from concurrent.futures import FIRST_COMPLETED, Future, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Protocol, Sequence

import numpy as np

from .core import Modality, NamedEnum, TaskCategory, embed_text, tokenize
from .errors import DecompositionEmpty, EmptyOutputs, NodeFailure, RoutingEngineError
from .intent import split_subtasks

logger = logging.getLogger(__name__)


class Capability(NamedEnum):
    SUMMARIZE = "summarize"
    DETECT_OBJECTS = "detect_objects"
    TRANSCRIBE = "transcribe"
    PARSE_TABLE = "parse_table"
    REASON = "reason"
    GENERATE = "generate"
    EXTRACT_STRUCTURE = "extract_structure"


ATTACHMENT_CAPABILITY = {
    Modality.IMAGE: Capability.DETECT_OBJECTS,
    Modality.AUDIO: Capability.TRANSCRIBE,
    Modality.VIDEO: Capability.SUMMARIZE,
    Modality.DOCUMENT: Capability.EXTRACT_STRUCTURE,
}

# first verb family present in a segment decides its capability
SEGMENT_CAPABILITY: list[tuple[Capability, frozenset[str]]] = [
    (Capability.TRANSCRIBE, frozenset({"transcribe"})),
    (Capability.REASON, frozenset({"compare", "contrast", "explain", "why"})),
    (Capability.DETECT_OBJECTS, frozenset({"detect", "count", "locate", "spot"})),
    (Capability.SUMMARIZE, frozenset({"summarize", "summarise", "summary", "recap", "outline"})),
    (Capability.PARSE_TABLE, frozenset({"chart", "plot", "graph", "tabulate", "visualize"})),
    (Capability.EXTRACT_STRUCTURE, frozenset({"extract", "list", "parse"})),
    (Capability.GENERATE, frozenset({"write", "generate", "draft", "translate", "rewrite", "create", "compose", "draw"})),
]

CAPABILITY_CATEGORY = {
    Capability.SUMMARIZE: TaskCategory.SUMMARIZATION_WRITING,
    Capability.GENERATE: TaskCategory.SUMMARIZATION_WRITING,
    Capability.DETECT_OBJECTS: TaskCategory.OBJECT_DETECT,
    Capability.TRANSCRIBE: TaskCategory.AUDIO,
    Capability.PARSE_TABLE: TaskCategory.DOCUMENT,
    Capability.EXTRACT_STRUCTURE: TaskCategory.DOCUMENT,
    Capability.REASON: TaskCategory.GENERAL,
}

MODALITY_CATEGORY = {
    Modality.IMAGE: TaskCategory.VISION,
    Modality.AUDIO: TaskCategory.AUDIO,
    Modality.VIDEO: TaskCategory.VIDEO,
    Modality.DOCUMENT: TaskCategory.DOCUMENT,
}

# words that point at an attachment's product
MODALITY_REFERENCES: dict[Modality, frozenset[str]] = {
    Modality.IMAGE: frozenset({"image", "picture", "photo", "chart", "diagram", "figure", "screenshot", "scene"}),
    Modality.AUDIO: frozenset({"audio", "recording", "transcript", "speaker", "voice", "call", "podcast"}),
    Modality.VIDEO: frozenset({"video", "clip", "footage", "frames"}),
    Modality.DOCUMENT: frozenset({"document", "table", "report", "pdf", "file", "form", "page", "invoice", "contract"}),
}

# words that point back at the previous subtask's product
BACK_REFERENCES = frozenset({"it", "its", "them", "their", "result", "results", "summary", "translation", "output",
                             "answer", "totals", "findings", "transcript", "that", "those"})


@dataclass(frozen=True)
class AgentNode:
    node_id: str
    modality: Modality
    capability: Capability
    deps: frozenset[str] = frozenset()
    text: str = ""
    attachment_index: int | None = None

    def __post_init__(self) -> None:
        if self.node_id in self.deps:
            raise ValueError(f"node {self.node_id} depends on itself")

    @property
    def category(self) -> TaskCategory:
        if self.attachment_index is not None:
            return MODALITY_CATEGORY.get(self.modality, TaskCategory.GENERAL)
        return CAPABILITY_CATEGORY[self.capability]


@dataclass(frozen=True)
class AgentGraph:
    nodes: tuple[AgentNode, ...]

    def __post_init__(self) -> None:
        if not self.nodes:
            raise DecompositionEmpty("graph has no nodes")
        ids = [n.node_id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate node ids")
        known = set(ids)
        for n in self.nodes:
            missing = n.deps - known
            if missing:
                raise ValueError(f"node {n.node_id} depends on unknown {sorted(missing)}")
        self.topological_order()  # raises on cycles

    @property
    def edges(self) -> list[tuple[str, str]]:
        return sorted((d, n.node_id) for n in self.nodes for d in n.deps)

    def node(self, node_id: str) -> AgentNode:
        return next(n for n in self.nodes if n.node_id == node_id)

    def topological_order(self) -> list[str]:
        indeg = {n.node_id: len(n.deps) for n in self.nodes}
        children: dict[str, list[str]] = {n.node_id: [] for n in self.nodes}
        for n in self.nodes:
            for d in n.deps:
                children[d].append(n.node_id)
        ready = sorted(k for k, v in indeg.items() if v == 0)
        order = []
        while ready:
            cur = ready.pop(0)
            order.append(cur)
            for c in sorted(children[cur]):
                indeg[c] -= 1
                if indeg[c] == 0:
                    ready.append(c)
            ready.sort()
        if len(order) != len(self.nodes):
            raise ValueError("agent graph contains a cycle")
        return order

    def describe(self) -> dict:
        return {
            "nodes": [{"id": n.node_id, "modality": n.modality.value, "capability": n.capability.value,
                       "deps": sorted(n.deps), "text": n.text} for n in self.nodes],
            "edges": [list(e) for e in self.edges],
        }


def segment_capability(segment: str) -> Capability:
    tokens = set(tokenize(segment))
    if "extract" in tokens and "text" in tokens:
        return Capability.EXTRACT_STRUCTURE
    for cap, verbs in SEGMENT_CAPABILITY:
        if tokens & verbs:
            return cap
    return Capability.REASON


def _references(tokens: set[str], modality: Modality) -> bool:
    return bool(tokens & MODALITY_REFERENCES.get(modality, frozenset()))


def decompose(text: str, attachments: Sequence[Modality] = ()) -> AgentGraph:
    """Attachment nodes first, then one node per text subtask; edges only point backward."""
    nodes: list[AgentNode] = []
    for i, m in enumerate(attachments):
        if m in ATTACHMENT_CAPABILITY:
            nodes.append(AgentNode(f"n{len(nodes)}", m, ATTACHMENT_CAPABILITY[m], attachment_index=i))
    attachment_nodes = list(nodes)
    segments = split_subtasks(text) if text.strip() else []
    prev_text_node: str | None = None
    for seg in segments:
        cap = segment_capability(seg)
        tokens = set(tokenize(seg))
        target = None
        for node in attachment_nodes:
            if node.capability is cap and not node.text and (len(attachment_nodes) == 1 or _references(tokens, node.modality)):
                target = node
                break
        if target is None and len(attachment_nodes) == 1 and not attachment_nodes[0].text and cap is Capability.REASON:
            target = attachment_nodes[0]
        if target is not None:
            idx = nodes.index(target)
            nodes[idx] = AgentNode(target.node_id, target.modality, target.capability, target.deps, seg,
                                   target.attachment_index)
            attachment_nodes[attachment_nodes.index(target)] = nodes[idx]
            prev_text_node = target.node_id
            continue
        deps = set()
        for node in attachment_nodes:
            if _references(tokens, node.modality):
                deps.add(node.node_id)
        if prev_text_node is not None and tokens & BACK_REFERENCES:
            deps.add(prev_text_node)
        if not deps and attachment_nodes and not any(_references(tokens, n.modality) for n in attachment_nodes):
            # unanchored question over attachments: it consumes all of them
            if len(segments) == 1:
                deps = {n.node_id for n in attachment_nodes}
        node = AgentNode(f"n{len(nodes)}", Modality.TEXT, cap, frozenset(deps), seg)
        nodes.append(node)
        prev_text_node = node.node_id
    if not nodes:
        raise DecompositionEmpty("nothing to decompose")
    return AgentGraph(tuple(nodes))


# ---------------------------------------------------------------- execution

@dataclass(frozen=True)
class ComponentOutput:
    node_id: str
    payload: str
    modality: Modality
    confidence: float
    s_m: float = 1.0
    s_t: float = 1.0
    route_id: str = ""
    latency_ms: float = 0.0
    cost: float = 0.0
    latent: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence outside [0,1]")
        if self.latent is not None:
            n = float(np.linalg.norm(self.latent))
            if n > 0 and abs(n - 1.0) > 1e-6:
                raise ValueError("latent must be L2-normalized")


class NodeDispatcher(Protocol):
    def __call__(self, node: AgentNode, inputs: list[ComponentOutput], excluded: frozenset[str]) -> ComponentOutput:
        """Run one node; raise to trigger the per-node fallback."""
        ...


Schedule = Callable[[list[str]], list[str]]


@dataclass
class GraphRun:
    outputs: list[ComponentOutput]
    latency_ms: float
    start_order: list[str]
    finish_ms: dict[str, float]


def execute_graph(
    g: AgentGraph,
    dispatch: NodeDispatcher,
    max_retries: int = 2,
    max_workers: int = 4,
    schedule: Schedule | None = None,
) -> GraphRun:
    """Dependency-respecting execution; independent nodes may run concurrently.

    Outputs come back in node-id order whatever the completion order. Simulated latency is the
    critical-path length.
    """
    by_id = {n.node_id: n for n in g.nodes}
    done: dict[str, ComponentOutput] = {}
    started: set[str] = set()
    start_order: list[str] = []
    lock = threading.Lock()

    def run_node(node: AgentNode) -> ComponentOutput:
        inputs = [done[d] for d in sorted(node.deps)]
        excluded: set[str] = set()
        last: Exception | None = None
        for attempt in range(max_retries + 1):
            try:
                return dispatch(node, inputs, frozenset(excluded))
            except RoutingEngineError as exc:
                last = exc
                route = getattr(exc, "route_id", None)
                if route:
                    excluded.add(route)
                logger.info("node %s attempt %d failed: %s", node.node_id, attempt, exc)
        raise NodeFailure(node.node_id, [], last)

    failure: NodeFailure | None = None
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        running: dict[Future, str] = {}
        while True:
            with lock:
                ready = [nid for nid, n in by_id.items()
                         if nid not in started and n.deps <= done.keys()]
            ready = sorted(ready)
            if schedule is not None:
                ready = schedule(ready)
            if failure is None:
                for nid in ready:
                    started.add(nid)
                    start_order.append(nid)
                    running[pool.submit(run_node, by_id[nid])] = nid
            if not running:
                break
            finished, _ = wait(list(running), return_when=FIRST_COMPLETED)
            for fut in finished:
                nid = running.pop(fut)
                try:
                    out = fut.result()
                except NodeFailure as exc:
                    failure = failure or exc
                    continue
                with lock:
                    done[nid] = out

    finish: dict[str, float] = {}
    for nid in g.topological_order():
        if nid in done:
            base = max((finish.get(d, 0.0) for d in by_id[nid].deps), default=0.0)
            finish[nid] = base + done[nid].latency_ms
    outputs = [done[nid] for nid in sorted(done, key=_node_key)]
    if failure is not None:
        raise NodeFailure(failure.node_id, outputs, failure.cause)
    return GraphRun(outputs, max(finish.values(), default=0.0), start_order, finish)


def _node_key(node_id: str) -> tuple[int, str]:
    digits = re.sub(r"\D", "", node_id)
    return (int(digits) if digits else 0, node_id)


# ---------------------------------------------------------------- fusion

@lru_cache(maxsize=None)
def rotation(modality: Modality, dim: int = 256) -> np.ndarray:
    """Fixed per-modality orthogonal matrix (QR of a seeded Gaussian, sign-corrected)."""
    seed = int.from_bytes(modality.value.encode("utf-8"), "big") % (2**32)
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    q = q * np.sign(np.diag(r))
    q.flags.writeable = False
    return q


def adapt(output: ComponentOutput) -> np.ndarray:
    vec = embed_text(output.payload)
    return rotation(output.modality, vec.shape[0]) @ vec


def softmax(s: Sequence[float]) -> np.ndarray:
    arr = np.asarray(s, dtype=np.float64)
    z = np.exp(arr - arr.max())
    return z / z.sum()


@dataclass(frozen=True)
class FusionSettings:
    alpha_m: float = 0.4
    alpha_t: float = 0.3
    alpha_c: float = 0.3
    logit_scale: float = 4.0
    dominance_threshold: float = 0.75

    def __post_init__(self) -> None:
        if min(self.alpha_m, self.alpha_t, self.alpha_c) < 0 or self.alpha_m + self.alpha_t + self.alpha_c <= 0:
            raise ValueError("fusion coefficients must be non-negative and not all zero")


@dataclass(frozen=True)
class FusionTrace:
    node_ids: tuple[str, ...]
    scores: tuple[float, ...]
    weights: tuple[float, ...]
    fused: np.ndarray = field(repr=False)
    dominance_applied: bool
    payload: str
    confidence: float

    def table(self) -> list[dict]:
        return [{"node": n, "s": s, "w": w} for n, s, w in zip(self.node_ids, self.scores, self.weights)]


def relevance(o: ComponentOutput, settings: FusionSettings) -> float:
    """Convex combination of S_m, S_t and confidence, scaled into softmax logits."""
    total = settings.alpha_m + settings.alpha_t + settings.alpha_c
    raw = (settings.alpha_m * _unit(o.s_m) + settings.alpha_t * _unit(o.s_t) + settings.alpha_c * _unit(o.confidence)) / total
    return settings.logit_scale * raw


def _unit(x: float) -> float:
    return min(1.0, max(0.0, x))


def fuse_scores(outputs: Sequence[ComponentOutput], scores: Sequence[float], settings: FusionSettings | None = None) -> FusionTrace:
    settings = settings or FusionSettings()
    if not outputs:
        raise EmptyOutputs("nothing to fuse")
    w = softmax(scores)
    latents = [o.latent if o.latent is not None else adapt(o) for o in outputs]
    fused = np.sum([wi * li for wi, li in zip(w, latents)], axis=0)
    top = int(np.argmax(w))
    dominant = bool(w[top] >= settings.dominance_threshold)
    if dominant:
        payload = outputs[top].payload
        conf = outputs[top].confidence
    else:
        order = sorted(range(len(outputs)), key=lambda i: (-w[i], outputs[i].node_id))
        payload = " | ".join(f"[{w[i]:.2f}] {outputs[i].payload}" for i in order)
        conf = float(sum(w[i] * outputs[i].confidence for i in range(len(outputs))))
    return FusionTrace(
        tuple(o.node_id for o in outputs), tuple(float(s) for s in scores), tuple(float(x) for x in w),
        fused, dominant, payload, conf,
    )


def fuse(outputs: Sequence[ComponentOutput], settings: FusionSettings | None = None) -> FusionTrace:
    settings = settings or FusionSettings()
    if not outputs:
        raise EmptyOutputs("nothing to fuse")
    return fuse_scores(outputs, [relevance(o, settings) for o in outputs], settings)
