"""End-to-end request handling: intake, follow-up check, complexity and intent, routing, execution, memory."""

from __future__ import annotations

import logging
import re
import threading
import time
from dataclasses import dataclass, field
from typing import Any

from .agents import AgentGraph, AgentNode, ComponentOutput, FusionTrace, decompose, execute_graph, fuse
from .backends import BackendPool, BackendRequest, SimulatedBackend
from .complexity import ComplexityProfile, complexity
from .config import EngineConfig
from .core import Attachment, ExecutionCategory, Modality, Query, TaskCategory, Tier, UserPolicy
from .couplet import CoupletPipeline, CoupletResult, Tool, ToolRegistry
from .errors import (
    DecompositionEmpty, NodeFailure, NoFeasibleRoute, NoToolApplicable, RoutingEngineError, ToolFailure,
    UnknownQuery, UnrecognizedAttachment,
)
from .intake import AttachmentVerdict, FixtureTranscriber, IntakeResult, classify_intake, detect_attachment
from .intent import (
    CentroidIndex, IntentResult, RuleCompositeClassifier, actionable, classify_intent, followup_trigger,
    split_subtasks,
)
from .memory import BASE_MODALITIES, MemoryStore
from .routing import (
    Route, RouteContext, RouteKind, RoutingDecision, RoutingWeights, nontext_candidates, route_nontext,
    route_text, select_route,
)

logger = logging.getLogger(__name__)

MODALITY_CATEGORY = {
    Modality.IMAGE: TaskCategory.VISION,
    Modality.AUDIO: TaskCategory.AUDIO,
    Modality.VIDEO: TaskCategory.VIDEO,
    Modality.DOCUMENT: TaskCategory.DOCUMENT,
}


def _phrase_hit(text: str, phrases) -> bool:
    low = text.lower()
    return any(re.search(r"\b" + re.escape(p) + r"\b", low) for p in phrases)


def nontext_category(intake: IntakeResult, text: str, detect_phrases, verbs) -> TaskCategory:
    """Category for requests that bypass complexity scoring."""
    mods = intake.attachment_modalities
    if len(mods) != 1:
        return TaskCategory.COMPLEX
    if text and sum(actionable(s, verbs) for s in split_subtasks(text)) >= 2:
        return TaskCategory.COMPLEX
    (m,) = mods
    if m is Modality.IMAGE and text and _phrase_hit(text, detect_phrases):
        return TaskCategory.OBJECT_DETECT
    return MODALITY_CATEGORY[m]


@dataclass
class Plan:
    query: Query
    intake: IntakeResult
    category: TaskCategory
    ctx: RouteContext
    decision: RoutingDecision
    profile: ComplexityProfile | None = None
    intent: IntentResult | None = None
    followup_target: str | None = None
    target_modality: Modality | None = None
    stages: tuple[str, ...] = ()
    unrecognized: tuple[str, ...] = ()


@dataclass
class Execution:
    payload: str
    confidence: float
    latency_ms: float
    output_modality: Modality = Modality.TEXT
    fusion: FusionTrace | None = None
    graph: AgentGraph | None = None
    node_routes: dict[str, str] = field(default_factory=dict)
    fallback: str | None = None
    couplet: CoupletResult | None = None
    memory_digest: str | None = None
    error: str | None = None


@dataclass
class EngineResponse:
    query_id: str
    payload: str
    decision: RoutingDecision | None
    cost_charged: float
    latency_ms: float
    category: TaskCategory | None = None
    execution_category: ExecutionCategory | None = None
    modality: Modality | None = None
    intent_stage: str | None = None
    complexity_score: float | None = None
    fusion: FusionTrace | None = None
    graph: AgentGraph | None = None
    node_routes: dict[str, str] = field(default_factory=dict)
    memory_digest: str | None = None
    confidence: float = 0.0
    fallback: str | None = None
    refused: bool = False
    refusal_reason: str | None = None
    excluded: tuple = ()
    error: str | None = None
    stages: tuple[str, ...] = ()
    followup_target: str | None = None
    output_modality: Modality = Modality.TEXT
    decision_wall_ms: float = field(default=0.0, compare=False)

    @property
    def route_id(self) -> str | None:
        return self.decision.chosen.id if self.decision else None

    @property
    def route_label(self) -> str:
        return self.decision.chosen.label if self.decision else "refused"

    def to_dict(self, explain: bool = False) -> dict[str, Any]:
        out: dict[str, Any] = {
            "query_id": self.query_id,
            "payload": self.payload,
            "route": self.route_id,
            "route_label": self.route_label,
            "rationale": self.decision.rationale if self.decision else None,
            "category": self.category.value if self.category else None,
            "execution_category": self.execution_category.value if self.execution_category else None,
            "modality": self.modality.value if self.modality else None,
            "intent_stage": self.intent_stage,
            "complexity_score": self.complexity_score,
            "cost_charged": round(self.cost_charged, 10),
            "latency_ms": round(self.latency_ms, 6),
            "confidence": round(self.confidence, 10),
            "memory_digest": self.memory_digest,
            "fallback": self.fallback,
            "refused": self.refused,
            "refusal_reason": self.refusal_reason,
            "error": self.error,
            "stages": list(self.stages),
            "followup_target": self.followup_target,
        }
        if explain:
            out["decision"] = self.decision.to_dict() if self.decision else None
            out["excluded"] = [list(e) for e in self.excluded]
            out["graph"] = self.graph.describe() if self.graph else None
            out["node_routes"] = dict(self.node_routes)
            out["fusion"] = (
                {"table": self.fusion.table(), "dominance_applied": self.fusion.dominance_applied}
                if self.fusion else None
            )
        return out


@dataclass
class DecisionEntry:
    plan: Plan | None  # None when the request was refused before a plan existed
    response: EngineResponse


@dataclass
class EngineState:
    pool: BackendPool
    memory: MemoryStore
    decisions: dict[str, DecisionEntry] = field(default_factory=dict)
    lock: threading.Lock = field(default_factory=threading.Lock)


class Engine:
    def __init__(self, config: EngineConfig, state: EngineState | None = None, tau: float | None = None,
                 memory_dir: str | None = None) -> None:
        self.config = config
        self.tau = config.tau if tau is None else tau
        self.state = state or EngineState(
            BackendPool([*config.backends], config.seed),
            MemoryStore(config.memory, memory_dir),
        )
        self.registry = config.registry
        self.weights: RoutingWeights = config.weights
        self.index = CentroidIndex.build(config.exemplars)
        self.classifier = RuleCompositeClassifier(config.dicts)
        self.transcriber = FixtureTranscriber(config.transcripts)
        cp = config.couplet
        backend_ids = {Tool.parse(k): v for k, v in cp.get("tool_backends", {}).items()}
        params = {
            Tool.OBJECT_DETECTOR: {"confidence_floor": float(cp.get("detector_confidence_floor", 0.5))},
            Tool.OCR: {},
            Tool.SEMANTIC_TAGGER: {"label_set": "default"},
        }
        self.couplet = CoupletPipeline(ToolRegistry.from_annotations(config.annotations, backend_ids),
                                       cp["slm_backend"], parameters=params)
        self.detect_phrases = tuple(cp.get("object_detect_phrases", ()))
        eng = config.engine
        self.overhead_ms = float(eng.get("routing_overhead_ms", 20.0))
        self.fusion_ms = float(eng.get("fusion_ms", 15.0))
        self.node_retries = int(eng.get("node_retries", 2))
        self.max_workers = int(eng.get("max_workers", 4))

    @property
    def pool(self) -> BackendPool:
        return self.state.pool

    @property
    def memory(self) -> MemoryStore:
        return self.state.memory

    # ------------------------------------------------------------------ decision path
    def _intake(self, q: Query) -> tuple[IntakeResult, tuple[str, ...]]:
        try:
            return classify_intake(q, self.transcriber, self.config.tables), ()
        except UnrecognizedAttachment as exc:
            # known attachments keep their verdicts; the request is handed to the planner
            verdicts = []
            unknown = []
            for i, att in enumerate(q.attachments):
                aid = q.attachment_id(i)
                try:
                    m, tier = detect_attachment(att, self.config.tables, aid)
                    verdicts.append(AttachmentVerdict(aid, m, tier))
                except UnrecognizedAttachment:
                    unknown.append(aid)
            logger.info("query %s: unrecognized attachment %s, escalating to planner", q.id, exc.attachment_id)
            comps = {v.modality for v in verdicts} | ({Modality.TEXT} if q.has_text else set())
            cat = ExecutionCategory.HYBRID if q.has_text else ExecutionCategory.NON_TEXT
            from .core import InputKind
            kind = InputKind.TEXT_WITH_ATTACHMENTS if q.has_text else InputKind.INDEPENDENT_ATTACHMENTS
            return IntakeResult(Modality.MULTIMODAL, kind, cat, tuple(verdicts), None, frozenset(comps)), tuple(unknown)

    def plan(self, q: Query, force_route: str | None = None) -> Plan:
        """Everything up to and including route selection; no backend is called."""
        intake, unknown = self._intake(q)
        stages = ["intake"]
        policy = q.policy
        profile = intent = None
        followup_target = target_modality = None

        if intake.execution_category is ExecutionCategory.TEXT_ONLY:
            stages.append("followup")
            session = self.memory.session(q.session_id)
            history = session.history()
            trigger, target = followup_trigger(q, history, self.config.intent)
            if trigger is not None:
                intake = intake.with_category(ExecutionCategory.FOLLOW_UP)
                followup_target = target
                prior = session.interaction(target)
                if prior is not None:
                    target_modality = prior.modality if prior.modality in BASE_MODALITIES else None
                intent = IntentResult(TaskCategory.TEXT_MOE, 1.0, "keyword" if trigger == "anaphora" else "centroid",
                                      True, target)
            else:
                stages += ["complexity", "intent"]
                profile = complexity(q, self.config.dicts, self.config.complexity)
                intent = classify_intent(q, profile, profile.signals, self.index, self.classifier,
                                         self.config.dicts, self.config.intent)
            category = intent.category
        else:
            category = TaskCategory.COMPLEX if unknown else nontext_category(
                intake, q.text, self.detect_phrases, self.config.intent.action_verbs)

        ctx = RouteContext(intake.modality, intake.components, category, policy, profile)
        stages.append("route")
        if force_route is not None:
            decision = select_route(ctx, [self.registry[force_route]], self.weights, self.registry.cost_scale, "forced")
        elif unknown:
            decision = select_route(ctx, self.registry.of_kind(RouteKind.AGENT_CASCADE), self.weights,
                                    self.registry.cost_scale, "unrecognized_attachment")
        elif intake.execution_category in (ExecutionCategory.TEXT_ONLY, ExecutionCategory.FOLLOW_UP):
            decision = route_text(ctx, profile, intent, self.tau, self.registry, self.weights)
        else:
            decision = route_nontext(ctx, self.registry, self.weights)
        return Plan(q, intake, category, ctx, decision, profile, intent, followup_target, target_modality,
                    tuple(stages), unknown)

    # TauPlanner protocol
    def split_decision(self, q: Query) -> tuple[float, str, float, str, float]:
        intake, _ = self._intake(q)
        profile = complexity(q, self.config.dicts, self.config.complexity)
        intent = classify_intent(q, profile, profile.signals, self.index, self.classifier, self.config.dicts,
                                 self.config.intent)
        ctx = RouteContext(intake.modality, intake.components, intent.category, q.policy, profile)
        below = route_text(ctx, profile, intent, 1.0 + 1e-9, self.registry, self.weights).chosen
        above = route_text(ctx, profile, intent, 0.0, self.registry, self.weights).chosen
        return profile.score, below.label, below.cost, above.label, above.cost

    # ------------------------------------------------------------------ entry point
    def handle(self, q: Query, force_route: str | None = None, tag: str = "") -> EngineResponse:
        key = q.id + tag
        t0 = time.perf_counter()
        try:
            plan = self.plan(q, force_route)
        except NoFeasibleRoute as exc:
            wall = (time.perf_counter() - t0) * 1000.0
            logger.info("query %s refused: %s", q.id, exc)
            resp = EngineResponse(
                key, f"Request refused: {exc}", None, 0.0, self.overhead_ms, refused=True,
                refusal_reason=str(exc), excluded=tuple(exc.excluded), stages=("intake", "route"),
                decision_wall_ms=wall,
            )
            self._remember(key, None, resp)
            return resp
        wall = (time.perf_counter() - t0) * 1000.0
        try:
            ex = self.execute(plan, plan.decision.chosen, key)
        except NoFeasibleRoute as exc:
            resp = EngineResponse(
                key, f"Request refused: {exc}", plan.decision, self.pool.ledger.cost_for(key),
                self.overhead_ms, plan.category, plan.intake.execution_category, plan.intake.modality,
                refused=True, refusal_reason=str(exc), excluded=tuple(exc.excluded), stages=plan.stages,
                decision_wall_ms=wall,
            )
            self._remember(key, plan, resp)
            return resp
        stages = plan.stages + ("execute", "memory")
        q_text = q.text if q.has_text else (plan.intake.transcript or "")
        self.memory.record_interaction(
            q.session_id, key, q_text, ex.payload, plan.intake.modality, plan.intake.attachment_modalities,
            non_text=bool(q.attachments), now=q.arrived_at, followup_target=plan.followup_target,
            target_modality=plan.target_modality,
        )
        resp = EngineResponse(
            query_id=key,
            payload=ex.payload,
            decision=plan.decision,
            cost_charged=self.pool.ledger.cost_for(key),
            latency_ms=self.overhead_ms + ex.latency_ms,
            category=plan.category,
            execution_category=plan.intake.execution_category,
            modality=plan.intake.modality,
            intent_stage=plan.intent.stage if plan.intent else None,
            complexity_score=plan.profile.score if plan.profile else None,
            fusion=ex.fusion,
            graph=ex.graph,
            node_routes=ex.node_routes,
            memory_digest=ex.memory_digest,
            confidence=ex.confidence,
            fallback=ex.fallback,
            excluded=plan.decision.excluded,
            error=ex.error,
            stages=stages,
            followup_target=plan.followup_target,
            output_modality=ex.output_modality,
            decision_wall_ms=wall,
        )
        self._remember(key, plan, resp)
        return resp

    def _remember(self, key: str, plan: Plan | None, resp: EngineResponse) -> None:
        with self.state.lock:
            self.state.decisions[key] = DecisionEntry(plan, resp)

    def lookup(self, query_id: str) -> DecisionEntry:
        with self.state.lock:
            entry = self.state.decisions.get(query_id)
        if entry is None:
            raise UnknownQuery(query_id)
        return entry

    # ------------------------------------------------------------------ execution
    def _request_text(self, plan: Plan) -> str:
        parts = [plan.query.text.strip()]
        if plan.intake.transcript:
            parts.append(plan.intake.transcript)
        text = " ".join(p for p in parts if p)
        if not text:
            mods = sorted(m.value for m in plan.intake.attachment_modalities) or ["input"]
            text = "describe the attached " + " and ".join(mods)
        return text

    def _call(self, key: str, call_key: str, route: Route, category: TaskCategory, text: str,
              modality: Modality = Modality.TEXT, context: str = ""):
        return self.pool.execute(route.backend_id, BackendRequest(key, call_key, category, text, modality, context))

    def execute(self, plan: Plan, route: Route, key: str) -> Execution:
        text = self._request_text(plan)
        if route.kind is RouteKind.COUPLET:
            return self._run_couplet(plan, route, key, text)
        if route.kind is RouteKind.AGENT_CASCADE:
            return self._run_cascade(plan, route, key)
        context = ""
        digest = None
        if route.followup:
            scope = (plan.target_modality, None) if plan.target_modality else None
            bundle = self.memory.build_context(plan.query.session_id, plan.query.text, plan.query.arrived_at,
                                               scope=scope, required=plan.target_modality)
            context = bundle.rendered
            digest = bundle.digest
        res = self._call(key, route.id, route, plan.category, text, plan.intake.modality, context)
        return Execution(res.payload, res.confidence, res.simulated_latency_ms, route.output, memory_digest=digest)

    def _pipeline_for(self, plan: Plan, modality: Modality, exclude: str) -> RoutingDecision:
        cands = [r for r in self.registry.of_kind(RouteKind.PIPELINE)
                 if r.modality is modality and r.id != exclude and r.output is Modality.TEXT]
        return select_route(plan.ctx, cands, self.weights, self.registry.cost_scale, "couplet_fallback")

    def _run_couplet(self, plan: Plan, route: Route, key: str, text: str) -> Execution:
        found = next(((i, v) for i, v in enumerate(plan.intake.per_attachment)
                      if v.modality in (Modality.IMAGE, Modality.DOCUMENT)), None)
        if found is None:
            raise NoFeasibleRoute("couplet route needs an image or document attachment")
        i, verdict = found
        att = plan.query.attachments[i]
        try:
            res = self.couplet.run(key, plan.query.text, att, verdict.modality, verdict.attachment_id, self.pool,
                                   key=route.id)
            return Execution(res.response, res.confidence, res.latency_ms, couplet=res)
        except (NoToolApplicable, ToolFailure) as exc:
            logger.info("couplet fallback for %s: %s", key, exc)
            spent = sum(c.latency_ms for c in self.pool.ledger.calls_for(key))
            fb = self._pipeline_for(plan, verdict.modality, route.id).chosen
            r = self._call(key, fb.id, fb, plan.category, text, verdict.modality)
            return Execution(r.payload, r.confidence, spent + r.simulated_latency_ms, fallback=fb.id)

    def _node_candidates(self, node: AgentNode) -> list[Route]:
        if node.modality is Modality.TEXT:
            return [r for r in self.registry.of_kind(RouteKind.EFFICIENT) if not r.followup]
        return [r for r in nontext_candidates(self.registry)
                if r.kind is not RouteKind.AGENT_CASCADE and node.modality in r.supported_modalities]

    def _run_cascade(self, plan: Plan, route: Route, key: str) -> Execution:
        q = plan.query
        mods = [v.modality for v in plan.intake.per_attachment]
        try:
            graph = decompose(q.text, mods)
        except DecompositionEmpty:
            return self._premium_fallback(plan, key)
        node_routes: dict[str, str] = {}
        lock = threading.Lock()

        def dispatch(node: AgentNode, inputs: list[ComponentOutput], excluded: frozenset[str]) -> ComponentOutput:
            cands = [r for r in self._node_candidates(node) if r.id not in excluded]
            comps = frozenset({node.modality, Modality.TEXT})
            ctx = RouteContext(node.modality, comps, node.category, q.policy)
            decision = select_route(ctx, cands, self.weights, self.registry.cost_scale, f"node:{node.node_id}")
            r = decision.chosen
            comp = decision.components[r.id]
            att = q.attachments[node.attachment_index] if node.attachment_index is not None else None
            text = node.text or f"{node.capability.value} the {node.modality.value}"
            if att is not None and node.modality is Modality.AUDIO:
                text = f"{text} {self.transcriber.transcribe(att)}"
            upstream = " ".join(o.payload for o in inputs)
            scope = (node.modality, node.capability.value) if node.modality is not Modality.TEXT else None
            bundle = self.memory.build_context(q.session_id, text, q.arrived_at, scope=scope)
            call_key = f"{route.id}/{node.node_id}/{r.id}"
            try:
                if r.kind is RouteKind.COUPLET:
                    if att is None:
                        raise NoToolApplicable("couplet node without an attachment")
                    cres = self.couplet.run(key, node.text, att, node.modality, q.attachment_id(node.attachment_index),
                                            self.pool, key=call_key)
                    payload, conf, lat = cres.response, cres.confidence, cres.latency_ms
                else:
                    res = self.pool.execute(r.backend_id, BackendRequest(
                        key, call_key, node.category, f"{text} {upstream}".strip(), node.modality, bundle.rendered))
                    payload, conf, lat = res.payload, res.confidence, res.simulated_latency_ms
            except RoutingEngineError as exc:
                exc.route_id = r.id  # type: ignore[attr-defined]
                raise
            with lock:
                node_routes[node.node_id] = r.id
            return ComponentOutput(node.node_id, payload, node.modality, conf, comp.s_m, comp.s_t, r.id, lat,
                                   r.cost)

        try:
            run = execute_graph(graph, dispatch, self.node_retries, self.max_workers)
        except NodeFailure as exc:
            if not exc.partial:
                return Execution(f"Agent node {exc.node_id} failed.", 0.0, 0.0, graph=graph,
                                 node_routes=node_routes, error=str(exc))
            trace = fuse(exc.partial, self.config.fusion)
            return Execution(trace.payload, trace.confidence, self.fusion_ms, fusion=trace, graph=graph,
                             node_routes=node_routes, error=str(exc))
        trace = fuse(run.outputs, self.config.fusion)
        return Execution(trace.payload, trace.confidence, run.latency_ms + self.fusion_ms, fusion=trace,
                         graph=graph, node_routes=node_routes)

    def _premium_fallback(self, plan: Plan, key: str) -> Execution:
        ctx = plan.ctx
        premium = self.registry.of_kind(RouteKind.PREMIUM)
        efficient = [r for r in self.registry.of_kind(RouteKind.EFFICIENT) if not r.followup]
        pick = premium if ctx.policy.allows_tier(Tier.PREMIUM) else efficient
        route = select_route(ctx, pick, self.weights, self.registry.cost_scale, "decomposition_empty").chosen
        res = self._call(key, route.id, route, plan.category, self._request_text(plan), plan.intake.modality)
        return Execution(res.payload, res.confidence, res.simulated_latency_ms, fallback=route.id)


def always_premium(engine: Engine, q: Query, pool: BackendPool, backend_id: str | None = None) -> tuple[str, float, float]:
    """Replay one query on the single top-tier backend; returns (payload, cost, latency)."""
    backend_id = backend_id or engine.config.engine["always_premium_backend"]
    try:
        intake = classify_intake(q, engine.transcriber, engine.config.tables)
        text_parts = [q.text.strip(), intake.transcript or ""]
        modality = intake.modality
        category = TaskCategory.GENERAL
    except UnrecognizedAttachment:
        text_parts, modality, category = [q.text.strip()], Modality.MULTIMODAL, TaskCategory.GENERAL
    text = " ".join(p for p in text_parts if p) or "describe the attachment"
    res = pool.execute(backend_id, BackendRequest(q.id, "always_premium", category, text, modality))
    return res.payload, res.cost_charged, res.simulated_latency_ms
