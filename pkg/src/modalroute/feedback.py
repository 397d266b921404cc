"""Feedback ingestion: fallback re-execution, reroute on reported misroutes, and the adjustment digest."""

from __future__ import annotations

import json
import logging
import threading
from collections import defaultdict
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

from .core import Modality, NamedEnum, TaskCategory, Tier
from .engine import Engine, EngineResponse, Plan
from .errors import ConfigError, NoAlternativeRoute, NoFeasibleRoute
from .routing import Route, RouteContext, RouteKind, RoutingDecision, RoutingWeights, nontext_candidates, select_route

logger = logging.getLogger(__name__)


class FeedbackKind(NamedEnum):
    UNSATISFACTORY = "unsatisfactory"
    ROUTING_ERROR = "routing_error"


class ReportedProblem(NamedEnum):
    WRONG_MODEL = "wrong_model"
    WRONG_MODALITY = "wrong_modality"
    MISSING_CONTEXT = "missing_context"


@dataclass(frozen=True)
class FeedbackEvent:
    query_id: str
    kind: FeedbackKind
    reported_problem: ReportedProblem | None = None
    timestamp: int = 0

    def __post_init__(self) -> None:
        if self.kind is FeedbackKind.ROUTING_ERROR and self.reported_problem is None:
            raise ConfigError("a routing_error event needs a reported problem")

    def to_dict(self) -> dict:
        return {"query_id": self.query_id, "kind": self.kind.value,
                "reported_problem": self.reported_problem.value if self.reported_problem else None,
                "timestamp": self.timestamp}


@dataclass(frozen=True)
class AdjustmentRecord:
    query_id: str
    event: FeedbackEvent
    original: RoutingDecision
    retry: RoutingDecision
    original_confidence: float
    retry_confidence: float
    rule_id: str
    category: TaskCategory
    retry_response: EngineResponse | None = None
    original_response: EngineResponse | None = None

    @property
    def quality_differential(self) -> float:
        return self.retry_confidence - self.original_confidence

    def to_dict(self) -> dict:
        return {
            "query_id": self.query_id, "event": self.event.to_dict(), "rule_id": self.rule_id,
            "category": self.category.value, "original_route": self.original.chosen.id,
            "retry_route": self.retry.chosen.id, "original_confidence": self.original_confidence,
            "retry_confidence": self.retry_confidence, "quality_differential": self.quality_differential,
            "retry_payload": self.retry_response.payload if self.retry_response else None,
        }


@dataclass(frozen=True)
class MisrouteEntry:
    query_id: str
    model: str
    route_id: str
    modality: Modality
    subtask: TaskCategory
    problem: ReportedProblem | None


@dataclass(frozen=True)
class NoRetry:
    query_id: str
    event: FeedbackEvent
    reason: str


@dataclass
class DigestRow:
    category: TaskCategory
    route_id: str
    events: int = 0
    misroutes: int = 0
    differential_sum: float = 0.0
    retries: int = 0
    flagged: bool = False

    @property
    def rate(self) -> float:
        return self.misroutes / self.events if self.events else 0.0

    @property
    def mean_differential(self) -> float:
        return self.differential_sum / self.retries if self.retries else 0.0

    def to_dict(self) -> dict:
        return {"category": self.category.value, "route": self.route_id, "events": self.events,
                "misroutes": self.misroutes, "rate": self.rate, "mean_quality_differential": self.mean_differential,
                "flagged": self.flagged}


_TIER_RANK = {Tier.TOOL: 0, Tier.OPEN_SOURCE: 0, Tier.PREMIUM: 1}


def route_family(engine: Engine, ctx: RouteContext) -> list[Route]:
    """Routes comparable to the original: text models for text contexts, modality routes otherwise."""
    reg = engine.registry
    if ctx.components <= {Modality.TEXT}:
        extra = [r for r in reg if r.followup] + reg.of_kind(RouteKind.AGENT_CASCADE)
        extra += [r for r in reg.of_kind(RouteKind.PIPELINE) if r.output is Modality.IMAGE]
        return reg.text_models() + extra
    return nontext_candidates(reg)


def strongest_alternative(engine: Engine, decision: RoutingDecision) -> RoutingDecision:
    """Best compliant route stronger than the original, ignoring price; premium first when allowed."""
    ctx = decision.context
    original = decision.chosen
    w = decision.weights
    strong = RoutingWeights.normalized(w.delta_m, w.delta_u, w.delta_t, 0.0)
    scale = engine.registry.cost_scale
    if ctx.components <= {Modality.TEXT}:
        pool = engine.registry.text_models()
    else:
        pool = nontext_candidates(engine.registry)
    pool = [r for r in pool if r.id != original.id]
    tiers = [[r for r in pool if r.tier is Tier.PREMIUM], [r for r in pool if r.tier is not Tier.PREMIUM]]
    orig_st = original.affinity(ctx.category)
    for group in tiers:
        try:
            cand = select_route(ctx, group, strong, scale, "fallback_unsatisfactory")
        except NoFeasibleRoute:
            continue
        r = cand.chosen
        comp = cand.components[r.id]
        if comp.s_m < 1.0:
            continue
        if _TIER_RANK[r.tier] > _TIER_RANK[original.tier] or (
                _TIER_RANK[r.tier] == _TIER_RANK[original.tier] and comp.s_t > orig_st):
            return cand
    raise NoAlternativeRoute(f"no compliant route stronger than {original.id}")


class FeedbackPolicy:
    def __init__(self, engine: Engine, log_path: str | Path | None = None, flag_rate: float | None = None) -> None:
        self.engine = engine
        self.log_path = Path(log_path) if log_path else None
        self.flag_rate = float(engine.config.feedback.get("flag_rate", 0.5)) if flag_rate is None else flag_rate
        self.records: list[AdjustmentRecord] = []
        self.misroutes: list[MisrouteEntry] = []
        self.no_retry: list[NoRetry] = []
        self.events: list[tuple[FeedbackEvent, TaskCategory, str]] = []
        self._lock = threading.Lock()
        self._query_locks: dict[str, threading.Lock] = defaultdict(threading.Lock)
        self._counter: dict[str, int] = defaultdict(int)

    def _append(self, row: dict) -> None:
        if self.log_path is None:
            return
        self.log_path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.log_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(row, sort_keys=True) + "\n")

    def handle(self, event: FeedbackEvent) -> AdjustmentRecord:
        entry = self.engine.lookup(event.query_id)
        with self._lock:
            qlock = self._query_locks[event.query_id]
        with qlock:
            return self._handle(event, entry.plan, entry.response)

    def _handle(self, event: FeedbackEvent, plan: Plan | None, original: EngineResponse) -> AdjustmentRecord:
        decision = original.decision
        if decision is None:
            return self._refuse(event, plan, "original request was refused; nothing to retry")
        ctx = decision.context
        with self._lock:
            self.events.append((event, plan.category, decision.chosen.id))
        if event.kind is FeedbackKind.ROUTING_ERROR:
            entry = MisrouteEntry(event.query_id, decision.chosen.backend_id, decision.chosen.id, ctx.modality,
                                  plan.category, event.reported_problem)
            with self._lock:
                self.misroutes.append(entry)
            self._append({"type": "misroute", "query_id": entry.query_id, "model": entry.model,
                          "route": entry.route_id, "modality": entry.modality.value, "subtask": entry.subtask.value,
                          "problem": entry.problem.value if entry.problem else None})
            family = [r for r in route_family(self.engine, ctx) if r.id != decision.chosen.id]
            try:
                retry = select_route(ctx, family, decision.weights, self.engine.registry.cost_scale, "reroute")
            except NoFeasibleRoute:
                return self._refuse(event, plan, "every alternative route is excluded")
            rule = f"reroute:{event.reported_problem.value}"
        else:
            try:
                retry = strongest_alternative(self.engine, decision)
            except NoAlternativeRoute as exc:
                return self._refuse(event, plan, str(exc))
            rule = "fallback:stronger_route"

        with self._lock:
            self._counter[event.query_id] += 1
            tag = f"#fb{self._counter[event.query_id]}"
        retry_plan = replace(plan, decision=retry)
        ex = self.engine.execute(retry_plan, retry.chosen, original.query_id + tag)
        key = original.query_id + tag
        retry_resp = EngineResponse(
            key, ex.payload, retry, self.engine.pool.ledger.cost_for(key), self.engine.overhead_ms + ex.latency_ms,
            plan.category, plan.intake.execution_category, plan.intake.modality, confidence=ex.confidence,
            fusion=ex.fusion, graph=ex.graph, fallback=ex.fallback, memory_digest=ex.memory_digest,
            stages=("feedback", "route", "execute"),
        )
        rec = AdjustmentRecord(original.query_id, event, decision, retry, original.confidence, ex.confidence, rule,
                               plan.category, retry_resp, original)
        with self._lock:
            self.records.append(rec)
        self._append({"type": "adjustment", **rec.to_dict()})
        logger.info("feedback %s: %s -> %s (%+.3f)", original.query_id, decision.chosen.id, retry.chosen.id,
                    rec.quality_differential)
        return rec

    def _refuse(self, event: FeedbackEvent, plan: Plan | None, reason: str) -> AdjustmentRecord:
        with self._lock:
            self.no_retry.append(NoRetry(event.query_id, event, reason))
        self._append({"type": "no_retry", "query_id": event.query_id, "event": event.to_dict(), "reason": reason})
        logger.info("feedback %s: no retry (%s)", event.query_id, reason)
        raise NoAlternativeRoute(reason)

    def digest(self) -> list[DigestRow]:
        with self._lock:
            return adjustment_digest(list(self.events), list(self.records), self.flag_rate)


def adjustment_digest(
    events: Sequence[tuple[FeedbackEvent, TaskCategory, str]],
    records: Sequence[AdjustmentRecord] = (),
    flag_rate: float = 0.5,
) -> list[DigestRow]:
    """Per-(category, route) misroute counts and mean quality differential of retries."""
    rows: dict[tuple[TaskCategory, str], DigestRow] = {}
    for ev, cat, route_id in events:
        row = rows.setdefault((cat, route_id), DigestRow(cat, route_id))
        row.events += 1
        if ev.kind is FeedbackKind.ROUTING_ERROR:
            row.misroutes += 1
    for rec in records:
        row = rows.setdefault((rec.category, rec.original.chosen.id), DigestRow(rec.category, rec.original.chosen.id))
        row.retries += 1
        row.differential_sum += rec.quality_differential
    for row in rows.values():
        row.flagged = row.rate > flag_rate
    return [rows[k] for k in sorted(rows, key=lambda k: (k[0].value, k[1]))]
