"""Utility-maximizing route selection under policy constraints."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

from .complexity import ComplexityProfile
from .core import Modality, NamedEnum, TaskCategory, Tier, UserPolicy
from .errors import ConfigError, NoFeasibleRoute, UnknownName
from .intent import IntentResult


class RouteKind(NamedEnum):
    EFFICIENT = "efficient"
    PREMIUM = "premium"
    AGENT_CASCADE = "agent_cascade"
    COUPLET = "couplet"
    PIPELINE = "pipeline"


@dataclass(frozen=True)
class RoutingWeights:
    delta_m: float = 0.40
    delta_u: float = 0.30
    delta_t: float = 0.20
    lambda_c: float = 0.10

    def __post_init__(self) -> None:
        values = (self.delta_m, self.delta_u, self.delta_t, self.lambda_c)
        if min(values) < 0:
            raise ConfigError("routing weights must be non-negative")
        if abs(sum(values) - 1.0) > 1e-9:
            raise ConfigError(f"routing weights must be l1-normalized, sum is {sum(values)}")
        if not self.delta_m >= self.delta_u >= self.delta_t:
            raise ConfigError("routing weights must keep delta_m >= delta_u >= delta_t")

    @classmethod
    def normalized(cls, delta_m: float, delta_u: float, delta_t: float, lambda_c: float) -> RoutingWeights:
        total = delta_m + delta_u + delta_t + lambda_c
        if total <= 0:
            raise ConfigError("routing weights must not all be zero")
        return cls(delta_m / total, delta_u / total, delta_t / total, lambda_c / total)


@dataclass(frozen=True)
class Route:
    id: str
    kind: RouteKind
    backend_id: str
    tier: Tier
    supported_modalities: frozenset[Modality]
    task_affinity: Mapping[TaskCategory, float]
    cost: float
    modality: Modality | None = None  # input modality served by a pipeline
    output: Modality = Modality.TEXT
    followup: bool = False

    def __post_init__(self) -> None:
        if self.cost < 0:
            raise ConfigError(f"route {self.id}: negative cost")
        if self.kind is RouteKind.EFFICIENT and self.tier is Tier.PREMIUM:
            raise ConfigError(f"route {self.id}: efficient routes must use open-tier backends")

    def affinity(self, category: TaskCategory) -> float:
        return float(self.task_affinity.get(category, 0.0))

    @property
    def label(self) -> str:
        """Coarse route class used by the evaluation harness."""
        if self.followup:
            return "followup"
        if self.kind is RouteKind.PIPELINE:
            target = "image_gen" if self.output is Modality.IMAGE else (self.modality.value if self.modality else "any")
            return f"pipeline:{target}"
        return self.kind.value


@dataclass(frozen=True)
class RouteContext:
    modality: Modality
    components: frozenset[Modality]
    category: TaskCategory
    policy: UserPolicy = field(default_factory=UserPolicy)
    profile: ComplexityProfile | None = None


@dataclass(frozen=True)
class RouteComponents:
    s_m: float
    s_u: float
    s_t: float
    c_r: float

    def utility(self, w: RoutingWeights) -> float:
        return w.delta_m * self.s_m + w.delta_u * self.s_u + w.delta_t * self.s_t - w.lambda_c * self.c_r


@dataclass(frozen=True)
class RoutingDecision:
    chosen: Route
    utility: float
    components: dict[str, RouteComponents]
    excluded: tuple[tuple[str, str], ...]
    rationale: str
    weights: RoutingWeights
    context: RouteContext | None = None
    candidates: tuple[str, ...] = ()

    def recomputed_utility(self) -> float:
        return self.components[self.chosen.id].utility(self.weights)

    def retagged(self, rationale: str) -> RoutingDecision:
        return replace(self, rationale=rationale)

    def ledger_rows(self) -> list[dict]:
        rows = []
        for rid, comp in sorted(self.components.items()):
            rows.append({
                "route": rid, "s_m": comp.s_m, "s_u": comp.s_u, "s_t": comp.s_t, "c_r": comp.c_r,
                "utility": comp.utility(self.weights), "chosen": rid == self.chosen.id,
            })
        return rows

    def to_dict(self) -> dict:
        return {
            "chosen": self.chosen.id,
            "kind": self.chosen.kind.value,
            "backend": self.chosen.backend_id,
            "utility": self.utility,
            "rationale": self.rationale,
            "candidates": self.ledger_rows(),
            "excluded": [list(e) for e in self.excluded],
        }


class RouteRegistry:
    """Immutable route set; costs are scored relative to the most expensive route."""

    def __init__(self, routes: Iterable[Route]) -> None:
        self.routes: dict[str, Route] = {}
        for r in routes:
            if r.id in self.routes:
                raise ConfigError(f"duplicate route id {r.id}")
            self.routes[r.id] = r
        self.cost_scale = max((r.cost for r in self.routes.values()), default=1.0) or 1.0

    def __getitem__(self, route_id: str) -> Route:
        try:
            return self.routes[route_id]
        except KeyError:
            raise UnknownName(f"unknown route id {route_id!r}") from None

    def __iter__(self):
        return iter(self.routes.values())

    def __len__(self) -> int:
        return len(self.routes)

    def of_kind(self, *kinds: RouteKind) -> list[Route]:
        return [r for r in self.routes.values() if r.kind in kinds]

    def text_models(self) -> list[Route]:
        return [r for r in self.of_kind(RouteKind.EFFICIENT, RouteKind.PREMIUM) if not r.followup]


def supports(route: Route, components: frozenset[Modality]) -> bool:
    return components <= route.supported_modalities


def score_route(ctx: RouteContext, r: Route, w: RoutingWeights, cost_scale: float = 1.0) -> tuple[float, RouteComponents]:
    comp = RouteComponents(
        s_m=1.0 if supports(r, ctx.components) else 0.0,
        s_u=1.0 if ctx.policy.allows_tier(r.tier) else 0.0,
        s_t=r.affinity(ctx.category),
        c_r=r.cost / cost_scale if cost_scale > 0 else r.cost,
    )
    return comp.utility(w), comp


def exclusion_reason(ctx: RouteContext, r: Route) -> str | None:
    if not ctx.policy.allows_tier(r.tier):
        return "premium tier not permitted by policy"
    if not ctx.policy.within_budget(r.cost):
        return "route cost exceeds budget"
    return None


def select_route(
    ctx: RouteContext,
    candidates: Sequence[Route],
    w: RoutingWeights,
    cost_scale: float | None = None,
    rationale: str = "argmax",
) -> RoutingDecision:
    if not candidates:
        raise NoFeasibleRoute("no candidate routes")
    if cost_scale is None:
        cost_scale = max(r.cost for r in candidates) or 1.0
    excluded = []
    feasible = []
    for r in candidates:
        reason = exclusion_reason(ctx, r)
        if reason:
            excluded.append((r.id, reason))
        else:
            feasible.append(r)
    if not feasible:
        raise NoFeasibleRoute(f"all {len(candidates)} candidates excluded by policy", excluded)
    scored = {}
    for r in feasible:
        scored[r.id] = score_route(ctx, r, w, cost_scale)
    best = min(feasible, key=lambda r: (-scored[r.id][0], r.cost, r.id))
    return RoutingDecision(
        chosen=best,
        utility=scored[best.id][0],
        components={rid: comp for rid, (_, comp) in scored.items()},
        excluded=tuple(excluded),
        rationale=rationale,
        weights=w,
        context=ctx,
        candidates=tuple(r.id for r in candidates),
    )


def route_text(
    ctx: RouteContext,
    profile: ComplexityProfile | None,
    intent: IntentResult,
    tau: float,
    registry: RouteRegistry,
    w: RoutingWeights,
) -> RoutingDecision:
    """Text routing cases: efficient below tau, premium at/above tau or complex, cascade when unresolved."""
    scale = registry.cost_scale
    policy = ctx.policy
    if intent.is_followup or intent.category is TaskCategory.TEXT_MOE:
        routes = [r for r in registry if r.followup]
        return select_route(ctx, routes, w, scale, "followup")
    if intent.category is TaskCategory.IMAGE_GEN:
        routes = [r for r in registry.of_kind(RouteKind.PIPELINE) if r.output is Modality.IMAGE]
        return select_route(ctx, routes, w, scale, "image_gen")
    if intent.category is TaskCategory.AMBIGUOUS or intent.stage == "unresolved":
        return select_route(ctx, registry.of_kind(RouteKind.AGENT_CASCADE), w, scale, "cascade")
    score = profile.score if profile is not None else 0.0
    efficient = [r for r in registry.of_kind(RouteKind.EFFICIENT) if not r.followup]
    if intent.category is TaskCategory.COMPLEX or score >= tau:
        premium = registry.of_kind(RouteKind.PREMIUM)
        if policy.allows_tier(Tier.PREMIUM):
            return select_route(ctx, premium, w, scale, "premium")
        # strongest open substitute: quality match outranks price
        strongest = RoutingWeights.normalized(w.delta_m, w.delta_u, w.delta_t, 0.0)
        return select_route(ctx, efficient, strongest, scale, "premium_substitute")
    return select_route(ctx, efficient, w, scale, "efficient")


def nontext_candidates(registry: RouteRegistry) -> list[Route]:
    pipes = [r for r in registry.of_kind(RouteKind.PIPELINE) if r.output is Modality.TEXT]
    return pipes + registry.of_kind(RouteKind.COUPLET, RouteKind.AGENT_CASCADE)


def route_nontext(ctx: RouteContext, registry: RouteRegistry, w: RoutingWeights) -> RoutingDecision:
    """Modality dispatch for non-text and hybrid requests; complexity scoring is bypassed."""
    return select_route(ctx, nontext_candidates(registry), w, registry.cost_scale, "modality")
