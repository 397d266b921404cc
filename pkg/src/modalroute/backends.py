"""Simulated model backends, an HTTP adapter, and the thread-safe cost ledger."""

from __future__ import annotations

import hashlib
import json
import logging
import random
import threading
import time
import urllib.request
from dataclasses import dataclass, field
from typing import Mapping, Protocol

from .core import STOPWORDS, Modality, TaskCategory, Tier, content_tokens
from .errors import BackendError, ConfigError, UnknownBackend

logger = logging.getLogger(__name__)



@dataclass(frozen=True)
class LatencyModel:
    fixed_ms: float
    per_100_chars_ms: float = 0.0
    jitter_ms: float = 0.0

    def sample(self, input_chars: int, rng: random.Random) -> float:
        return self.fixed_ms + self.per_100_chars_ms * input_chars / 100.0 + rng.uniform(0.0, self.jitter_ms)


@dataclass(frozen=True)
class BackendSpec:
    id: str
    tier: Tier
    cost_per_call: float
    latency: LatencyModel
    quality: Mapping[TaskCategory, float]
    supported_modalities: frozenset[Modality] = frozenset({Modality.TEXT})
    style: str = ""
    default_quality: float = 0.5
    confidence_noise: float = 0.05

    def __post_init__(self) -> None:
        if self.cost_per_call < 0:
            raise ConfigError(f"backend {self.id}: negative cost")
        for cat, p in self.quality.items():
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"backend {self.id}: quality[{cat}] = {p} outside [0,1]")

    def quality_for(self, category: TaskCategory) -> float:
        return float(self.quality.get(category, self.default_quality))


@dataclass(frozen=True)
class BackendRequest:
    query_id: str
    call_key: str
    category: TaskCategory
    text: str
    modality: Modality = Modality.TEXT
    context: str = ""  # memory slice / upstream outputs; counts toward input size only

    @property
    def input_chars(self) -> int:
        return len(self.text) + len(self.context)

    def to_dict(self) -> dict:
        return {
            "query_id": self.query_id, "call_key": self.call_key, "category": self.category.value,
            "text": self.text, "modality": self.modality.value, "context": self.context,
        }


@dataclass(frozen=True)
class BackendResult:
    backend_id: str
    payload: str
    success: bool
    cost_charged: float
    simulated_latency_ms: float
    confidence: float
    tier: Tier = Tier.OPEN_SOURCE


@dataclass(frozen=True)
class CallRecord:
    seq: int
    query_id: str
    backend_id: str
    tier: Tier
    cost: float
    latency_ms: float
    success: bool


def derive_seed(run_seed: int, *parts: str) -> int:
    h = hashlib.blake2b(digest_size=8)
    h.update(str(run_seed).encode())
    for p in parts:
        h.update(b"\x1f")
        h.update(p.encode("utf-8"))
    return int.from_bytes(h.digest(), "big")


def answer_body(text: str, limit: int = 24) -> str:
    """The shared content of any backend's answer: the request's content terms in order."""
    terms = content_tokens(text)
    return " ".join(terms[:limit]) if terms else "no content"


class Backend(Protocol):
    spec: BackendSpec

    def run(self, request: BackendRequest, rng: random.Random) -> BackendResult: ...


class SimulatedBackend:
    def __init__(self, spec: BackendSpec) -> None:
        self.spec = spec

    def run(self, request: BackendRequest, rng: random.Random) -> BackendResult:
        q = self.spec.quality_for(request.category)
        success = rng.random() < q
        latency = self.spec.latency.sample(request.input_chars, rng)
        noise = rng.uniform(-self.spec.confidence_noise, self.spec.confidence_noise)
        confidence = min(1.0, max(0.0, q + noise))
        body = answer_body(request.text)
        if not success:
            words = body.split()
            body = " ".join(words[: max(1, len(words) // 2)]) + " (uncertain draft)"
        payload = f"{self.spec.style} {body}".strip()
        return BackendResult(self.spec.id, payload, success, self.spec.cost_per_call, latency, confidence, self.spec.tier)


class RemoteBackend:
    """JSON-over-HTTP adapter. The remote returns {"payload": ..., "success"?: bool, "confidence"?: float}."""

    def __init__(self, spec: BackendSpec, url: str, timeout_s: float = 10.0, default_confidence: float = 0.5) -> None:
        self.spec = spec
        self.url = url
        self.timeout_s = timeout_s
        self.default_confidence = default_confidence

    def run(self, request: BackendRequest, rng: random.Random) -> BackendResult:
        body = json.dumps({"backend": self.spec.id, **request.to_dict()}).encode("utf-8")
        req = urllib.request.Request(self.url, data=body, headers={"Content-Type": "application/json"})
        start = time.perf_counter()
        try:
            with urllib.request.urlopen(req, timeout=self.timeout_s) as resp:
                data = json.loads(resp.read().decode("utf-8"))
        except Exception as exc:
            raise BackendError(f"remote backend {self.spec.id} failed: {exc}") from exc
        elapsed = (time.perf_counter() - start) * 1000.0
        conf = float(data.get("confidence", self.default_confidence))
        return BackendResult(
            self.spec.id, str(data.get("payload", "")), bool(data.get("success", True)),
            self.spec.cost_per_call, elapsed, min(1.0, max(0.0, conf)), self.spec.tier,
        )


@dataclass
class TierShare:
    queries: int = 0
    calls: int = 0
    cost: float = 0.0
    query_share: float = 0.0
    cost_share: float = 0.0


@dataclass
class LedgerSnapshot:
    calls: dict[str, int] = field(default_factory=dict)
    cost: dict[str, float] = field(default_factory=dict)
    tiers: dict[str, Tier] = field(default_factory=dict)
    total_cost: float = 0.0
    open: TierShare = field(default_factory=TierShare)
    premium: TierShare = field(default_factory=TierShare)

    def cost_share(self, backend_id: str) -> float:
        return self.cost.get(backend_id, 0.0) / self.total_cost if self.total_cost else 0.0

    def rows(self) -> list[dict]:
        return [
            {"backend_id": b, "tier": self.tiers[b].value, "calls": self.calls[b], "cost": self.cost[b],
             "cost_share": self.cost_share(b)}
            for b in sorted(self.calls)
        ]


class CostLedger:
    """Append-only call log; every aggregate is derived from it."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._log: list[CallRecord] = []
        self._by_query: dict[str, list[CallRecord]] = {}

    def record(self, query_id: str, result: BackendResult) -> CallRecord:
        with self._lock:
            rec = CallRecord(len(self._log), query_id, result.backend_id, result.tier, result.cost_charged,
                             result.simulated_latency_ms, result.success)
            self._log.append(rec)
            self._by_query.setdefault(query_id, []).append(rec)
            return rec

    @property
    def log(self) -> tuple[CallRecord, ...]:
        with self._lock:
            return tuple(self._log)

    def cost_for(self, query_id: str) -> float:
        return sum(r.cost for r in self.calls_for(query_id))

    def calls_for(self, query_id: str) -> list[CallRecord]:
        with self._lock:
            return list(self._by_query.get(query_id, ()))

    def snapshot(self) -> LedgerSnapshot:
        return summarize(self.log)


def summarize(log: tuple[CallRecord, ...] | list[CallRecord]) -> LedgerSnapshot:
    snap = LedgerSnapshot()
    premium_queries: set[str] = set()
    all_queries: set[str] = set()
    for r in log:
        snap.calls[r.backend_id] = snap.calls.get(r.backend_id, 0) + 1
        snap.cost[r.backend_id] = snap.cost.get(r.backend_id, 0.0) + r.cost
        snap.tiers[r.backend_id] = r.tier
        snap.total_cost += r.cost
        all_queries.add(r.query_id)
        side = snap.premium if r.tier is Tier.PREMIUM else snap.open
        side.calls += 1
        side.cost += r.cost
        if r.tier is Tier.PREMIUM:
            premium_queries.add(r.query_id)
    snap.premium.queries = len(premium_queries)
    snap.open.queries = len(all_queries) - len(premium_queries)
    n = len(all_queries)
    for side in (snap.open, snap.premium):
        side.query_share = side.queries / n if n else 0.0
        side.cost_share = side.cost / snap.total_cost if snap.total_cost else 0.0
    return snap


class BackendPool:
    def __init__(self, backends: Mapping[str, Backend] | list[BackendSpec], run_seed: int = 0,
                 ledger: CostLedger | None = None) -> None:
        if isinstance(backends, list):
            backends = {s.id: SimulatedBackend(s) for s in backends}
        self.backends: dict[str, Backend] = dict(backends)
        self.run_seed = run_seed
        self.ledger = ledger or CostLedger()

    def spec(self, backend_id: str) -> BackendSpec:
        try:
            return self.backends[backend_id].spec
        except KeyError:
            raise UnknownBackend(backend_id) from None

    def __contains__(self, backend_id: str) -> bool:
        return backend_id in self.backends

    def execute(self, backend_id: str, request: BackendRequest, seed: int | None = None) -> BackendResult:
        if backend_id not in self.backends:
            raise UnknownBackend(backend_id)
        seed = self.run_seed if seed is None else seed
        rng = random.Random(derive_seed(seed, request.query_id, request.call_key, backend_id))
        result = self.backends[backend_id].run(request, rng)
        self.ledger.record(request.query_id, result)
        logger.debug("%s -> %s success=%s cost=%.3f", request.call_key, backend_id, result.success, result.cost_charged)
        return result

    def ledger_report(self) -> LedgerSnapshot:
        return self.ledger.snapshot()

    def fresh(self, run_seed: int | None = None) -> BackendPool:
        """Same backends, empty ledger."""
        return BackendPool(self.backends, self.run_seed if run_seed is None else run_seed)
