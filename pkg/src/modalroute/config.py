"""Configuration loading: defaults deep-merged with an optional JSON file, then validated."""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .agents import FusionSettings
from .backends import BackendSpec, LatencyModel
from .complexity import ComplexitySettings, ComplexityWeights, KeywordDictionary
from .core import Modality, TaskCategory, Tier
from .defaults import default_config
from .errors import ConfigError
from .intake import IntakeTables
from .intent import IntentSettings
from .memory import MemorySettings
from .routing import Route, RouteKind, RouteRegistry, RoutingWeights

logger = logging.getLogger(__name__)

DATA_DIR = Path(__file__).resolve().parent / "data"
SEED_ENV = "MODALROUTE_SEED"


def deep_merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = v
    return out


@dataclass
class EngineConfig:
    raw: dict
    seed: int
    tables: IntakeTables
    dicts: KeywordDictionary
    complexity: ComplexitySettings
    tau: float
    tau_step: float
    intent: IntentSettings
    weights: RoutingWeights
    backends: list[BackendSpec]
    registry: RouteRegistry
    fusion: FusionSettings
    memory: MemorySettings
    couplet: dict
    engine: dict
    feedback: dict
    eval: dict
    annotations: dict = field(default_factory=dict)
    transcripts: dict = field(default_factory=dict)
    exemplars: list[tuple[TaskCategory, str]] = field(default_factory=list)

    def backend(self, backend_id: str) -> BackendSpec:
        for b in self.backends:
            if b.id == backend_id:
                return b
        raise ConfigError(f"unknown backend {backend_id}")

    def with_tau(self, tau: float) -> EngineConfig:
        from dataclasses import replace
        return replace(self, tau=tau)


def _backend_spec(d: dict) -> BackendSpec:
    return BackendSpec(
        id=d["id"],
        tier=Tier.parse(d["tier"]),
        cost_per_call=float(d["cost_per_call"]),
        latency=LatencyModel(**d["latency"]),
        quality={TaskCategory.parse(k): float(v) for k, v in d.get("quality", {}).items()},
        supported_modalities=frozenset(Modality.parse(m) for m in d.get("supported_modalities", ["text"])),
        style=d.get("style", ""),
        default_quality=float(d.get("default_quality", 0.5)),
        confidence_noise=float(d.get("confidence_noise", 0.05)),
    )


def _route(d: dict) -> Route:
    return Route(
        id=d["id"],
        kind=RouteKind.parse(d["kind"]),
        backend_id=d["backend_id"],
        tier=Tier.parse(d["tier"]),
        supported_modalities=frozenset(Modality.parse(m) for m in d["supported_modalities"]),
        task_affinity={TaskCategory.parse(k): float(v) for k, v in d.get("task_affinity", {}).items()},
        cost=float(d["cost"]),
        modality=Modality.parse(d["modality"]) if d.get("modality") else None,
        output=Modality.parse(d.get("output", "text")),
        followup=bool(d.get("followup", False)),
    )


def _load_json(path: str | Path | None, fallback: str) -> Any:
    p = Path(path) if path else DATA_DIR / fallback
    if not p.exists():
        logger.warning("data file %s not found", p)
        return None
    with open(p, encoding="utf-8") as fh:
        if p.suffix == ".jsonl":
            return [json.loads(line) for line in fh if line.strip()]
        return json.load(fh)


def build_config(raw: dict) -> EngineConfig:
    try:
        cx = raw["complexity"]
        complexity = ComplexitySettings(
            weights=ComplexityWeights(cx["alpha"], cx["beta"], cx["gamma"]),
            k_sat=float(cx["k_sat"]),
            cuts=tuple(cx["cuts"]),
            sharpness=float(cx["sharpness"]),
            signal_weights=dict(cx["signal_weights"]),
        )
        it = dict(raw["intent"])
        anaphora = tuple(it.pop("anaphora", ()))
        intent = IntentSettings(**it, anaphora=anaphora)
        r = raw["routing"]
        weights = RoutingWeights(r["delta_m"], r["delta_u"], r["delta_t"], r["lambda_c"])
        backends = [_backend_spec(b) for b in raw["backends"]]
        registry = RouteRegistry(_route(x) for x in raw["routes"])
        mem = dict(raw["memory"])
        mem["thetas"] = tuple(mem["thetas"])
        memory = MemorySettings(**mem)
        fusion = FusionSettings(**raw["fusion"])
        tables = IntakeTables.from_config(raw["intake"])
        dicts = KeywordDictionary.from_config(raw["keywords"])
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid configuration: {exc}") from exc

    seed = int(os.environ.get(SEED_ENV, raw.get("seed", 0)))
    data = raw.get("data", {})
    annotations = _load_json(data.get("annotations"), "fixtures/annotations.json") or {}
    transcripts = _load_json(data.get("transcripts"), "fixtures/transcripts.json") or {}
    exemplar_rows = _load_json(data.get("exemplars"), "exemplars.jsonl") or []
    exemplars = [(TaskCategory.parse(e["category"]), e["text"]) for e in exemplar_rows]

    cfg = EngineConfig(
        raw=raw, seed=seed, tables=tables, dicts=dicts, complexity=complexity, tau=float(raw["complexity"]["tau"]),
        tau_step=float(raw["complexity"].get("tau_step", 0.01)), intent=intent, weights=weights,
        backends=backends, registry=registry, fusion=fusion, memory=memory, couplet=dict(raw["couplet"]),
        engine=dict(raw["engine"]), feedback=dict(raw.get("feedback", {})), eval=dict(raw.get("eval", {})),
        annotations=annotations, transcripts=transcripts, exemplars=exemplars,
    )
    validate(cfg)
    return cfg


def validate(cfg: EngineConfig) -> None:
    ids = {b.id for b in cfg.backends}
    if len(ids) != len(cfg.backends):
        raise ConfigError("duplicate backend ids")
    for route in cfg.registry:
        if route.backend_id not in ids:
            raise ConfigError(f"route {route.id} references unknown backend {route.backend_id}")
        spec = cfg.backend(route.backend_id)
        if route.kind is RouteKind.EFFICIENT and spec.tier is not Tier.OPEN_SOURCE:
            raise ConfigError(f"efficient route {route.id} must use an open-tier backend")
    for key in ("slm_backend",):
        if cfg.couplet.get(key) not in ids:
            raise ConfigError(f"couplet {key} references unknown backend")
    for tool, b in cfg.couplet.get("tool_backends", {}).items():
        if b not in ids:
            raise ConfigError(f"couplet tool {tool} references unknown backend {b}")
    ap = cfg.engine.get("always_premium_backend")
    if ap not in ids:
        raise ConfigError(f"always-premium backend {ap} unknown")
    open_max = max((b.cost_per_call for b in cfg.backends if b.tier is not Tier.PREMIUM), default=0.0)
    for b in cfg.backends:
        if b.tier is Tier.PREMIUM and b.cost_per_call < open_max:
            raise ConfigError(f"premium backend {b.id} is cheaper than the open-tier maximum")


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> EngineConfig:
    raw = default_config()
    if path:
        with open(path, encoding="utf-8") as fh:
            raw = deep_merge(raw, json.load(fh))
    if overrides:
        raw = deep_merge(raw, overrides)
    return build_config(raw)
