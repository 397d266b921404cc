"""Corpus evaluation: routing and classification metrics, cost and latency accounting, similarity, sweeps."""

from __future__ import annotations

import csv
import heapq
import io
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

from ..backends import BackendPool, summarize
from ..config import EngineConfig, deep_merge, build_config
from ..core import ExecutionCategory, Modality, TaskCategory, Tier, UserPolicy
from ..engine import Engine, EngineResponse, always_premium
from ..routing import RoutingWeights
from .corpus import CorpusRecord
from .metrics import accuracy, cohens_kappa, macro_prf, pareto_mask, similarity_report

logger = logging.getLogger(__name__)

CATEGORIES = tuple(TaskCategory)
ATTACHMENT_MODALITIES = (Modality.IMAGE, Modality.AUDIO, Modality.VIDEO, Modality.DOCUMENT)


@dataclass
class RecordOutcome:
    record: CorpusRecord
    response: EngineResponse
    predicted_route: str
    predicted_category: TaskCategory | None
    predicted_attachments: tuple[Modality | None, ...]
    premium: bool


@dataclass
class EvalReport:
    n: int
    seed: int
    coarse_accuracy: float
    category_accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    per_class: list[dict]
    attachment_precision: float
    attachment_recall: float
    followup_accuracy: float
    followup_n: int
    kappa: float
    open_query_share: float
    premium_query_share: float
    open_cost_share: float
    premium_cost_share: float
    total_cost: float
    ap_total_cost: float
    relative_cost: float
    ap_premium_cost_share: float
    premium_backend_share: float
    mean_latency_ms: float
    ap_mean_latency_ms: float
    latency_by_modality: dict[str, float]
    ap_latency_by_modality: dict[str, float]
    throughput_qps: float
    ap_throughput_qps: float
    mean_tfidf: float
    mean_embedding: float
    similarity_fraction: float
    similarity_n: int
    refused: int
    backend_rows: list[dict] = field(default_factory=list)
    route_counts: dict[str, int] = field(default_factory=dict)

    def metric_rows(self) -> list[tuple[str, float]]:
        keys = [
            "n", "coarse_accuracy", "category_accuracy", "macro_precision", "macro_recall", "macro_f1",
            "attachment_precision", "attachment_recall", "followup_accuracy", "kappa", "open_query_share",
            "premium_query_share", "open_cost_share", "premium_cost_share", "total_cost", "ap_total_cost",
            "relative_cost", "ap_premium_cost_share", "premium_backend_share", "mean_latency_ms",
            "ap_mean_latency_ms", "throughput_qps", "ap_throughput_qps", "mean_tfidf", "mean_embedding",
            "similarity_fraction", "refused",
        ]
        return [(k, getattr(self, k)) for k in keys]

    def summary(self) -> str:
        lines = [f"records: {self.n} (seed {self.seed})"]
        for k, v in self.metric_rows()[1:]:
            lines.append(f"{k:>22}: {v:.4f}" if isinstance(v, float) else f"{k:>22}: {v}")
        lines.append("latency by modality (routed / always-premium, ms):")
        for m in sorted(self.latency_by_modality):
            lines.append(f"{m:>22}: {self.latency_by_modality[m]:.1f} / {self.ap_latency_by_modality.get(m, 0.0):.1f}")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return asdict(self)


def make_engine(config: EngineConfig, seed: int | None = None, tau: float | None = None) -> Engine:
    if seed is not None and seed != config.seed:
        from dataclasses import replace
        config = replace(config, seed=seed)
    return Engine(config, tau=tau)


def simulated_makespan(durations: Sequence[float], premium: Sequence[bool], width: int, premium_limit: int) -> float:
    """List scheduling in submission order: a job starts when a worker is free and, if it calls a
    premium backend, when one of ``premium_limit`` premium slots is free as well."""
    if not durations:
        return 0.0
    workers = [0.0] * max(1, width)
    heapq.heapify(workers)
    pslots = [0.0] * max(1, premium_limit)
    heapq.heapify(pslots)
    end = 0.0
    for d, p in zip(durations, premium):
        start = heapq.heappop(workers)
        if p:
            start = max(start, heapq.heappop(pslots))
            heapq.heappush(pslots, start + d)
        finish = start + d
        heapq.heappush(workers, finish)
        end = max(end, finish)
    return end


def run_corpus(engine: Engine, corpus: Sequence[CorpusRecord], policy: UserPolicy | None = None) -> list[RecordOutcome]:
    out = []
    for rec in corpus:
        q = rec.query(policy=policy)
        resp = engine.handle(q)
        entry = engine.state.decisions.get(resp.query_id)
        if entry is not None and entry.plan is not None:
            by_id = {v.attachment_id: v.modality for v in entry.plan.intake.per_attachment}
        else:
            by_id = {}
        preds = tuple(by_id.get(q.attachment_id(i)) for i in range(len(q.attachments)))
        calls = engine.pool.ledger.calls_for(resp.query_id)
        out.append(RecordOutcome(rec, resp, resp.route_label, resp.category, preds,
                                 any(c.tier is Tier.PREMIUM for c in calls)))
    return out


def _mean(xs: Sequence[float]) -> float:
    return sum(xs) / len(xs) if xs else 0.0


def _group_mean(pairs) -> dict[str, float]:
    groups: dict[str, list[float]] = {}
    for k, v in pairs:
        groups.setdefault(k, []).append(v)
    return {k: _mean(v) for k, v in sorted(groups.items())}


def attachment_pr(outcomes: Sequence[RecordOutcome]) -> tuple[float, float]:
    """Macro precision and recall of per-attachment modality detection over the four attachment classes."""
    gold, pred = [], []
    for o in outcomes:
        for g, p in zip(o.record.gold_attachments, o.predicted_attachments):
            gold.append(g)
            pred.append(p)
    if not gold:
        return 1.0, 1.0
    present = [m for m in ATTACHMENT_MODALITIES if m in gold or m in pred]
    scores = macro_prf(pred, gold, present)
    return scores.precision, scores.recall


def followup_stats(outcomes: Sequence[RecordOutcome]) -> tuple[float, int]:
    """Accuracy of the follow-up decision (and its target) over text records that have session history."""
    seen: set[str] = set()
    correct = total = 0
    for o in outcomes:
        rec = o.record
        has_history = rec.session_id in seen
        seen.add(rec.session_id)
        if not has_history or rec.attachments:
            continue
        total += 1
        fired = o.response.execution_category is ExecutionCategory.FOLLOW_UP
        gold = rec.followup_target is not None
        if fired == gold and (not gold or o.response.followup_target == rec.followup_target):
            correct += 1
    return (correct / total if total else 1.0), total


def similarity_subset(outcomes: Sequence[RecordOutcome]) -> list[int]:
    return [i for i, o in enumerate(outcomes)
            if not o.record.attachments and o.record.gold_category is not TaskCategory.IMAGE_GEN
            and not o.response.refused]


def evaluate(corpus: Sequence[CorpusRecord], config: EngineConfig, seed: int | None = None,
             policy: UserPolicy | None = None, tau: float | None = None) -> EvalReport:
    seed = config.seed if seed is None else seed
    engine = make_engine(config, seed, tau)
    outcomes = run_corpus(engine, corpus, policy)
    report, _ = assemble(engine, corpus, outcomes, seed)
    return report


def always_premium_replay(engine: Engine, corpus: Sequence[CorpusRecord]) -> tuple[BackendPool, list[tuple[str, float, float]]]:
    pool = engine.pool.fresh(engine.pool.run_seed)
    rows = [always_premium(engine, rec.query(), pool) for rec in corpus]
    return pool, rows


def assemble(engine: Engine, corpus: Sequence[CorpusRecord], outcomes: list[RecordOutcome],
             seed: int) -> tuple[EvalReport, dict]:
    ev = engine.config.eval
    width = int(ev.get("concurrency", 8))
    plimit = int(ev.get("premium_rate_limit", 4))

    gold_route = [o.record.gold_route for o in outcomes]
    pred_route = [o.predicted_route for o in outcomes]
    gold_cat = [o.record.gold_category for o in outcomes]
    pred_cat = [o.predicted_category for o in outcomes]
    macro = macro_prf(pred_cat, gold_cat, CATEGORIES)
    att_p, att_r = attachment_pr(outcomes)
    fu_acc, fu_n = followup_stats(outcomes)
    ann = [o.record.annotators for o in outcomes if o.record.annotators]
    kappa = cohens_kappa([a for a, _ in ann], [b for _, b in ann]) if ann else 1.0

    snap = engine.pool.ledger_report()
    ap_pool, ap_rows = always_premium_replay(engine, corpus)
    ap_snap = ap_pool.ledger_report()
    ap_backend = engine.config.engine["always_premium_backend"]

    lat = [o.response.latency_ms for o in outcomes]
    ap_lat = [r[2] for r in ap_rows]
    gm = [o.record.gold_modality.value for o in outcomes]
    makespan = simulated_makespan(lat, [o.premium for o in outcomes], width, plimit)
    ap_makespan = simulated_makespan(ap_lat, [True] * len(ap_lat), width, plimit)

    idx = similarity_subset(outcomes)
    sim = similarity_report([outcomes[i].response.payload for i in idx], [ap_rows[i][0] for i in idx])

    route_counts: dict[str, int] = {}
    for o in outcomes:
        rid = o.response.route_id or "refused"
        route_counts[rid] = route_counts.get(rid, 0) + 1

    report = EvalReport(
        n=len(outcomes), seed=seed,
        coarse_accuracy=accuracy(pred_route, gold_route),
        category_accuracy=accuracy(pred_cat, gold_cat),
        macro_precision=macro.precision, macro_recall=macro.recall, macro_f1=macro.f1,
        per_class=[{"category": c.label.value, "precision": c.precision, "recall": c.recall, "f1": c.f1,
                    "support": c.support} for c in macro.per_class],
        attachment_precision=att_p, attachment_recall=att_r,
        followup_accuracy=fu_acc, followup_n=fu_n, kappa=kappa,
        open_query_share=snap.open.query_share, premium_query_share=snap.premium.query_share,
        open_cost_share=snap.open.cost_share, premium_cost_share=snap.premium.cost_share,
        total_cost=snap.total_cost, ap_total_cost=ap_snap.total_cost,
        relative_cost=snap.total_cost / ap_snap.total_cost if ap_snap.total_cost else 0.0,
        ap_premium_cost_share=ap_snap.premium.cost_share,
        premium_backend_share=snap.cost_share(ap_backend),
        mean_latency_ms=_mean(lat), ap_mean_latency_ms=_mean(ap_lat),
        latency_by_modality=_group_mean(zip(gm, lat)), ap_latency_by_modality=_group_mean(zip(gm, ap_lat)),
        throughput_qps=len(lat) / (makespan / 1000.0) if makespan else 0.0,
        ap_throughput_qps=len(ap_lat) / (ap_makespan / 1000.0) if ap_makespan else 0.0,
        mean_tfidf=sim.mean_tfidf, mean_embedding=sim.mean_embedding, similarity_fraction=sim.fraction_above,
        similarity_n=sim.n, refused=sum(o.response.refused for o in outcomes),
        backend_rows=snap.rows(), route_counts=dict(sorted(route_counts.items())),
    )
    return report, {"snapshot": snap, "ap_snapshot": ap_snap, "outcomes": outcomes}


def evaluate_seeds(corpus: Sequence[CorpusRecord], config: EngineConfig, seeds: Sequence[int]) -> tuple[list[EvalReport], list[dict]]:
    """One report per seed plus a min/max interval per metric."""
    reports = [evaluate(corpus, config, s) for s in seeds]
    rows = []
    for k, _ in reports[0].metric_rows():
        vals = [getattr(r, k) for r in reports]
        rows.append({"metric": k, "min": min(vals), "max": max(vals), "mean": sum(vals) / len(vals)})
    return reports, rows


# ---------------------------------------------------------------- sweeps

@dataclass(frozen=True)
class SweepRow:
    tau: float
    lambda_c: float
    cost: float
    accuracy: float
    optimal: bool = False


def pareto_sweep(corpus: Sequence[CorpusRecord], config: EngineConfig, taus: Sequence[float],
                 lambdas: Sequence[float]) -> list[SweepRow]:
    """Evaluate each (tau, lambda_c) grid point on coarse accuracy and routed cost; mark the Pareto set."""
    if not taus or not lambdas:
        raise ValueError("sweep grids must be non-empty")
    base = config.weights
    points = []
    for tau in taus:
        for lam in lambdas:
            w = RoutingWeights.normalized(base.delta_m, base.delta_u, base.delta_t, lam)
            raw = deep_merge(config.raw, {"routing": {"delta_m": w.delta_m, "delta_u": w.delta_u,
                                                      "delta_t": w.delta_t, "lambda_c": w.lambda_c},
                                          "complexity": {"tau": tau}})
            cfg = build_config(raw)
            from dataclasses import replace
            cfg = replace(cfg, seed=config.seed, annotations=config.annotations, transcripts=config.transcripts,
                          exemplars=config.exemplars)
            engine = Engine(cfg)
            outs = run_corpus(engine, corpus)
            acc = accuracy([o.predicted_route for o in outs], [o.record.gold_route for o in outs])
            points.append((tau, lam, engine.pool.ledger.snapshot().total_cost, acc))
    mask = pareto_mask([(c, a) for _, _, c, a in points])
    return [SweepRow(t, l, c, a, m) for (t, l, c, a), m in zip(points, mask)]


# ---------------------------------------------------------------- reports

def _csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    if rows:
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (f"{v:.10g}" if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def report_tables(report: EvalReport, sweep: Sequence[SweepRow] | None = None) -> dict[str, str]:
    tables = {
        "metrics.csv": _csv([{"metric": k, "value": v} for k, v in report.metric_rows()]),
        "per_class.csv": _csv(report.per_class),
        "cost_breakdown.csv": _csv(report.backend_rows),
        "latency.csv": _csv([{"modality": m, "routed_ms": v, "always_premium_ms": report.ap_latency_by_modality.get(m, 0.0)}
                             for m, v in report.latency_by_modality.items()]),
        "routes.csv": _csv([{"route": k, "count": v} for k, v in report.route_counts.items()]),
        "summary.txt": report.summary() + "\n",
    }
    if sweep is not None:
        tables["pareto.csv"] = _csv([asdict(r) for r in sweep])
    return tables


def write_reports(report: EvalReport, outdir: str | Path, sweep: Sequence[SweepRow] | None = None) -> list[Path]:
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, body in report_tables(report, sweep).items():
        p = out / name
        p.write_text(body, encoding="utf-8")
        paths.append(p)
    return paths
