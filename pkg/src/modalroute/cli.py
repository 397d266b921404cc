"""Command-line entry point: ``modalroute <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .complexity import calibrate_tau, complexity
from .config import load_config
from .core import Attachment, PolicyMode, Query, UserPolicy
from .engine import Engine
from .errors import RoutingEngineError
from .intake import classify_intake


def _policy(args) -> UserPolicy:
    mode = PolicyMode.parse(getattr(args, "policy", "auto") or "auto")
    budget = getattr(args, "budget_per_query", None)
    return UserPolicy(mode, budget or 0.0, unlimited=budget is None)


def _query_from_args(args) -> Query:
    atts = []
    for spec in args.attach or []:
        path, _, mime = spec.partition("::")
        p = Path(path)
        atts.append(Attachment(p.name, p.read_bytes(), mime))
    return Query(id=args.id, text=args.text or "", attachments=tuple(atts), session_id=args.session,
                 policy=_policy(args))


def _config(args):
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True, default=str))


def cmd_classify(args) -> int:
    cfg = _config(args)
    if args.dump_tables:
        _emit(cfg.tables.dump())
        return 0
    engine = Engine(cfg)
    q = _query_from_args(args)
    intake = classify_intake(q, engine.transcriber, cfg.tables)
    out = {
        "modality": intake.modality.value, "input_kind": intake.input_kind.value,
        "execution_category": intake.execution_category.value,
        "attachments": [{"id": v.attachment_id, "modality": v.modality.value, "tier": v.tier} for v in intake.per_attachment],
    }
    if q.has_text and not q.attachments:
        prof = complexity(q, cfg.dicts, cfg.complexity)
        plan = engine.plan(q)
        out.update({
            "complexity": {"intent_align": prof.intent_align, "linguistic": prof.linguistic,
                           "structural": prof.structural, "score": prof.score, "class_dist": prof.class_dist,
                           "signals": sorted(prof.signals)},
            "intent": {"category": plan.intent.category.value, "confidence": plan.intent.confidence,
                       "stage": plan.intent.stage},
        })
    _emit(out)
    return 0


def cmd_route(args) -> int:
    engine = Engine(_config(args))
    plan = engine.plan(_query_from_args(args), args.route)
    _emit({"category": plan.category.value, "stages": list(plan.stages), **plan.decision.to_dict()})
    return 0


def _read_queries(path: str | None):
    fh = open(path, encoding="utf-8") if path and path != "-" else sys.stdin
    try:
        for line in fh:
            if line.strip():
                yield Query.from_dict(json.loads(line))
    finally:
        if fh is not sys.stdin:
            fh.close()


def cmd_run(args) -> int:
    engine = Engine(_config(args), memory_dir=args.memory_dir)
    out = open(args.output, "w", encoding="utf-8") if args.output else sys.stdout
    status = 0
    try:
        for q in _read_queries(args.input):
            try:
                resp = engine.handle(q, force_route=args.route)
                row = resp.to_dict(explain=args.explain)
            except RoutingEngineError as exc:
                row = {"query_id": q.id, "error": str(exc), "stage": exc.stage, "type": type(exc).__name__}
                status = 1
            out.write(json.dumps(row, sort_keys=True) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return status


def cmd_feedback(args) -> int:
    from .feedback import FeedbackEvent, FeedbackKind, FeedbackPolicy, ReportedProblem

    engine = Engine(_config(args))
    for q in _read_queries(args.queries):
        engine.handle(q, force_route=args.route if q.id == args.query_id else None)
    policy = FeedbackPolicy(engine, args.log)
    ev = FeedbackEvent(args.query_id, FeedbackKind.parse(args.kind),
                       ReportedProblem.parse(args.problem) if args.problem else None)
    try:
        rec = policy.handle(ev)
    except RoutingEngineError as exc:
        _emit({"query_id": args.query_id, "no_retry": str(exc), "type": type(exc).__name__})
        return 1
    _emit({"adjustment": rec.to_dict(), "original": rec.original_response.to_dict(),
           "retry": rec.retry_response.to_dict()})
    return 0


def cmd_eval(args) -> int:
    from .evaluation.corpus import CORPUS_PATH, load_corpus
    from .evaluation.harness import evaluate, write_reports

    cfg = _config(args)
    corpus = load_corpus(args.corpus or CORPUS_PATH)
    policy = UserPolicy(PolicyMode.parse(args.policy)) if args.policy else None
    report = evaluate(corpus, cfg, policy=policy)
    if args.out:
        write_reports(report, args.out)
    print(report.summary())
    return 0


def cmd_sweep(args) -> int:
    from .evaluation.corpus import CORPUS_PATH, VALIDATION_PATH, load_corpus, validation_items
    from .evaluation.harness import pareto_sweep, write_reports, evaluate

    cfg = _config(args)
    val = validation_items(load_corpus(args.validation or VALIDATION_PATH))
    budget = args.budget if args.budget is not None else 0.5 * len(val)
    th = calibrate_tau(val, budget, Engine(cfg), cfg.tau_step)
    print(f"calibrated tau={th.tau:.2f} accuracy={th.accuracy:.4f} cost={th.budget_used:.2f} "
          f"budget={budget:.2f} feasible={th.feasible}")
    taus = [float(x) for x in args.taus.split(",")]
    lams = [float(x) for x in args.lambdas.split(",")]
    corpus = load_corpus(args.corpus or CORPUS_PATH)
    rows = pareto_sweep(corpus, cfg, taus, lams)
    for r in rows:
        print(f"tau={r.tau:.2f} lambda_c={r.lambda_c:.2f} cost={r.cost:.2f} accuracy={r.accuracy:.4f}"
              f"{'  *' if r.optimal else ''}")
    if args.out:
        write_reports(evaluate(corpus, cfg), args.out, rows)
    return 0


def cmd_report(args) -> int:
    summary = Path(args.dir) / "summary.txt"
    if not summary.exists():
        from .evaluation.corpus import load_corpus
        from .evaluation.harness import evaluate, write_reports
        write_reports(evaluate(load_corpus(), _config(args)), args.dir)
    print(summary.read_text(encoding="utf-8"), end="")
    return 0


def cmd_serve(args) -> int:
    from .gateway import Gateway, make_server

    srv = make_server(Gateway(Engine(_config(args), memory_dir=args.memory_dir), args.feedback_log),
                      args.host, args.port)
    print(f"listening on http://{args.host}:{srv.server_address[1]}", flush=True)
    try:
        srv.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        srv.server_close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="modalroute", description=__doc__)
    ap.add_argument("--config", help="JSON file deep-merged over the defaults")
    ap.add_argument("--seed", type=int, help="run seed (overrides MODALROUTE_SEED and the config)")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def query_args(p):
        p.add_argument("--text", default="")
        p.add_argument("--attach", action="append", help="file path, optionally PATH::declared/mime")
        p.add_argument("--id", default="cli")
        p.add_argument("--session", default="cli")
        p.add_argument("--policy", default="auto", choices=[m.value for m in PolicyMode])
        p.add_argument("--budget-per-query", type=float)

    p = sub.add_parser("classify", help="intake, complexity and intent for one query")
    query_args(p)
    p.add_argument("--dump-tables", action="store_true", help="print the active detection tables")
    p.set_defaults(fn=cmd_classify)

    p = sub.add_parser("route", help="routing decision for one query, without execution")
    query_args(p)
    p.add_argument("--route", help="force a route id")
    p.set_defaults(fn=cmd_route)

    p = sub.add_parser("run", help="JSONL queries in, JSONL responses out")
    p.add_argument("--input", "-i", help="query JSONL (default stdin)")
    p.add_argument("--output", "-o")
    p.add_argument("--explain", action="store_true")
    p.add_argument("--route", help="force a route id for every query")
    p.add_argument("--memory-dir")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("feedback", help="replay queries, then apply one feedback event")
    p.add_argument("query_id")
    p.add_argument("kind", choices=["unsatisfactory", "routing_error"])
    p.add_argument("--problem", choices=["wrong_model", "wrong_modality", "missing_context"])
    p.add_argument("--queries", required=True, help="JSONL of the session's queries")
    p.add_argument("--route", help="force this route for the target query when replaying")
    p.add_argument("--log", default="feedback_log.jsonl", help="append-only adjustment log")
    p.set_defaults(fn=cmd_feedback)

    p = sub.add_parser("eval", help="evaluate the bundled (or given) corpus")
    p.add_argument("--corpus")
    p.add_argument("--policy", choices=[m.value for m in PolicyMode])
    p.add_argument("--out", help="directory for CSV reports")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("sweep", help="calibrate tau and run a (tau, lambda_c) Pareto sweep")
    p.add_argument("--validation")
    p.add_argument("--corpus")
    p.add_argument("--budget", type=float)
    p.add_argument("--taus", default="0.45,0.5,0.55,0.6,0.65")
    p.add_argument("--lambdas", default="0.05,0.1,0.15,0.2,0.25")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("report", help="print (and if needed generate) the report in a directory")
    p.add_argument("dir")
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("serve", help="run the local HTTP gateway")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--memory-dir")
    p.add_argument("--feedback-log")
    p.set_defaults(fn=cmd_serve)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except RoutingEngineError as exc:
        print(f"error [{exc.stage}]: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
