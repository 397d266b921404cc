"""Local JSON-over-HTTP gateway exposing the engine's request and response shapes.

Endpoints:
    POST /v1/query     body: a Query dict (see ``Query.to_dict``); ``?explain=1`` adds the decision table
    POST /v1/feedback  body: {"query_id", "kind", "reported_problem"?, "timestamp"?}
    GET  /v1/ledger    per-backend call counts and cost shares
    GET  /v1/health
"""

from __future__ import annotations

import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

from .core import Query
from .engine import Engine
from .errors import RoutingEngineError
from .feedback import FeedbackEvent, FeedbackKind, FeedbackPolicy, ReportedProblem

logger = logging.getLogger(__name__)


class Gateway:
    def __init__(self, engine: Engine, feedback_log: str | None = None) -> None:
        self.engine = engine
        self.feedback = FeedbackPolicy(engine, feedback_log)

    def query(self, body: dict, explain: bool = False) -> dict:
        q = Query.from_dict(body)
        return self.engine.handle(q).to_dict(explain=explain)

    def submit_feedback(self, body: dict) -> dict:
        prob = body.get("reported_problem")
        ev = FeedbackEvent(str(body["query_id"]), FeedbackKind.parse(body["kind"]),
                           ReportedProblem.parse(prob) if prob else None, int(body.get("timestamp", 0)))
        rec = self.feedback.handle(ev)
        return {"adjustment": rec.to_dict(), "original": rec.original_response.to_dict() if rec.original_response else None,
                "retry": rec.retry_response.to_dict() if rec.retry_response else None}

    def ledger(self) -> dict:
        snap = self.engine.pool.ledger_report()
        return {"total_cost": snap.total_cost, "backends": snap.rows(),
                "open_cost_share": snap.open.cost_share, "premium_cost_share": snap.premium.cost_share}


def _handler(gw: Gateway):
    class Handler(BaseHTTPRequestHandler):
        def log_message(self, fmt, *args):  # route through logging instead of stderr
            logger.info("%s " + fmt, self.address_string(), *args)

        def _send(self, code: int, payload: dict) -> None:
            data = json.dumps(payload, sort_keys=True).encode("utf-8")
            self.send_response(code)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def do_GET(self):
            path = urlparse(self.path).path
            if path == "/v1/health":
                self._send(200, {"status": "ok"})
            elif path == "/v1/ledger":
                self._send(200, gw.ledger())
            else:
                self._send(404, {"error": "not found"})

        def do_POST(self):
            url = urlparse(self.path)
            try:
                n = int(self.headers.get("Content-Length", "0"))
                body = json.loads(self.rfile.read(n) or b"{}")
                if url.path == "/v1/query":
                    explain = parse_qs(url.query).get("explain", ["0"])[0] not in ("0", "", "false")
                    self._send(200, gw.query(body, explain))
                elif url.path == "/v1/feedback":
                    self._send(200, gw.submit_feedback(body))
                else:
                    self._send(404, {"error": "not found"})
            except RoutingEngineError as exc:
                self._send(422, {"error": str(exc), "stage": exc.stage, "type": type(exc).__name__})
            except (KeyError, ValueError, json.JSONDecodeError) as exc:
                self._send(400, {"error": f"bad request: {exc}"})

    return Handler


def make_server(gw: Gateway, host: str = "127.0.0.1", port: int = 8765) -> ThreadingHTTPServer:
    return ThreadingHTTPServer((host, port), _handler(gw))


def serve_in_thread(gw: Gateway, host: str = "127.0.0.1", port: int = 0) -> tuple[ThreadingHTTPServer, threading.Thread]:
    srv = make_server(gw, host, port)
    t = threading.Thread(target=srv.serve_forever, daemon=True)
    t.start()
    return srv, t
