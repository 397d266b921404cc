import json
import urllib.error
import urllib.request

import pytest

from modalroute.core import Query
from modalroute.engine import Engine
from modalroute.gateway import Gateway, serve_in_thread


@pytest.fixture
def server(config, tmp_path):
    gw = Gateway(Engine(config), tmp_path / "fb.jsonl")
    srv, _ = serve_in_thread(gw)
    yield f"http://127.0.0.1:{srv.server_address[1]}", gw
    srv.shutdown()
    srv.server_close()


def call(url, body=None):
    data = None if body is None else json.dumps(body).encode()
    req = urllib.request.Request(url, data=data, headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(req, timeout=10) as resp:
            return resp.status, json.loads(resp.read())
    except urllib.error.HTTPError as exc:
        return exc.code, json.loads(exc.read())


def test_health(server):
    base, _ = server
    assert call(base + "/v1/health") == (200, {"status": "ok"})


def test_query_feedback_and_ledger(server, corpus):
    base, gw = server
    rec = next(r for r in corpus if r.gold_route == "efficient")
    code, out = call(base + "/v1/query?explain=1", rec.query().to_dict())
    assert code == 200 and out["query_id"] == rec.id and out["decision"]["chosen"] == out["route"]
    code, fb = call(base + "/v1/feedback", {"query_id": rec.id, "kind": "unsatisfactory"})
    assert code == 200 and fb["adjustment"]["original_route"] == out["route"]
    code, led = call(base + "/v1/ledger")
    assert code == 200
    assert led["total_cost"] == pytest.approx(sum(b["cost"] for b in led["backends"]))
    assert led["total_cost"] == pytest.approx(out["cost_charged"] + fb["retry"]["cost_charged"])


def test_same_shapes_as_engine(server, config):
    base, _ = server
    q = Query("same", "explain recursion with a short example")
    code, out = call(base + "/v1/query", q.to_dict())
    assert out == Engine(config).handle(q).to_dict()


def test_errors(server):
    base, _ = server
    assert call(base + "/v1/query", {"text": "no id"})[0] == 400
    code, body = call(base + "/v1/feedback", {"query_id": "ghost", "kind": "unsatisfactory"})
    assert code == 422 and body["type"] == "UnknownQuery"
    assert call(base + "/v1/nope", {})[0] == 404
