import pytest
from hypothesis import given, settings, strategies as st

from modalroute.backends import (
    BackendPool, BackendRequest, BackendResult, BackendSpec, CostLedger, LatencyModel, summarize,
)
from modalroute.core import Modality, TaskCategory, Tier
from modalroute.errors import ConfigError, UnknownBackend


def spec(bid="b", q=0.8, cost=0.1, tier=Tier.OPEN_SOURCE):
    return BackendSpec(bid, tier, cost, LatencyModel(100, 10, 20), {TaskCategory.MATH: q})


def req(i, text="solve for x"):
    return BackendRequest(f"q{i}", "main", TaskCategory.MATH, text)


def test_spec_validation():
    with pytest.raises(ConfigError):
        spec(q=1.2)
    with pytest.raises(ConfigError):
        spec(cost=-1)


@pytest.mark.parametrize("q, expected", [(1.0, True), (0.0, False)])
def test_extreme_qualities(q, expected):
    pool = BackendPool([spec(q=q)], 3)
    assert all(pool.execute("b", req(i)).success is expected for i in range(200))


def test_success_rate_law_of_large_numbers():
    pool = BackendPool([spec(q=0.8)], 11)
    hits = sum(pool.execute("b", req(i)).success for i in range(10_000))
    assert hits / 10_000 == pytest.approx(0.8, abs=0.01)


def test_cost_charged_on_failure_too():
    pool = BackendPool([spec(q=0.0, cost=0.3)])
    r = pool.execute("b", req(0))
    assert not r.success and r.cost_charged == 0.3


def test_unknown_backend():
    with pytest.raises(UnknownBackend):
        BackendPool([spec()]).execute("nope", req(0))


def test_latency_model():
    pool = BackendPool([BackendSpec("b", Tier.OPEN_SOURCE, 0.1, LatencyModel(100, 10, 0), {})])
    r = pool.execute("b", req(0, "x" * 200))
    assert r.simulated_latency_ms == pytest.approx(120.0)


def test_empty_ledger_is_zero():
    snap = BackendPool([spec()]).ledger_report()
    assert snap.total_cost == 0 and snap.open.cost_share == 0 and snap.premium.query_share == 0


def test_paper_shape_shares():
    ledger = CostLedger()
    for i in range(72):
        ledger.record(f"o{i}", BackendResult("open", "", True, 0.05, 1.0, 1.0, Tier.OPEN_SOURCE))
    for i in range(28):
        ledger.record(f"p{i}", BackendResult("prem", "", True, 0.30, 1.0, 1.0, Tier.PREMIUM))
    snap = ledger.snapshot()
    assert snap.open.cost_share == pytest.approx(0.30)
    assert snap.open.query_share == pytest.approx(0.72)
    assert snap.open.cost_share + snap.premium.cost_share == pytest.approx(1.0)


@settings(max_examples=50)
@given(st.lists(st.tuples(st.sampled_from(["a", "b", "p"]), st.integers(0, 20)), max_size=60))
def test_ledger_conservation(calls):
    pool = BackendPool([spec("a", cost=0.05), spec("b", cost=0.2), spec("p", cost=1.0, tier=Tier.PREMIUM)], 5)
    for bid, qi in calls:
        pool.execute(bid, req(qi))
    snap = pool.ledger_report()
    replay = summarize(pool.ledger.log)
    assert snap.total_cost == pytest.approx(sum(r.cost for r in pool.ledger.log))
    assert snap.total_cost == pytest.approx(sum(snap.cost.values()))
    assert replay.cost == snap.cost and replay.calls == snap.calls
    assert sum(pool.ledger.cost_for(f"q{i}") for i in range(21)) == pytest.approx(snap.total_cost)


def test_determinism_across_pools():
    a = BackendPool([spec()], 9)
    b = BackendPool([spec()], 9)
    for i in range(50):
        assert a.execute("b", req(i)) == b.execute("b", req(i))


def test_bundled_premium_costs_dominate(config):
    open_max = max(b.cost_per_call for b in config.backends if b.tier is Tier.OPEN_SOURCE)
    for b in config.backends:
        if b.tier is Tier.PREMIUM:
            assert b.cost_per_call >= open_max
        assert all(0 <= p <= 1 for p in b.quality.values())


def test_remote_adapter_contract():
    import json
    import threading
    from http.server import BaseHTTPRequestHandler, HTTPServer

    from modalroute.backends import RemoteBackend

    class H(BaseHTTPRequestHandler):
        def do_POST(self):
            body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
            out = json.dumps({"payload": "echo " + body["text"], "success": True}).encode()
            self.send_response(200)
            self.send_header("Content-Length", str(len(out)))
            self.end_headers()
            self.wfile.write(out)

        def log_message(self, *a):
            pass

    srv = HTTPServer(("127.0.0.1", 0), H)
    threading.Thread(target=srv.serve_forever, daemon=True).start()
    try:
        s = spec("remote", cost=0.4)
        pool = BackendPool({"remote": RemoteBackend(s, f"http://127.0.0.1:{srv.server_address[1]}/")})
        r = pool.execute("remote", req(0, "hello"))
        assert r.payload == "echo hello" and r.cost_charged == 0.4
        assert 0.0 <= r.confidence <= 1.0 and r.simulated_latency_ms >= 0
    finally:
        srv.shutdown()
