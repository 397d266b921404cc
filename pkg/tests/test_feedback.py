import json

import pytest

from modalroute.core import Modality, PolicyMode, TaskCategory, Tier, UserPolicy
from modalroute.engine import Engine
from modalroute.errors import ConfigError, NoAlternativeRoute, UnknownQuery
from modalroute.evaluation.corpus import CorpusRecord
from modalroute.feedback import (
    FeedbackEvent, FeedbackKind, FeedbackPolicy, ReportedProblem, adjustment_digest,
)
from modalroute.routing import RouteKind

K = FeedbackKind
P = ReportedProblem


def pdf_record(corpus):
    return next(r for r in corpus if r.gold_route == "pipeline:document" and r.attachments[0].filename.endswith(".pdf"))


def test_routing_error_needs_problem():
    with pytest.raises(ConfigError):
        FeedbackEvent("q", K.ROUTING_ERROR)


def test_wrong_modality_reroutes_to_document_pipeline(config, corpus, tmp_path):
    eng = Engine(config)
    rec = pdf_record(corpus)
    orig = eng.handle(rec.query(), force_route="pipe:image")
    log = tmp_path / "fb.jsonl"
    pol = FeedbackPolicy(eng, log)
    adj = pol.handle(FeedbackEvent(rec.id, K.ROUTING_ERROR, P.WRONG_MODALITY))
    assert adj.original.chosen.id == "pipe:image"
    assert adj.retry.chosen.id == "pipe:document"
    assert adj.original.context == adj.retry.context and adj.query_id == orig.query_id
    assert adj.quality_differential == pytest.approx(adj.retry_confidence - adj.original_confidence)
    rows = [json.loads(l) for l in log.read_text().splitlines()]
    assert rows[0]["type"] == "misroute" and rows[0]["model"] == "llava-sim" and rows[0]["modality"] == "document"
    assert rows[1]["type"] == "adjustment"
    assert pol.misroutes[0].subtask is TaskCategory.DOCUMENT


def _efficient_record(corpus):
    return next(r for r in corpus if r.gold_route == "efficient" and r.gold_category is TaskCategory.MATH)


def test_unsatisfactory_efficient_falls_back_to_premium(config, corpus):
    eng = Engine(config)
    rec = _efficient_record(corpus)
    orig = eng.handle(rec.query())
    assert orig.decision.chosen.kind is RouteKind.EFFICIENT
    adj = FeedbackPolicy(eng).handle(FeedbackEvent(rec.id, K.UNSATISFACTORY))
    assert adj.retry.chosen.kind is RouteKind.PREMIUM
    assert adj.retry_response.cost_charged == pytest.approx(adj.retry.chosen.cost)


def test_open_source_only_strongest_already_has_no_alternative(config, corpus, tmp_path):
    from dataclasses import replace
    eng = Engine(config)
    rec = replace(_efficient_record(corpus), policy=UserPolicy(PolicyMode.OPEN_SOURCE_ONLY))
    q = rec.query()
    first = eng.handle(q)
    assert first.decision.chosen.id == "eff:math"
    log = tmp_path / "fb.jsonl"
    pol = FeedbackPolicy(eng, log)
    with pytest.raises(NoAlternativeRoute):
        pol.handle(FeedbackEvent(rec.id, K.UNSATISFACTORY))
    assert len(pol.no_retry) == 1 and pol.records == []
    assert json.loads(log.read_text().splitlines()[-1])["type"] == "no_retry"


def test_open_source_only_never_retries_premium(config, corpus):
    from dataclasses import replace
    eng = Engine(config)
    pol = FeedbackPolicy(eng)
    oso = UserPolicy(PolicyMode.OPEN_SOURCE_ONLY)
    recs = [replace(r, policy=oso) for r in corpus if not r.attachments][:80]
    outcomes = 0
    for r in recs:
        resp = eng.handle(r.query())
        for ev in (FeedbackEvent(r.id, K.UNSATISFACTORY), FeedbackEvent(r.id, K.ROUTING_ERROR, P.WRONG_MODEL)):
            n_before = len(pol.records) + len(pol.no_retry)
            try:
                adj = pol.handle(ev)
                assert adj.retry.chosen.tier is not Tier.PREMIUM
                if ev.kind is K.ROUTING_ERROR:
                    assert adj.retry.chosen.id != resp.route_id
            except NoAlternativeRoute:
                pass
            # exactly one record or one logged no-retry reason per event
            assert len(pol.records) + len(pol.no_retry) == n_before + 1
            outcomes += 1
    assert outcomes == 2 * len(recs)


def test_reroute_never_picks_excluded_route_over_corpus(config, corpus):
    eng = Engine(config)
    pol = FeedbackPolicy(eng)
    for r in corpus[::7]:
        resp = eng.handle(r.query())
        if resp.refused:
            continue
        try:
            adj = pol.handle(FeedbackEvent(r.id, K.ROUTING_ERROR, P.WRONG_MODEL))
        except NoAlternativeRoute:
            continue
        assert adj.retry.chosen.id != resp.route_id


def test_unknown_query(config):
    with pytest.raises(UnknownQuery):
        FeedbackPolicy(Engine(config)).handle(FeedbackEvent("ghost", K.UNSATISFACTORY))


def test_digest_examples():
    assert adjustment_digest([]) == []
    events = [(FeedbackEvent(f"d{i}", K.ROUTING_ERROR, P.WRONG_MODALITY), TaskCategory.DOCUMENT, "pipe:image") for i in range(10)]
    rows = adjustment_digest(events)
    assert len(rows) == 1 and rows[0].rate == 1.0 and rows[0].flagged


def test_digest_matches_hand_tally():
    ev = lambda k: FeedbackEvent("x", k, P.WRONG_MODEL if k is K.ROUTING_ERROR else None)
    log = (
        [(ev(K.ROUTING_ERROR), TaskCategory.MATH, "eff:math")] * 3
        + [(ev(K.UNSATISFACTORY), TaskCategory.MATH, "eff:math")] * 5
        + [(ev(K.ROUTING_ERROR), TaskCategory.VISION, "couplet")] * 2
        + [(ev(K.UNSATISFACTORY), TaskCategory.CODING, "eff:coding")]
    )
    tally = {}
    for e, cat, route in log:
        t = tally.setdefault((cat.value, route), [0, 0])
        t[0] += 1
        t[1] += e.kind is K.ROUTING_ERROR
    rows = adjustment_digest(log, flag_rate=0.5)
    assert {(r.category.value, r.route_id): [r.events, r.misroutes] for r in rows} == tally
    assert {(r.category.value, r.route_id) for r in rows if r.flagged} == {("vision", "couplet")}
