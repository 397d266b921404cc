import numpy as np
import pytest

from modalroute.complexity import complexity
from modalroute.core import Modality, TaskCategory, embed_text
from modalroute.errors import EmptyText
from modalroute.intent import (
    CentroidIndex, IntentResult, IntentSettings, PriorInteraction, RuleCompositeClassifier, centroid_stage,
    classify_intent, detect_followup, keyword_stage, split_subtasks,
)


@pytest.fixture(scope="module")
def parts(config):
    return config.dicts, CentroidIndex.build(config.exemplars), RuleCompositeClassifier(config.dicts), config.intent


def classify(parts, text):
    dicts, index, clf, st = parts
    return classify_intent(text, complexity(text, dicts), None, index, clf, dicts, st)


def test_keyword_stage_examples(parts):
    dicts, _, _, st = parts
    cat, conf = keyword_stage("generate code to sort a list", dicts, st)
    assert cat is TaskCategory.CODING and conf >= st.theta_kw
    cat, conf = keyword_stage("solve integral of x^2", dicts, st)
    assert cat is TaskCategory.MATH and conf >= st.theta_kw
    assert keyword_stage("the afternoon was quiet and the garden smelled of rain", dicts, st) is None


def test_summarize_goes_through_keyword_stage(parts):
    r = classify(parts, "summarize this article: the council met on Tuesday and approved a new budget for parks.")
    assert (r.category, r.stage) == (TaskCategory.SUMMARIZATION_WRITING, "keyword")


def test_two_subtasks_is_complex(parts):
    r = classify(parts, "translate the report, then chart its totals")
    assert r.category is TaskCategory.COMPLEX
    assert split_subtasks("translate the report, then chart its totals") == ["translate the report", "chart its totals"]


def test_equidistant_text_is_ambiguous(parts):
    _, index, _, st = parts
    # the midpoint of two centroids sits at zero gap between them
    a, b = index.centroids[TaskCategory.MATH], index.centroids[TaskCategory.CODING]
    mid = (a + b) / np.linalg.norm(a + b)
    ranked = index.ranked(mid)
    assert abs(ranked[0][1] - ranked[1][1]) < st.centroid_gap
    r = classify(parts, "hmm, what about the other one")
    assert r.category is TaskCategory.AMBIGUOUS and r.stage == "unresolved"


def test_keyword_hit_preempts_centroid(parts):
    dicts, index, clf, st = parts
    text = "solve the integral of x squared"
    r = classify(parts, text)
    assert r.stage == "keyword"
    assert classify(parts, text) == r  # deterministic


def test_centroids_are_normalized(parts):
    _, index, _, _ = parts
    for c, v in index.centroids.items():
        assert np.linalg.norm(v) == pytest.approx(1.0)
        assert index.counts[c] >= 8
    assert TaskCategory.TEXT_MOE not in index.centroids


def test_unresolved_must_be_complex_or_ambiguous():
    with pytest.raises(ValueError):
        IntentResult(TaskCategory.MATH, 0.2, "unresolved")


def test_empty_text_rejected(parts):
    with pytest.raises(EmptyText):
        classify(parts, "   ")


def _prior(iid, modality, text, non_text=True):
    return PriorInteraction(iid, modality, non_text, embed_text(text))


def test_followup_examples():
    img = _prior("s:1", Modality.IMAGE, "Q: [image input] A: a red car parked by a tree")
    assert detect_followup("what color is the car in it?", [img]) == (True, "s:1")
    assert detect_followup("what color is the car?", []) == (False, None)
    audio = _prior("s:2", Modality.AUDIO, "Q: [audio input] A: the speaker reviews quarterly sales figures")
    assert detect_followup("write a haiku about rain", [audio]) == (False, None)


def test_followup_needs_prior_non_text():
    txt = _prior("s:1", Modality.TEXT, "Q: tell me about cars A: cars are vehicles", non_text=False)
    assert detect_followup("what about it?", [txt]) == (False, None)


def test_followup_never_fires_on_first_interaction_of_corpus_sessions(corpus):
    seen = set()
    for rec in corpus:
        if rec.session_id not in seen:
            seen.add(rec.session_id)
            assert rec.gold_execution.value != "follow_up"


def test_settings_defaults():
    st = IntentSettings()
    assert (st.theta_kw, st.centroid_gap, st.theta_fu) == (0.6, 0.05, 0.45)
