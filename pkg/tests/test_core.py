import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from modalroute.core import (
    Attachment, Modality, PolicyMode, Query, TaskCategory, Tier, UserPolicy, cosine, embed_text,
)
from modalroute.errors import UnknownName


def test_empty_text_embeds_to_zero():
    assert not embed_text("").any()


def test_repetition_does_not_change_direction():
    assert cosine(embed_text("abc abc"), embed_text("abc")) == pytest.approx(1.0, abs=1e-12)


def test_related_phrases_are_closer():
    a = embed_text("solve this integral")
    assert cosine(a, embed_text("compute the integral")) > cosine(a, embed_text("paint a sunset"))


def test_cosine_hand_values():
    v = np.array([0.3, -0.2, 0.9])
    assert cosine(v, v) == pytest.approx(1.0, abs=1e-9)
    assert cosine(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0
    assert cosine(np.array([0.6, 0.8]), np.array([1.0, 0.0])) == pytest.approx(0.6)
    assert cosine(np.zeros(3), v) == 0.0


@given(st.text(max_size=200))
def test_embedding_is_pure_and_unit_norm(text):
    a, b = embed_text(text), embed_text(text)
    assert a.tobytes() == b.tobytes()
    n = float(np.linalg.norm(a))
    assert n == 0.0 or math.isclose(n, 1.0, abs_tol=1e-6)


@given(
    st.text(min_size=1, max_size=80).filter(lambda s: s.strip()),
    st.lists(st.tuples(st.text(min_size=1, max_size=12), st.binary(max_size=64)), max_size=3),
)
def test_query_round_trip(text, atts):
    q = Query("q1", text, tuple(Attachment(n, c, "image/png") for n, c in atts), "s", UserPolicy(PolicyMode.OPEN_SOURCE_ONLY))
    back = Query.from_dict(q.to_dict())
    assert back == q
    assert [a.content for a in back.attachments] == [a.content for a in q.attachments]


def test_query_needs_content():
    with pytest.raises(ValueError):
        Query("q", "   ")


def test_attachment_invariants():
    with pytest.raises(ValueError):
        Attachment("", b"x")
    with pytest.raises(ValueError):
        Attachment("a.bin", b"xy", size_bytes=3)
    assert Attachment("a.bin", b"xy").size_bytes == 2


def test_policy_budget_invariant():
    with pytest.raises(ValueError):
        UserPolicy(PolicyMode.AUTO, -1.0, unlimited=False)
    assert not UserPolicy(PolicyMode.OPEN_SOURCE_ONLY).allows_tier(Tier.PREMIUM)


def test_enum_sets_are_closed():
    assert len(TaskCategory) == 13
    assert TaskCategory.parse("summarization_writing") is TaskCategory.SUMMARIZATION_WRITING
    for cls in (TaskCategory, Modality, PolicyMode):
        with pytest.raises(UnknownName):
            cls.parse("no_such_name")
