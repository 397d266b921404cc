import pytest
from hypothesis import given, strategies as st

from modalroute.core import Attachment, ExecutionCategory, InputKind, Modality, Query
from modalroute.errors import UnrecognizedAttachment
from modalroute.intake import FixtureTranscriber, IntakeTables, classify_intake, detect_attachment

WAV = b"RIFF\x24\x00\x00\x00WAVEfmt " + bytes(20)
PNG = b"\x89PNG\r\n\x1a\n" + bytes(16)


def test_tables_shape():
    t = IntakeTables.default()
    assert len(t.mime_rules) == 15
    assert len(t.magic) >= 10
    patterns = {r.pattern for r in t.mime_rules}
    for p in ("image/*", "audio/*", "video/*", "application/pdf", "text/*"):
        assert p in patterns


def test_dump_round_trips():
    t = IntakeTables.default()
    again = IntakeTables.from_config(t.dump())
    assert again.dump() == t.dump()


def test_duplicate_magic_rejected():
    d = IntakeTables.default().dump()
    d["magic"].append(list(d["magic"][0]))
    with pytest.raises(ValueError):
        IntakeTables.from_config(d)


@pytest.mark.parametrize("att, expected", [
    (Attachment("x", b"%PDF-1.4", "application/pdf"), (Modality.DOCUMENT, "mime")),
    (Attachment("clip.mp4", b"\x00" * 8), (Modality.VIDEO, "extension")),
    (Attachment("blob.bin", b"\xff\xd8\xff\xe0rest"), (Modality.IMAGE, "content")),
    (Attachment("upload.bin", WAV, "application/octet-stream"), (Modality.AUDIO, "content")),
    (Attachment("notes", "plain utf-8 text\n".encode()), (Modality.DOCUMENT, "content")),
])
def test_detection_tiers(att, expected):
    assert detect_attachment(att) == expected


def test_mime_tier_preempts_extension():
    # a PNG declared as image/png but named .mp4 resolves by MIME, never by suffix
    assert detect_attachment(Attachment("weird.mp4", PNG, "image/png")) == (Modality.IMAGE, "mime")


def test_unrecognized_attachment_is_an_error_not_a_crash():
    with pytest.raises(UnrecognizedAttachment):
        detect_attachment(Attachment("mystery", bytes([0x00, 0xFE, 0x81, 0x9C, 0xFF, 0x00])))


def test_four_way_rule():
    r = classify_intake(Query("a", "summarize this"))
    assert (r.modality, r.input_kind, r.execution_category) == (Modality.TEXT, InputKind.INDEPENDENT_TEXT, ExecutionCategory.TEXT_ONLY)
    r = classify_intake(Query("b", "", (Attachment("p.png", PNG, "image/png"),)))
    assert (r.modality, r.input_kind, r.execution_category) == (Modality.IMAGE, InputKind.INDEPENDENT_ATTACHMENTS, ExecutionCategory.NON_TEXT)


def test_text_pdf_wav_is_multimodal_hybrid_with_transcript():
    wav = Attachment("a.wav", WAV, "audio/wav")
    tr = FixtureTranscriber({wav.digest: "hello from the recording"})
    q = Query("c", "what do these say", (Attachment("d.pdf", b"%PDF-1.4 x", "application/pdf"), wav))
    r = classify_intake(q, tr)
    assert (r.modality, r.input_kind, r.execution_category) == (Modality.MULTIMODAL, InputKind.TEXT_WITH_ATTACHMENTS, ExecutionCategory.HYBRID)
    assert r.transcript == "hello from the recording"


def test_document_question_stays_document_hybrid():
    r = classify_intake(Query("d", "what is the total?", (Attachment("d.pdf", b"%PDF-1.4", "application/pdf"),)))
    assert r.modality is Modality.DOCUMENT
    assert r.execution_category is ExecutionCategory.HYBRID


def test_single_recording_is_audio_recording():
    wav = Attachment("a.wav", WAV, "audio/wav")
    r = classify_intake(Query("e", "", (wav,)), FixtureTranscriber({wav.digest: "hi"}))
    assert r.input_kind is InputKind.AUDIO_RECORDING


@given(st.binary(max_size=64), st.sampled_from(["", "image/png", "application/octet-stream", "text/plain"]))
def test_detection_is_deterministic(content, mime):
    a = Attachment("f.dat", content, mime)
    try:
        first = detect_attachment(a)
    except UnrecognizedAttachment:
        with pytest.raises(UnrecognizedAttachment):
            detect_attachment(a)
        return
    assert detect_attachment(a) == first


def test_every_corpus_attachment_resolves(corpus):
    tables = IntakeTables.default()
    n = 0
    for rec in corpus:
        for i, ref in enumerate(rec.attachments):
            m, _ = detect_attachment(ref.load(), tables, f"{rec.id}:{i}")
            assert m is rec.gold_attachments[i]
            n += 1
    assert n > 500
