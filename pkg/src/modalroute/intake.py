"""Attachment detection and the modality / input-kind / execution-category decision."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Protocol

from .core import Attachment, ExecutionCategory, InputKind, Modality, Query
from .errors import TranscriberFailure, UnrecognizedAttachment

logger = logging.getLogger(__name__)

DEFER = "defer"

# (pattern, modality-or-defer, note). Patterns ending in "*" match by prefix.
DEFAULT_MIME_RULES: list[tuple[str, str, str]] = [
    ("application/pdf", "document", "portable document"),
    ("application/msword", "document", "legacy word processor"),
    ("application/vnd.openxmlformats-officedocument.*", "document", "docx / xlsx / pptx"),
    ("application/vnd.ms-*", "document", "legacy excel / powerpoint"),
    ("application/zip", "document", "archives are treated as document bundles"),
    ("application/json", "document", "structured data"),
    ("application/octet-stream", DEFER, "opaque bytes, go straight to content sniffing"),
    ("text/csv", "document", "tabular text"),
    ("text/*", "document", "any other text"),
    ("image/png", "image", "png"),
    ("image/*", "image", "any other image"),
    ("audio/wav", "audio", "pcm wave"),
    ("audio/*", "audio", "any other audio"),
    ("video/mp4", "video", "mp4"),
    ("video/*", "video", "any other video"),
]

# None marks an ambiguous suffix (container used for both audio and video).
DEFAULT_EXTENSIONS: dict[str, str | None] = {
    ".png": "image", ".jpg": "image", ".jpeg": "image", ".gif": "image", ".bmp": "image",
    ".webp": "image", ".tif": "image", ".tiff": "image",
    ".wav": "audio", ".mp3": "audio", ".flac": "audio", ".m4a": "audio", ".aac": "audio",
    ".mp4": "video", ".mov": "video", ".avi": "video", ".mkv": "video",
    ".pdf": "document", ".doc": "document", ".docx": "document", ".txt": "document",
    ".md": "document", ".csv": "document", ".json": "document", ".xlsx": "document",
    ".pptx": "document", ".rtf": "document", ".html": "document",
    ".ogg": None, ".webm": None,
}

# (hex signature, offset, modality). Longer signatures are tried first.
DEFAULT_MAGIC: list[tuple[str, int, str]] = [
    ("ffd8ff", 0, "image"),                 # jpeg
    ("89504e470d0a1a0a", 0, "image"),       # png
    ("474946383761", 0, "image"),           # GIF87a
    ("474946383961", 0, "image"),           # GIF89a
    ("57454250", 8, "image"),               # RIFF....WEBP
    ("255044462d", 0, "document"),          # %PDF-
    ("504b0304", 0, "document"),            # zip / office open xml
    ("57415645", 8, "audio"),               # RIFF....WAVE
    ("494433", 0, "audio"),                 # ID3-tagged mp3
    ("fffb", 0, "audio"),                   # mp3 frame sync
    ("fff3", 0, "audio"),
    ("4f676753", 0, "audio"),               # OggS
    ("664c6143", 0, "audio"),               # fLaC
    ("667479704d3441", 4, "audio"),         # ftypM4A
    ("66747970", 4, "video"),               # ftyp (mp4 / mov)
    ("41564920", 8, "video"),               # RIFF....AVI
    ("1a45dfa3", 0, "video"),               # matroska / webm
]


@dataclass(frozen=True)
class MimeRule:
    pattern: str
    target: str
    note: str = ""

    def matches(self, mime: str) -> bool:
        if self.pattern.endswith("*"):
            return mime.startswith(self.pattern[:-1])
        return mime == self.pattern


@dataclass(frozen=True)
class MagicEntry:
    signature: bytes
    offset: int
    modality: Modality

    def matches(self, content: bytes) -> bool:
        return content[self.offset:self.offset + len(self.signature)] == self.signature


@dataclass(frozen=True)
class IntakeTables:
    mime_rules: tuple[MimeRule, ...]
    extensions: dict[str, Modality | None]
    magic: tuple[MagicEntry, ...]

    def __post_init__(self) -> None:
        if len(self.mime_rules) != 15:
            raise ValueError(f"MIME table must have exactly 15 rules, got {len(self.mime_rules)}")
        keys = [(m.signature, m.offset) for m in self.magic]
        if len(set(keys)) != len(keys):
            raise ValueError("duplicate (signature, offset) in magic table")
        if any(not m.signature for m in self.magic):
            raise ValueError("empty magic signature")

    @classmethod
    def from_config(cls, section: dict) -> IntakeTables:
        rules = tuple(MimeRule(p, t, n) for p, t, n in section["mime_rules"])
        ext = {k: (Modality.parse(v) if v else None) for k, v in section["extensions"].items()}
        magic = [MagicEntry(bytes.fromhex(sig), int(off), Modality.parse(mod)) for sig, off, mod in section["magic"]]
        magic.sort(key=lambda m: -len(m.signature))
        return cls(rules, ext, tuple(magic))

    @classmethod
    def default(cls) -> IntakeTables:
        return cls.from_config(
            {"mime_rules": DEFAULT_MIME_RULES, "extensions": DEFAULT_EXTENSIONS, "magic": DEFAULT_MAGIC}
        )

    def dump(self) -> dict:
        return {
            "mime_rules": [[r.pattern, r.target, r.note] for r in self.mime_rules],
            "extensions": {k: (v.value if v else None) for k, v in self.extensions.items()},
            "magic": [[m.signature.hex(), m.offset, m.modality.value] for m in self.magic],
        }


class AudioTranscriber(Protocol):
    def transcribe(self, attachment: Attachment) -> str: ...


class FixtureTranscriber:
    """Looks transcripts up by attachment content digest. Pure and deterministic."""

    def __init__(self, transcripts: dict[str, str] | None = None) -> None:
        self.transcripts = dict(transcripts or {})

    def transcribe(self, attachment: Attachment) -> str:
        try:
            return self.transcripts[attachment.digest]
        except KeyError:
            raise LookupError(f"no transcript fixture for {attachment.filename}") from None


@dataclass(frozen=True)
class AttachmentVerdict:
    attachment_id: str
    modality: Modality
    tier: str  # "mime" | "extension" | "content"


@dataclass(frozen=True)
class IntakeResult:
    modality: Modality
    input_kind: InputKind
    execution_category: ExecutionCategory
    per_attachment: tuple[AttachmentVerdict, ...] = ()
    transcript: str | None = None
    # Base modalities present (text counted when the query carries text).
    components: frozenset[Modality] = field(default_factory=frozenset)

    @property
    def attachment_modalities(self) -> frozenset[Modality]:
        return frozenset(v.modality for v in self.per_attachment)

    def with_category(self, category: ExecutionCategory) -> IntakeResult:
        return IntakeResult(
            self.modality, self.input_kind, category, self.per_attachment, self.transcript, self.components
        )


def _strip_mime(mime: str) -> str:
    return mime.split(";", 1)[0].strip().lower()


def _looks_like_text(content: bytes) -> bool:
    if not content or b"\x00" in content:
        return False
    try:
        content.decode("utf-8")
    except UnicodeDecodeError:
        return False
    return True


def detect_attachment(
    a: Attachment, tables: IntakeTables | None = None, attachment_id: str = "?"
) -> tuple[Modality, str]:
    """Three-tier detection: declared MIME, then filename suffix, then content bytes."""
    tables = tables or _DEFAULT_TABLES
    logger.debug("attachment %s: %d bytes", attachment_id, a.size_bytes)
    mime = _strip_mime(a.declared_mime)
    skip_extension = False
    if mime:
        for rule in tables.mime_rules:
            if rule.matches(mime):
                if rule.target == DEFER:
                    skip_extension = True
                    break
                return Modality.parse(rule.target), "mime"

    if not skip_extension:
        dot = a.filename.rfind(".")
        if dot > 0:
            found = tables.extensions.get(a.filename[dot:].lower())
            if found is not None:
                return found, "extension"

    for entry in tables.magic:
        if entry.matches(a.content):
            return entry.modality, "content"
    if _looks_like_text(a.content):
        return Modality.DOCUMENT, "content"
    raise UnrecognizedAttachment(attachment_id, a.filename)


def classify_intake(
    q: Query, transcriber: AudioTranscriber | None = None, tables: IntakeTables | None = None
) -> IntakeResult:
    tables = tables or _DEFAULT_TABLES
    verdicts = []
    for i, att in enumerate(q.attachments):
        aid = q.attachment_id(i)
        modality, tier = detect_attachment(att, tables, aid)
        verdicts.append(AttachmentVerdict(aid, modality, tier))

    has_text = q.has_text
    modalities = {v.modality for v in verdicts}
    if not verdicts:
        kind = InputKind.INDEPENDENT_TEXT
    elif has_text:
        kind = InputKind.TEXT_WITH_ATTACHMENTS
    elif len(verdicts) == 1 and verdicts[0].modality is Modality.AUDIO:
        kind = InputKind.AUDIO_RECORDING
    else:
        kind = InputKind.INDEPENDENT_ATTACHMENTS

    if not verdicts:
        modality = Modality.TEXT
    elif len(modalities) > 1:
        modality = Modality.MULTIMODAL
    else:
        (only,) = modalities
        modality = Modality.MULTIMODAL if has_text and only is not Modality.DOCUMENT else only

    if not verdicts:
        category = ExecutionCategory.TEXT_ONLY
    elif has_text:
        category = ExecutionCategory.HYBRID
    else:
        category = ExecutionCategory.NON_TEXT

    transcript = None
    audio = [(v.attachment_id, att) for v, att in zip(verdicts, q.attachments) if v.modality is Modality.AUDIO]
    if audio:
        if transcriber is None:
            raise TranscriberFailure(audio[0][0], "no transcriber configured")
        parts = []
        for aid, att in audio:
            try:
                parts.append(transcriber.transcribe(att))
            except TranscriberFailure:
                raise
            except Exception as exc:
                raise TranscriberFailure(aid, str(exc)) from exc
        transcript = " ".join(parts)

    components = set(modalities)
    if has_text:
        components.add(Modality.TEXT)
    return IntakeResult(modality, kind, category, tuple(verdicts), transcript, frozenset(components))


_DEFAULT_TABLES = IntakeTables.default()
