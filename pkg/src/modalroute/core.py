"""Domain vocabulary: enums, request types, and the hashed text embedding."""

from __future__ import annotations

import base64
import hashlib
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, TypeVar

import numpy as np

from .errors import UnknownName

EMBED_DIM = 256

_E = TypeVar("_E", bound="NamedEnum")
_TOKEN_SPLIT = re.compile(r"[^0-9a-z]+")


class NamedEnum(str, Enum):
    """String enum whose values are the canonical snake_case wire names."""

    @classmethod
    def parse(cls: type[_E], name: str) -> _E:
        try:
            return cls(name)
        except ValueError:
            raise UnknownName(f"{name!r} is not a valid {cls.__name__}") from None

    def __str__(self) -> str:
        return self.value


class Modality(NamedEnum):
    TEXT = "text"
    IMAGE = "image"
    AUDIO = "audio"
    VIDEO = "video"
    DOCUMENT = "document"
    MULTIMODAL = "multimodal"


class InputKind(NamedEnum):
    INDEPENDENT_TEXT = "independent_text"
    TEXT_WITH_ATTACHMENTS = "text_with_attachments"
    INDEPENDENT_ATTACHMENTS = "independent_attachments"
    AUDIO_RECORDING = "audio_recording"


class ExecutionCategory(NamedEnum):
    TEXT_ONLY = "text_only"
    NON_TEXT = "non_text"
    HYBRID = "hybrid"
    FOLLOW_UP = "follow_up"


class TaskCategory(NamedEnum):
    MATH = "math"
    CODING = "coding"
    SUMMARIZATION_WRITING = "summarization_writing"
    VISION = "vision"
    DOCUMENT = "document"
    IMAGE_GEN = "image_gen"
    AUDIO = "audio"
    VIDEO = "video"
    TEXT_MOE = "text_moe"
    OBJECT_DETECT = "object_detect"
    COMPLEX = "complex"
    AMBIGUOUS = "ambiguous"
    GENERAL = "general"


class PolicyMode(NamedEnum):
    OPEN_SOURCE_ONLY = "open_source_only"
    PREMIUM_ALLOWED = "premium_allowed"
    AUTO = "auto"


class Tier(NamedEnum):
    OPEN_SOURCE = "open_source"
    PREMIUM = "premium"
    TOOL = "tool"


@dataclass(frozen=True)
class UserPolicy:
    mode: PolicyMode = PolicyMode.AUTO
    cost_budget: float = 0.0
    unlimited: bool = True

    def __post_init__(self) -> None:
        if not self.unlimited and self.cost_budget < 0:
            raise ValueError("cost_budget must be non-negative")

    def allows_tier(self, tier: Tier) -> bool:
        return not (self.mode is PolicyMode.OPEN_SOURCE_ONLY and tier is Tier.PREMIUM)

    def within_budget(self, cost: float) -> bool:
        return self.unlimited or cost <= self.cost_budget

    def to_dict(self) -> dict[str, Any]:
        return {"mode": self.mode.value, "cost_budget": self.cost_budget, "unlimited": self.unlimited}

    @classmethod
    def from_dict(cls, data: dict[str, Any] | None) -> UserPolicy:
        if not data:
            return cls()
        return cls(
            mode=PolicyMode.parse(data.get("mode", "auto")),
            cost_budget=float(data.get("cost_budget", 0.0)),
            unlimited=bool(data.get("unlimited", True)),
        )


@dataclass(frozen=True)
class Attachment:
    filename: str
    content: bytes
    declared_mime: str = ""
    size_bytes: int = -1

    def __post_init__(self) -> None:
        if not self.filename:
            raise ValueError("attachment filename must be non-empty")
        if self.size_bytes < 0:
            object.__setattr__(self, "size_bytes", len(self.content))
        elif self.size_bytes != len(self.content):
            raise ValueError("size_bytes does not match content length")

    @property
    def digest(self) -> str:
        """sha256 of the content; the key for fixture annotations and transcripts."""
        return hashlib.sha256(self.content).hexdigest()

    def to_dict(self) -> dict[str, Any]:
        return {
            "filename": self.filename,
            "declared_mime": self.declared_mime,
            "content_b64": base64.b64encode(self.content).decode("ascii"),
            "size_bytes": self.size_bytes,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Attachment:
        content = base64.b64decode(data["content_b64"])
        return cls(
            filename=data["filename"],
            content=content,
            declared_mime=data.get("declared_mime", ""),
            size_bytes=int(data.get("size_bytes", len(content))),
        )


@dataclass(frozen=True)
class Query:
    id: str
    text: str = ""
    attachments: tuple[Attachment, ...] = ()
    session_id: str = "default"
    policy: UserPolicy = field(default_factory=UserPolicy)
    arrived_at: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "attachments", tuple(self.attachments))
        if not self.text.strip() and not self.attachments:
            raise ValueError(f"query {self.id}: needs text or at least one attachment")

    @property
    def has_text(self) -> bool:
        return bool(self.text.strip())

    def attachment_id(self, index: int) -> str:
        return f"{self.id}:{index}"

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "text": self.text,
            "attachments": [a.to_dict() for a in self.attachments],
            "session_id": self.session_id,
            "policy": self.policy.to_dict(),
            "arrived_at": self.arrived_at,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Query:
        return cls(
            id=str(data["id"]),
            text=data.get("text", ""),
            attachments=tuple(Attachment.from_dict(a) for a in data.get("attachments", [])),
            session_id=str(data.get("session_id", "default")),
            policy=UserPolicy.from_dict(data.get("policy")),
            arrived_at=int(data.get("arrived_at", 0)),
        )


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumerics."""
    return [t for t in _TOKEN_SPLIT.split(text.lower()) if t]


def hash64(token: str) -> int:
    return int.from_bytes(hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest(), "big")


def embed_tokens(tokens: list[str], dim: int = EMBED_DIM) -> np.ndarray:
    vec = np.zeros(dim, dtype=np.float64)
    for tok in tokens:
        h = hash64(tok)
        sign = 1.0 if (h >> 63) & 1 == 0 else -1.0
        vec[h % dim] += sign
    norm = math.sqrt(float(vec @ vec))
    if norm > 0:
        vec /= norm
    vec.flags.writeable = False
    return vec


STOPWORDS = frozenset(
    """a an the and or of to in on for with is are was be this that these those it its me my i you your
    can could would please what which who how do does from at by as about into than then so if""".split()
)


def content_tokens(text: str) -> list[str]:
    return [t for t in tokenize(text) if t not in STOPWORDS]


def embed_content(text: str, dim: int = EMBED_DIM) -> np.ndarray:
    """Like ``embed_text`` but over content tokens only, so function words do not dominate."""
    return embed_tokens(content_tokens(text), dim)


def embed_text(text: str, dim: int = EMBED_DIM) -> np.ndarray:
    """Feature-hashed bag of words, L2-normalized; the empty text maps to the zero vector.

    Bucket is the blake2b-64 hash modulo ``dim``; the sign comes from the hash's top bit.
    """
    return embed_tokens(tokenize(text), dim)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    na = math.sqrt(float(a @ a))
    nb = math.sqrt(float(b @ b))
    if na == 0 or nb == 0:
        return 0.0
    return max(-1.0, min(1.0, float(a @ b) / (na * nb)))


def normalize(vec: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(vec))
    out = vec / norm if norm > 0 else np.array(vec, dtype=np.float64)
    out.flags.writeable = False
    return out
