"""Decompose, run a perception tool, then compose a user-facing answer."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Mapping, Protocol

from .backends import BackendPool, BackendRequest
from .core import Attachment, Modality, NamedEnum, TaskCategory
from .errors import NoToolApplicable, ToolFailure

logger = logging.getLogger(__name__)


class Tool(NamedEnum):
    OBJECT_DETECTOR = "object_detector"
    OCR = "ocr"
    SEMANTIC_TAGGER = "semantic_tagger"


# checked in order; the first tool with a matching phrase wins
DEFAULT_TOOL_KEYWORDS: list[tuple[Tool, tuple[str, ...]]] = [
    (Tool.OBJECT_DETECTOR, ("detect", "detection", "count", "how many", "find", "locate", "spot", "bounding box")),
    (Tool.OCR, ("read", "extract text", "ocr", "text in", "written", "transcribe the text")),
    (Tool.SEMANTIC_TAGGER, ("describe", "classify", "tag", "tags", "categorize", "caption")),
]

DEFAULT_PARAMETERS: dict[Tool, dict] = {
    Tool.OBJECT_DETECTOR: {"confidence_floor": 0.5},
    Tool.OCR: {},
    Tool.SEMANTIC_TAGGER: {"label_set": "default"},
}

REQUIRED_PARAMETERS = {
    Tool.OBJECT_DETECTOR: ("confidence_floor",),
    Tool.OCR: (),
    Tool.SEMANTIC_TAGGER: ("label_set",),
}


@dataclass(frozen=True)
class StructuredTask:
    tool: Tool
    parameters: Mapping[str, object]
    source_attachment_id: str

    def __post_init__(self) -> None:
        missing = [p for p in REQUIRED_PARAMETERS[self.tool] if p not in self.parameters]
        if missing:
            raise ValueError(f"{self.tool.value} task missing parameters {missing}")


@dataclass(frozen=True)
class ToolRecord:
    label: str
    score: float
    box: tuple[float, float, float, float] | None = None
    span: str | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"record score {self.score} outside [0,1]")

    @classmethod
    def from_dict(cls, d: dict) -> ToolRecord:
        box = tuple(d["box"]) if d.get("box") is not None else None
        return cls(str(d["label"]), float(d["score"]), box, d.get("span"))


@dataclass(frozen=True)
class ToolOutput:
    tool: Tool
    records: tuple[ToolRecord, ...]
    bounds: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        if self.bounds is None:
            return
        w, h = self.bounds
        for r in self.records:
            if r.box is not None:
                x0, y0, x1, y1 = r.box
                if not (0 <= x0 <= x1 <= w and 0 <= y0 <= y1 <= h):
                    raise ValueError(f"box {r.box} outside image bounds {self.bounds}")


def _phrase_hit(text: str, phrase: str) -> bool:
    return re.search(r"\b" + re.escape(phrase) + r"\b", text) is not None


def couplet_decompose(
    text: str,
    modality: Modality,
    attachment_id: str = "?",
    keywords: list[tuple[Tool, tuple[str, ...]]] | None = None,
    parameters: Mapping[Tool, dict] | None = None,
) -> StructuredTask:
    if modality not in (Modality.IMAGE, Modality.DOCUMENT):
        raise NoToolApplicable(f"couplet tools need an image or document, got {modality.value}")
    low = text.lower()
    params = parameters or DEFAULT_PARAMETERS
    for tool, phrases in keywords or DEFAULT_TOOL_KEYWORDS:
        if any(_phrase_hit(low, p) for p in phrases):
            return StructuredTask(tool, dict(params.get(tool, {})), attachment_id)
    raise NoToolApplicable(f"no perception tool matches {text[:60]!r}")


class PerceptionTool(Protocol):
    def run(self, task: StructuredTask, attachment: Attachment) -> ToolOutput: ...


class FixtureTool:
    """Reads annotations keyed by the attachment's sha256 digest."""

    def __init__(self, tool: Tool, annotations: Mapping[str, dict]) -> None:
        self.tool = tool
        self.annotations = annotations

    def run(self, task: StructuredTask, attachment: Attachment) -> ToolOutput:
        entry = self.annotations.get(attachment.digest)
        if entry is None or self.tool.value not in entry:
            raise ToolFailure(f"{self.tool.value}: no annotation for {attachment.filename}")
        records = [ToolRecord.from_dict(r) for r in entry[self.tool.value]]
        floor = task.parameters.get("confidence_floor")
        if floor is not None:
            records = [r for r in records if r.score >= float(floor)]
        bounds = tuple(entry["bounds"]) if entry.get("bounds") else None
        return ToolOutput(self.tool, tuple(records), bounds)


@dataclass
class ToolRegistry:
    tools: dict[Tool, PerceptionTool] = field(default_factory=dict)
    backend_ids: dict[Tool, str] = field(default_factory=dict)

    @classmethod
    def from_annotations(cls, annotations: Mapping[str, dict], backend_ids: Mapping[Tool, str] | None = None) -> ToolRegistry:
        return cls({t: FixtureTool(t, annotations) for t in Tool}, dict(backend_ids or {}))


def couplet_run(task: StructuredTask, registry: ToolRegistry, attachment: Attachment) -> ToolOutput:
    tool = registry.tools.get(task.tool)
    if tool is None:
        raise ToolFailure(f"tool {task.tool.value} not registered")
    try:
        return tool.run(task, attachment)
    except ToolFailure:
        raise
    except Exception as exc:
        raise ToolFailure(f"{task.tool.value} raised: {exc}") from exc


_NOUNS = {
    Tool.OBJECT_DETECTOR: ("object", "objects", "Detected"),
    Tool.OCR: ("text span", "text spans", "Extracted"),
    Tool.SEMANTIC_TAGGER: ("tag", "tags", "Assigned"),
}


def couplet_compose(task: StructuredTask, output: ToolOutput, text: str = "") -> tuple[str, float]:
    """Template rendering ordered by score; confidence is the mean record score."""
    records = sorted(output.records, key=lambda r: (-r.score, r.label))
    if not records:
        return "Nothing detected in the attachment.", 0.0
    singular, plural, verb = _NOUNS[output.tool]
    noun = singular if len(records) == 1 else plural
    if output.tool is Tool.OCR:
        items = ", ".join(f'"{r.span or r.label}" ({r.score:.2f})' for r in records)
    else:
        items = ", ".join(f"{r.label} ({r.score:.2f})" for r in records)
    confidence = sum(r.score for r in records) / len(records)
    return f"{verb} {len(records)} {noun}: {items}.", confidence


@dataclass(frozen=True)
class CoupletResult:
    response: str
    confidence: float
    task: StructuredTask
    output: ToolOutput
    latency_ms: float
    calls: int


class CoupletPipeline:
    """SLM decomposition and composition are charged as backend calls around the tool call."""

    def __init__(self, registry: ToolRegistry, slm_backend: str, keywords=None, parameters=None) -> None:
        self.registry = registry
        self.slm_backend = slm_backend
        self.keywords = keywords
        self.parameters = parameters

    def run(
        self, query_id: str, text: str, attachment: Attachment, modality: Modality, attachment_id: str,
        pool: BackendPool, key: str = "couplet",
    ) -> CoupletResult:
        cat = TaskCategory.OBJECT_DETECT
        plan = pool.execute(self.slm_backend, BackendRequest(query_id, f"{key}:decompose", cat, text, modality))
        task = couplet_decompose(text, modality, attachment_id, self.keywords, self.parameters)
        latency = plan.simulated_latency_ms
        calls = 1
        tool_backend = self.registry.backend_ids.get(task.tool)
        if tool_backend is not None:
            latency += pool.execute(tool_backend, BackendRequest(query_id, f"{key}:tool", cat, text, modality)).simulated_latency_ms
            calls += 1
        output = couplet_run(task, self.registry, attachment)
        response, confidence = couplet_compose(task, output, text)
        latency += pool.execute(self.slm_backend, BackendRequest(query_id, f"{key}:compose", cat, response)).simulated_latency_ms
        calls += 1
        logger.debug("couplet %s: %s -> %d records", query_id, task.tool.value, len(output.records))
        return CoupletResult(response, confidence, task, output, latency, calls)
