"""Exception hierarchy shared by every engine stage."""

from __future__ import annotations


class RoutingEngineError(Exception):
    """Base class. ``stage`` names the pipeline stage that raised."""

    stage = "engine"


class ConfigError(RoutingEngineError, ValueError):
    stage = "config"


class UnknownName(RoutingEngineError, ValueError):
    """An enum serialization name outside the closed set."""

    stage = "parse"


class UnrecognizedAttachment(RoutingEngineError):
    stage = "intake"

    def __init__(self, attachment_id: str, filename: str = "") -> None:
        super().__init__(f"cannot determine modality of attachment {attachment_id} ({filename!r})")
        self.attachment_id = attachment_id
        self.filename = filename


class TranscriberFailure(RoutingEngineError):
    stage = "intake"

    def __init__(self, attachment_id: str, reason: str = "") -> None:
        super().__init__(f"transcription failed for {attachment_id}: {reason}")
        self.attachment_id = attachment_id


class EmptyText(RoutingEngineError, ValueError):
    stage = "complexity"


class NoFeasibleRoute(RoutingEngineError):
    stage = "route"

    def __init__(self, message: str, excluded: list[tuple[str, str]] | None = None) -> None:
        super().__init__(message)
        self.excluded = list(excluded or [])


class UnknownBackend(RoutingEngineError, KeyError):
    stage = "execute"


class BackendError(RoutingEngineError):
    """A backend call raised instead of returning a result."""

    stage = "execute"


class DecompositionEmpty(RoutingEngineError):
    stage = "decompose"


class NodeFailure(RoutingEngineError):
    stage = "execute"

    def __init__(self, node_id: str, partial: list | None = None, cause: Exception | None = None) -> None:
        super().__init__(f"agent node {node_id} failed after fallback: {cause}")
        self.node_id = node_id
        self.partial = list(partial or [])
        self.cause = cause


class EmptyOutputs(RoutingEngineError, ValueError):
    stage = "fuse"


class NoToolApplicable(RoutingEngineError):
    stage = "couplet"


class ToolFailure(RoutingEngineError):
    stage = "couplet"


class UnknownQuery(RoutingEngineError, KeyError):
    stage = "feedback"


class NoAlternativeRoute(RoutingEngineError):
    stage = "feedback"


class LengthMismatch(RoutingEngineError, ValueError):
    stage = "eval"


class CorpusError(RoutingEngineError, ValueError):
    stage = "eval"

    def __init__(self, index: int, message: str) -> None:
        super().__init__(f"record {index}: {message}")
        self.index = index


class BudgetInfeasible(UserWarning):
    """No threshold on the grid meets the cost budget; tau falls back to 1.0."""
