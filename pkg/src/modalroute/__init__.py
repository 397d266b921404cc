"""Cost-aware routing of multimodal queries across open-source and premium model backends."""

from .config import EngineConfig, load_config
from .core import Attachment, ExecutionCategory, Modality, PolicyMode, Query, TaskCategory, Tier, UserPolicy
from .engine import Engine, EngineResponse
from .errors import RoutingEngineError

__version__ = "0.1.0"

__all__ = [
    "Attachment", "Engine", "EngineConfig", "EngineResponse", "ExecutionCategory", "Modality", "PolicyMode",
    "Query", "RoutingEngineError", "TaskCategory", "Tier", "UserPolicy", "load_config",
]
