"""Event-sourced orchestration engine for autonomous research projects."""

from .config import LabConfig
from .model import EventKind, Mode, Stage
from .pipeline import ProjectEngine

__version__ = "0.1.0"

__all__ = ["LabConfig", "EventKind", "Mode", "Stage", "ProjectEngine", "__version__"]
