"""Dataset construction and evaluation toolkit for language-based driving tasks."""

__version__ = "0.1.0"

from .model import (  # noqa: F401
    COMMANDS,
    DEFAULT_CATEGORIES,
    SURROUND,
    VIEWS,
    Box2D,
    Box3D,
    Frame,
    ObjectRecord,
    Prediction,
    ScoredBox2D,
    ScoredBox3D,
    Source,
    Task,
    TaskSample,
    ValidationError,
)
