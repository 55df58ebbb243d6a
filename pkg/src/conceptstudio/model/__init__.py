"""Shared domain types: sketches, rasters, briefs, candidates, sessions."""

from conceptstudio.model.documents import (
    ConceptCandidate,
    DesignBrief,
    FunctionSolutionPair,
)
from conceptstudio.model.raster import (
    DEFAULT_CANVAS,
    RasterImage,
    SketchDocument,
    Stroke,
    draw_strokes,
    rasterize,
)
from conceptstudio.model.session import (
    TRANSITIONS,
    SessionEvent,
    SessionRecord,
    SessionState,
    legal_events,
    transition,
)

__all__ = [
    "DEFAULT_CANVAS",
    "TRANSITIONS",
    "ConceptCandidate",
    "DesignBrief",
    "FunctionSolutionPair",
    "RasterImage",
    "SessionEvent",
    "SessionRecord",
    "SessionState",
    "SketchDocument",
    "Stroke",
    "draw_strokes",
    "legal_events",
    "rasterize",
    "transition",
]
