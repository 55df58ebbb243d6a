"""Exception hierarchy shared across the package.

Provider failures are deliberately split into distinct classes so callers can
react differently: a timeout is retryable, a content-policy rejection is not,
and a malformed response should surface the raw text for the audit trail.
"""

from __future__ import annotations


class ConceptStudioError(Exception):
    """Base class for every error raised by this package."""


# --- domain model ---------------------------------------------------------

class EmptySketch(ConceptStudioError):
    """A sketch document with no strokes cannot be rasterized."""


class InvalidTransition(ConceptStudioError):
    """An event that is illegal in the session's current state."""

    def __init__(self, state: str, event: str) -> None:
        super().__init__(f"event {event!r} is illegal in state {state!r}")
        self.state = state
        self.event = event


class PreconditionError(ConceptStudioError, ValueError):
    """An operation was called with arguments violating its contract."""


# --- provider gateway -----------------------------------------------------

class ProviderError(ConceptStudioError):
    """Base class for failures surfaced by provider adapters."""


class Timeout(ProviderError):
    """The provider did not answer within the configured deadline."""


class RateLimited(ProviderError):
    """The provider refused the request due to rate limiting."""


class ContentPolicyRejection(ProviderError):
    """The provider refused to produce the requested content."""


class MalformedResponse(ProviderError):
    """The provider answered, but not in a shape this pipeline can parse."""

    def __init__(self, message: str, raw_text: str | None = None) -> None:
        super().__init__(message)
        self.raw_text = raw_text


class MissingPlaceholder(ConceptStudioError, KeyError):
    """A prompt template was rendered without binding every placeholder."""


class UnknownTemplate(ConceptStudioError, KeyError):
    """No template registered under the requested id."""


# --- generation / extraction ----------------------------------------------

class ExtractionEmpty(ConceptStudioError):
    """The provider text contained no parseable function-solution lines."""


class GenerationFailed(ConceptStudioError):
    """No concept candidate survived generation."""


# --- segmentation ----------------------------------------------------------

class DatasetTooSmall(ConceptStudioError):
    """Fewer items than the split ratio can meaningfully divide."""


class TrainingDiverged(ConceptStudioError):
    """The training loss became non-finite."""


class SegmentationEmpty(ConceptStudioError):
    """Segmentation produced no non-background component."""


class WeightsUnavailable(ConceptStudioError):
    """Pretrained encoder weights were requested but cannot be loaded."""


# --- function mapping -------------------------------------------------------

class PaletteExhausted(ConceptStudioError):
    """More component regions than distinct overlay colors."""


# --- session service ---------------------------------------------------------

class UnknownSession(ConceptStudioError, KeyError):
    """No session stored under the requested id."""


class IllegalState(ConceptStudioError):
    """The request is not legal in the session's current state."""

    def __init__(self, message: str, state: str | None = None) -> None:
        super().__init__(message)
        self.state = state


class EditInFlight(IllegalState):
    """A second edit was submitted while one is still pending."""
