"""Brief, function-solution pairs, and concept candidates.

These are immutable value types; "mutation" (accepting an edit, refining a
brief) produces a new instance. That keeps them trivially safe to share
across the service's worker threads.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from conceptstudio.errors import PreconditionError
from conceptstudio.model.raster import RasterImage


@dataclass(frozen=True)
class DesignBrief:
    """What the user asked for: raw transcript plus the refined description."""

    transcript: str
    refined_description: str = ""
    category: str = ""

    def refined(self, description: str, category: str | None = None) -> "DesignBrief":
        if not description:
            raise PreconditionError("refined description must be nonempty")
        return replace(
            self,
            refined_description=description,
            category=self.category if category is None else category,
        )

    def to_dict(self) -> dict:
        return {
            "transcript": self.transcript,
            "refined_description": self.refined_description,
            "category": self.category,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DesignBrief":
        return cls(
            transcript=data.get("transcript", ""),
            refined_description=data.get("refined_description", ""),
            category=data.get("category", ""),
        )


@dataclass(frozen=True)
class FunctionSolutionPair:
    """A design function and its current realization, e.g. wheel size / 19 inches."""

    function: str
    solution: str

    def __post_init__(self) -> None:
        if not self.function.strip():
            raise PreconditionError("function must be nonempty")
        if not self.solution.strip():
            raise PreconditionError("solution must be nonempty")

    def to_dict(self) -> dict:
        return {"function": self.function, "solution": self.solution}

    @classmethod
    def from_dict(cls, data: dict) -> "FunctionSolutionPair":
        return cls(function=data["function"], solution=data["solution"])


@dataclass(frozen=True)
class ConceptCandidate:
    """A generated concept image with its brief and extracted pairs.

    ``version`` starts at 1 and increments by exactly 1 per accepted edit;
    the editor enforces that, this type only refuses nonsense.
    """

    image: RasterImage
    brief: DesignBrief
    pairs: tuple[FunctionSolutionPair, ...] = ()
    version: int = 1

    def __post_init__(self) -> None:
        if self.version < 1:
            raise PreconditionError("candidate version starts at 1")
        seen: set[str] = set()
        for pair in self.pairs:
            if pair.function in seen:
                raise PreconditionError(f"duplicate function {pair.function!r}")
            seen.add(pair.function)

    def with_pairs(self, pairs: tuple[FunctionSolutionPair, ...]) -> "ConceptCandidate":
        return replace(self, pairs=pairs)

    def with_new_image(self, image: RasterImage) -> "ConceptCandidate":
        """Accept an edit: new image, version bumped by exactly one."""
        return replace(self, image=image, version=self.version + 1)
