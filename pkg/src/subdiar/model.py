"""Core value types and embedding arithmetic shared by every pipeline stage.

Embeddings are plain 1-D float64 numpy arrays. All types here are immutable
values; the functions are pure.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

Embedding = np.ndarray


class Origin(str, Enum):
    """How a speaker entered the registry."""

    VISUAL_ANCHOR = "visual_anchor"
    SUPPLEMENTED = "supplemented"


class Stage(str, Enum):
    """Which pipeline stage produced an assignment."""

    ACTIVE_VISUAL = "active_visual"
    PROTOTYPE_NEAREST = "prototype_nearest"
    GROUP_STANDARDIZED = "group_standardized"
    SUPPLEMENTED = "supplemented"


@dataclass(frozen=True)
class Line:
    """One subtitle cue; the atomic unit mapped to a speaker.

    Timing is in integer milliseconds, taken from the subtitle file.
    """

    line_id: int
    start: int
    end: int
    text: str

    def __post_init__(self):
        if self.line_id < 0:
            raise ValueError(f"line_id must be non-negative, got {self.line_id}")
        if self.end <= self.start:
            raise ValueError(
                f"line {self.line_id}: end ({self.end} ms) must be after start ({self.start} ms)"
            )

    @property
    def duration(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class Program:
    """An ordered sequence of subtitle lines from one audiovisual program."""

    program_id: str
    lines: tuple[Line, ...]

    def __post_init__(self):
        object.__setattr__(self, "lines", tuple(self.lines))
        for prev, cur in zip(self.lines, self.lines[1:]):
            if cur.line_id <= prev.line_id:
                raise ValueError(
                    f"line_ids must be strictly increasing ({prev.line_id} before {cur.line_id})"
                )
            if cur.start < prev.start:
                raise ValueError(
                    f"lines must be sorted by start time "
                    f"(line {cur.line_id} starts before line {prev.line_id})"
                )

    def __len__(self) -> int:
        return len(self.lines)

    def line(self, line_id: int) -> Line:
        for ln in self.lines:
            if ln.line_id == line_id:
                return ln
        raise KeyError(f"no line with id {line_id}")


@dataclass(frozen=True)
class SpeakerId:
    """A registered speaker identity with its provenance."""

    id: int
    origin: Origin

    def __post_init__(self):
        if self.id < 0:
            raise ValueError(f"speaker id must be non-negative, got {self.id}")


@dataclass(frozen=True)
class Assignment:
    """The speaker decided for one line, with the stage that decided it."""

    line_id: int
    speaker: SpeakerId
    confidence: float
    stage: Stage


def as_embedding(values: Iterable[float]) -> Embedding:
    """Convert to a validated 1-D float64 vector.

    Raises ValueError on empty vectors or non-finite components.
    """
    e = np.asarray(values, dtype=np.float64)
    if e.ndim != 1:
        raise ValueError(f"embedding must be 1-D, got shape {e.shape}")
    if e.size == 0:
        raise ValueError("embedding must be non-empty")
    if not np.all(np.isfinite(e)):
        raise ValueError("embedding components must all be finite")
    return e


def cosine_similarity(a: Embedding, b: Embedding) -> float:
    """Cosine similarity dot(a,b) / (|a|*|b|), in [-1, 1].

    Raises ValueError on dimension mismatch or a zero-norm argument.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine similarity is undefined for zero-norm vectors")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def unit_normalize(e: Embedding) -> Embedding:
    """Scale a vector to unit norm. Raises ValueError on zero-norm input."""
    e = as_embedding(e)
    n = float(np.linalg.norm(e))
    if n == 0.0:
        raise ValueError("cannot normalize a zero-norm vector")
    return e / n


def mean_embedding(embs: Sequence[Embedding]) -> Embedding:
    """Componentwise arithmetic mean of a non-empty same-dimension set."""
    if len(embs) == 0:
        raise ValueError("mean of an empty embedding set is undefined")
    first = np.asarray(embs[0], dtype=np.float64)
    for e in embs[1:]:
        if np.asarray(e).shape != first.shape:
            raise ValueError("all embeddings must share one dimension")
    return np.mean(np.asarray(embs, dtype=np.float64), axis=0)
