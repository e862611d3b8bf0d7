"""Visual-anchor speaker registration.

Each visual (face) cluster is registered as one speaker. The speaker's audio
cluster is chosen by majority vote over its lines, and its timbre prototype
is the mean timbre embedding of the lines that fall in that audio cluster.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .clustering import ClusterLabels
from .features import LineFeatures
from .model import (
    Assignment,
    Embedding,
    Line,
    Origin,
    SpeakerId,
    Stage,
    cosine_similarity,
    mean_embedding,
)


@dataclass(frozen=True)
class RegisteredSpeaker:
    """One registry entry: identity, timbre prototype, and supporting lines."""

    speaker: SpeakerId
    prototype: Embedding
    support: frozenset[int]


@dataclass(frozen=True)
class SpeakerRegistry:
    """The registered speaker set, visual-anchored plus supplemented."""

    speakers: tuple[RegisteredSpeaker, ...]

    def __post_init__(self):
        ids = [s.speaker.id for s in self.speakers]
        if len(ids) != len(set(ids)):
            raise ValueError("speaker ids must be unique within a registry")
        dims = {s.prototype.size for s in self.speakers}
        if len(dims) > 1:
            raise ValueError("registry prototypes must share one dimension")

    def __len__(self) -> int:
        return len(self.speakers)

    def get(self, speaker_id: int) -> RegisteredSpeaker:
        for s in self.speakers:
            if s.speaker.id == speaker_id:
                return s
        raise KeyError(f"no registered speaker with id {speaker_id}")

    def visual_anchored(self) -> tuple[RegisteredSpeaker, ...]:
        return tuple(s for s in self.speakers if s.speaker.origin is Origin.VISUAL_ANCHOR)

    def supplemented(self) -> tuple[RegisteredSpeaker, ...]:
        return tuple(s for s in self.speakers if s.speaker.origin is Origin.SUPPLEMENTED)

    def next_id(self) -> int:
        return max((s.speaker.id for s in self.speakers), default=0) + 1

    def with_speaker(self, entry: RegisteredSpeaker) -> "SpeakerRegistry":
        return SpeakerRegistry(speakers=self.speakers + (entry,))

    def with_updated(self, speaker_id: int, prototype: Embedding, support: frozenset[int]) -> "SpeakerRegistry":
        updated = tuple(
            replace(s, prototype=prototype, support=support)
            if s.speaker.id == speaker_id
            else s
            for s in self.speakers
        )
        return SpeakerRegistry(speakers=updated)


def vote_audio_cluster(line_ids: Iterable[int], c_audio: ClusterLabels) -> int:
    """Majority audio cluster among the given lines; ties pick the smallest id."""
    counts = Counter(c_audio.labels[s] for s in line_ids)
    if not counts:
        raise ValueError("cannot vote over an empty line set")
    best_count = max(counts.values())
    return min(c for c, n in counts.items() if n == best_count)


def build_registry(
    lines: Sequence[Line],
    features: dict[int, LineFeatures],
    c_visual: ClusterLabels,
    c_audio: ClusterLabels,
) -> SpeakerRegistry:
    """Register one speaker per visual cluster.

    ``c_visual`` must label exactly the active lines and ``c_audio`` all
    lines. Speaker ids equal the visual cluster labels.
    """
    active_ids = {ln.line_id for ln in lines if features[ln.line_id].active}
    if set(c_visual.labels) != active_ids:
        raise ValueError("visual cluster labels must cover exactly the active lines")
    all_ids = {ln.line_id for ln in lines}
    if not all_ids <= set(c_audio.labels):
        raise ValueError("audio cluster labels must cover all lines")

    speakers = []
    for i in range(1, c_visual.n + 1):
        cluster_lines = c_visual.members(i)
        assert cluster_lines, f"visual cluster {i} has no lines"
        voted = vote_audio_cluster(cluster_lines, c_audio)
        support = [s for s in cluster_lines if c_audio.labels[s] == voted]
        prototype = mean_embedding([features[s].timbre_embedding for s in support])
        speakers.append(
            RegisteredSpeaker(
                speaker=SpeakerId(id=i, origin=Origin.VISUAL_ANCHOR),
                prototype=prototype,
                support=frozenset(support),
            )
        )
    return SpeakerRegistry(speakers=tuple(speakers))


def nearest_speaker(
    timbre: Embedding, candidates: Sequence[RegisteredSpeaker]
) -> tuple[RegisteredSpeaker, float]:
    """The candidate with the highest prototype cosine; ties pick the smallest id."""
    if not candidates:
        raise ValueError("cannot match against an empty registry")
    best: RegisteredSpeaker | None = None
    best_sim = -np.inf
    for s in sorted(candidates, key=lambda c: c.speaker.id):
        sim = cosine_similarity(timbre, s.prototype)
        if sim > best_sim:
            best, best_sim = s, sim
    assert best is not None
    return best, float(best_sim)


def assign_initial(
    lines: Sequence[Line],
    features: dict[int, LineFeatures],
    c_visual: ClusterLabels,
    registry: SpeakerRegistry,
) -> dict[int, Assignment]:
    """Initial per-line assignments.

    Active lines take their own visual cluster's speaker at confidence 1.0;
    the rest take the nearest timbre prototype with the similarity as
    confidence.
    """
    if len(registry) == 0:
        raise ValueError("cannot assign lines with an empty registry")
    anchored = registry.visual_anchored()
    assignments: dict[int, Assignment] = {}
    for ln in lines:
        f = features[ln.line_id]
        if f.active:
            speaker = registry.get(c_visual.labels[ln.line_id]).speaker
            assignments[ln.line_id] = Assignment(
                line_id=ln.line_id,
                speaker=speaker,
                confidence=1.0,
                stage=Stage.ACTIVE_VISUAL,
            )
        else:
            best, sim = nearest_speaker(f.timbre_embedding, anchored)
            assignments[ln.line_id] = Assignment(
                line_id=ln.line_id,
                speaker=best.speaker,
                confidence=sim,
                stage=Stage.PROTOTYPE_NEAREST,
            )
    return assignments
