"""Speaker turn detection for adjacent line pairs.

An external scorer emits label-token weights (p0, p1) per adjacent pair over
sliding windows of consecutive lines; its probability is fused with the
normalized timbre similarity of the pair. Pairs whose fused score falls below
0.5 become group boundaries.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Protocol, Sequence

from .features import LineFeatures, TurnScoreRecord
from .model import Embedding, Line, Program, cosine_similarity

logger = logging.getLogger(__name__)

NEUTRAL_SCORE = (0.5, 0.5)
MIN_WINDOW = 2
MAX_WINDOW = 10


@dataclass(frozen=True)
class TurnDecision:
    """The fused same-speaker decision for one adjacent line pair."""

    left_line_id: int
    right_line_id: int
    scorer_prob: float
    timbre_sim: float
    fused: float
    same_speaker: bool


@dataclass(frozen=True)
class Group:
    """A maximal run of adjacent lines with no detected speaker turn."""

    line_ids: tuple[int, ...]

    def __post_init__(self):
        if not self.line_ids:
            raise ValueError("a group must contain at least one line")

    @property
    def first(self) -> int:
        return self.line_ids[0]

    @property
    def last(self) -> int:
        return self.line_ids[-1]

    def __len__(self) -> int:
        return len(self.line_ids)


class TurnScorer(Protocol):
    """Contract for external turn scorers.

    Given an ordered window of consecutive lines, return one (p0, p1) pair
    of non-negative label-token weights per adjacent pair in the window
    (len(window) - 1 results, in order).
    """

    def score_window(self, window: Sequence[Line]) -> list[tuple[float, float]]:
        ...


class NeutralScorer:
    """Scorer stub that is indifferent on every pair."""

    def score_window(self, window: Sequence[Line]) -> list[tuple[float, float]]:
        return [NEUTRAL_SCORE] * (len(window) - 1)


class ReplayScorer:
    """Replays (p0, p1) pairs from a turn-score file; missing pairs are neutral."""

    def __init__(self, scores: dict[tuple[int, int], TurnScoreRecord]):
        self._scores = scores

    def score_window(self, window: Sequence[Line]) -> list[tuple[float, float]]:
        out = []
        for left, right in zip(window, window[1:]):
            rec = self._scores.get((left.line_id, right.line_id))
            out.append((rec.p0, rec.p1) if rec is not None else NEUTRAL_SCORE)
        return out


def scorer_probability(p0: float, p1: float) -> float:
    """Same-speaker probability p1 / (p0 + p1)."""
    if p0 < 0 or p1 < 0:
        raise ValueError("label weights must be non-negative")
    if p0 + p1 == 0:
        raise ValueError("p0 + p1 must be positive")
    return p1 / (p0 + p1)


def timbre_turn_similarity(a: Embedding, b: Embedding) -> float:
    """Cosine similarity mapped affinely onto [0, 1]: (cos + 1) / 2."""
    return (cosine_similarity(a, b) + 1.0) / 2.0


def fuse(scorer_prob: float, timbre_sim: float, w: float) -> float:
    """Weighted combination w * scorer_prob + (1 - w) * timbre_sim."""
    if not 0.0 <= w <= 1.0:
        raise ValueError(f"fusion weight must be in [0, 1], got {w}")
    if not 0.0 <= scorer_prob <= 1.0 or not 0.0 <= timbre_sim <= 1.0:
        raise ValueError("fusion inputs must be in [0, 1]")
    return w * scorer_prob + (1.0 - w) * timbre_sim


def score_pairs(
    program: Program, scorer: TurnScorer, window_size: int = MAX_WINDOW
) -> dict[tuple[int, int], tuple[float, float]]:
    """Score every adjacent pair exactly once with sliding windows.

    Windows of ``window_size`` lines stride by ``window_size - 1`` (adjacent
    windows share one line), so pairs spanning window joints are scored by the
    later window. The final window may be shorter. A scorer failure on a
    window degrades those pairs to the neutral score with a warning.
    """
    if not MIN_WINDOW <= window_size <= MAX_WINDOW:
        raise ValueError(
            f"window size must be between {MIN_WINDOW} and {MAX_WINDOW}, got {window_size}"
        )
    lines = program.lines
    results: dict[tuple[int, int], tuple[float, float]] = {}
    start = 0
    while start < len(lines) - 1:
        window = lines[start : start + window_size]
        pairs = [(a.line_id, b.line_id) for a, b in zip(window, window[1:])]
        try:
            scores = scorer.score_window(window)
            if len(scores) != len(pairs):
                raise ValueError(
                    f"scorer returned {len(scores)} scores for {len(pairs)} pairs"
                )
        except Exception:
            logger.warning(
                "turn scorer failed on window starting at line %d; using neutral scores",
                window[0].line_id,
                exc_info=True,
            )
            scores = [NEUTRAL_SCORE] * len(pairs)
        for pair, score in zip(pairs, scores):
            results[pair] = score
        start += window_size - 1
    return results


def detect_turns(
    program: Program,
    features: dict[int, LineFeatures],
    scorer: TurnScorer,
    w: float,
    window_size: int = MAX_WINDOW,
) -> list[TurnDecision]:
    """Fused same-speaker decisions for every adjacent line pair, in order."""
    pair_scores = score_pairs(program, scorer, window_size)
    decisions = []
    for left, right in zip(program.lines, program.lines[1:]):
        p0, p1 = pair_scores[(left.line_id, right.line_id)]
        prob = scorer_probability(p0, p1)
        sim = timbre_turn_similarity(
            features[left.line_id].timbre_embedding,
            features[right.line_id].timbre_embedding,
        )
        fused = fuse(prob, sim, w)
        decisions.append(
            TurnDecision(
                left_line_id=left.line_id,
                right_line_id=right.line_id,
                scorer_prob=prob,
                timbre_sim=sim,
                fused=fused,
                same_speaker=fused >= 0.5,
            )
        )
    return decisions


def segment_groups(program: Program, decisions: Sequence[TurnDecision]) -> list[Group]:
    """Cut the line sequence at detected turns; same-speaker runs form groups."""
    lines = program.lines
    if len(decisions) != max(len(lines) - 1, 0):
        raise ValueError(
            f"expected one decision per adjacent pair ({len(lines) - 1}), got {len(decisions)}"
        )
    by_pair = {(d.left_line_id, d.right_line_id): d for d in decisions}
    groups: list[Group] = []
    current: list[int] = []
    for left, right in zip(lines, lines[1:]):
        key = (left.line_id, right.line_id)
        if key not in by_pair:
            raise ValueError(f"missing decision for adjacent pair {key}")
        current.append(left.line_id)
        if not by_pair[key].same_speaker:
            groups.append(Group(line_ids=tuple(current)))
            current = []
    if lines:
        current.append(lines[-1].line_id)
        groups.append(Group(line_ids=tuple(current)))
    return groups
