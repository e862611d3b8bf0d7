"""Diarization and turn-detection evaluation.

DER, JER, and SPKE are computed under the overlap-maximizing speaker mapping.
Two scoring modes: ``line`` (reference and hypothesis share the subtitle
segmentation, so all error is confusion) and ``timeline`` (interval sweep with
missed/false-alarm/confusion components, optional collar, and multi-speaker
overlap regions).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

_TIE_TOL = 1e-9

Label = Hashable


@dataclass(frozen=True)
class LabeledTimeline:
    """Speaker-labeled time segments in milliseconds; segments may overlap."""

    segments: tuple[tuple[float, float, Label], ...]

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(tuple(s) for s in self.segments))
        for start, end, _ in self.segments:
            if end <= start:
                raise ValueError(f"segment ({start}, {end}) must have positive duration")

    def labels(self) -> list[Label]:
        return sorted({s[2] for s in self.segments}, key=repr)


def _max_total(matrix: np.ndarray) -> float:
    if matrix.size == 0:
        return 0.0
    rows, cols = linear_sum_assignment(matrix, maximize=True)
    return float(matrix[rows, cols].sum())


def optimal_mapping(overlap: np.ndarray) -> dict[int, int]:
    """Injective partial map ref index -> hyp index maximizing total overlap.

    Zero-overlap pairings are dropped from the result. Among maps with equal
    total, the one whose (ref, hyp) pairs are lexicographically smallest is
    returned, so the output is deterministic.
    """
    overlap = np.asarray(overlap, dtype=np.float64)
    if overlap.ndim != 2:
        raise ValueError("overlap must be a 2-D matrix")
    if overlap.size and overlap.min() < 0:
        raise ValueError("overlap entries must be non-negative")
    n_ref, n_hyp = overlap.shape
    if n_ref == 0 or n_hyp == 0:
        return {}

    best_total = _max_total(overlap)
    mapping: dict[int, int] = {}
    fixed_total = 0.0
    free_refs = list(range(n_ref))
    free_hyps = list(range(n_hyp))
    for r in range(n_ref):
        free_refs.remove(r)
        chosen = None
        for h in free_hyps:
            rest = overlap[np.ix_(free_refs, [x for x in free_hyps if x != h])]
            achievable = fixed_total + overlap[r, h] + _max_total(rest)
            if achievable >= best_total - _TIE_TOL:
                chosen = h
                break
        if chosen is not None:
            fixed_total += overlap[r, chosen]
            free_hyps.remove(chosen)
            if overlap[r, chosen] > 0:
                mapping[r] = chosen
        # else: r stays unmapped (only possible when refs outnumber hyps).
    return mapping


def _merge_intervals(intervals: list[tuple[float, float]]) -> list[tuple[float, float]]:
    if not intervals:
        return []
    merged = []
    for start, end in sorted(intervals):
        if merged and start <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], end))
        else:
            merged.append((start, end))
    return merged


def _speaker_intervals(tl: LabeledTimeline) -> dict[Label, list[tuple[float, float]]]:
    by_label: dict[Label, list[tuple[float, float]]] = {}
    for start, end, label in tl.segments:
        by_label.setdefault(label, []).append((float(start), float(end)))
    return {lab: _merge_intervals(iv) for lab, iv in by_label.items()}


def _interval_overlap(a: list[tuple[float, float]], b: list[tuple[float, float]]) -> float:
    total = 0.0
    for s1, e1 in a:
        for s2, e2 in b:
            total += max(0.0, min(e1, e2) - max(s1, s2))
    return total


def _interval_length(a: list[tuple[float, float]]) -> float:
    return sum(e - s for s, e in a)


def _overlap_matrix(
    ref: LabeledTimeline, hyp: LabeledTimeline
) -> tuple[np.ndarray, list[Label], list[Label]]:
    ref_iv = _speaker_intervals(ref)
    hyp_iv = _speaker_intervals(hyp)
    ref_labels = sorted(ref_iv, key=repr)
    hyp_labels = sorted(hyp_iv, key=repr)
    matrix = np.zeros((len(ref_labels), len(hyp_labels)))
    for i, rl in enumerate(ref_labels):
        for j, hl in enumerate(hyp_labels):
            matrix[i, j] = _interval_overlap(ref_iv[rl], hyp_iv[hl])
    return matrix, ref_labels, hyp_labels


def _line_confusion(ref: LabeledTimeline, hyp: LabeledTimeline) -> tuple[float, float]:
    """(confused duration, total duration) under the optimal mapping.

    Segments are paired by span; duplicated spans pair in input order.
    """
    ref_segs = sorted(ref.segments, key=lambda s: (s[0], s[1]))
    hyp_segs = sorted(hyp.segments, key=lambda s: (s[0], s[1]))
    if [(s[0], s[1]) for s in ref_segs] != [(s[0], s[1]) for s in hyp_segs]:
        raise ValueError("line mode requires identical segment boundaries")
    ref_labels = sorted({s[2] for s in ref_segs}, key=repr)
    hyp_labels = sorted({s[2] for s in hyp_segs}, key=repr)
    ref_index = {lab: i for i, lab in enumerate(ref_labels)}
    hyp_index = {lab: i for i, lab in enumerate(hyp_labels)}
    matrix = np.zeros((len(ref_labels), len(hyp_labels)))
    for (start, end, rlab), (_, _, hlab) in zip(ref_segs, hyp_segs):
        matrix[ref_index[rlab], hyp_index[hlab]] += end - start
    mapping = optimal_mapping(matrix)
    total = sum(end - start for start, end, _ in ref_segs)
    mapped_correct = sum(matrix[r, h] for r, h in mapping.items())
    return total - mapped_correct, total


def _collar_regions(ref: LabeledTimeline, collar_ms: float) -> list[tuple[float, float]]:
    if collar_ms <= 0:
        return []
    zones = []
    for start, end, _ in ref.segments:
        zones.append((start - collar_ms, start + collar_ms))
        zones.append((end - collar_ms, end + collar_ms))
    return _merge_intervals(zones)


def _timeline_components(
    ref: LabeledTimeline, hyp: LabeledTimeline, collar_ms: float
) -> tuple[float, float, float, float]:
    """(missed, false alarm, confusion, total reference time), collar-excluded."""
    ref_iv = _speaker_intervals(ref)
    hyp_iv = _speaker_intervals(hyp)
    matrix, ref_labels, hyp_labels = _overlap_matrix(ref, hyp)
    mapping = optimal_mapping(matrix)
    hyp_to_ref = {hyp_labels[h]: ref_labels[r] for r, h in mapping.items()}

    excluded = _collar_regions(ref, collar_ms)
    points: set[float] = set()
    for iv in list(ref_iv.values()) + list(hyp_iv.values()) + [excluded]:
        for s, e in iv:
            points.add(s)
            points.add(e)
    boundaries = sorted(points)

    def active(intervals: list[tuple[float, float]], lo: float, hi: float) -> bool:
        return any(s <= lo and hi <= e for s, e in intervals)

    missed = fa = confusion = total_ref = 0.0
    for lo, hi in zip(boundaries, boundaries[1:]):
        dur = hi - lo
        if dur <= 0 or active(excluded, lo, hi):
            continue
        ref_here = {lab for lab, iv in ref_iv.items() if active(iv, lo, hi)}
        hyp_here = {lab for lab, iv in hyp_iv.items() if active(iv, lo, hi)}
        mapped_here = {hyp_to_ref.get(lab, ("__unmapped__", lab)) for lab in hyp_here}
        n_ref, n_hyp = len(ref_here), len(hyp_here)
        n_correct = len(ref_here & mapped_here)
        total_ref += dur * n_ref
        missed += dur * max(0, n_ref - n_hyp)
        fa += dur * max(0, n_hyp - n_ref)
        confusion += dur * (min(n_ref, n_hyp) - n_correct)
    return missed, fa, confusion, total_ref


def der(
    ref: LabeledTimeline,
    hyp: LabeledTimeline,
    mode: str = "line",
    collar: float = 0.0,
) -> float:
    """Diarization error rate; ``collar`` is in seconds (timeline mode)."""
    if collar < 0:
        raise ValueError("collar must be non-negative")
    if not ref.segments:
        raise ValueError("reference timeline is empty")
    if mode == "line":
        confused, total = _line_confusion(ref, hyp)
        return float(confused / total)
    if mode == "timeline":
        missed, fa, confusion, total = _timeline_components(ref, hyp, collar * 1000.0)
        if total == 0:
            raise ValueError("no scored reference time (collar removed everything?)")
        return float((missed + fa + confusion) / total)
    raise ValueError(f"unknown scoring mode {mode!r}")


def spke(
    ref: LabeledTimeline,
    hyp: LabeledTimeline,
    mode: str = "line",
    collar: float = 0.0,
) -> float:
    """Speaker error rate: the confusion component of DER alone."""
    if not ref.segments:
        raise ValueError("reference timeline is empty")
    if mode == "line":
        confused, total = _line_confusion(ref, hyp)
        return float(confused / total)
    if mode == "timeline":
        _, _, confusion, total = _timeline_components(ref, hyp, collar * 1000.0)
        if total == 0:
            raise ValueError("no scored reference time (collar removed everything?)")
        return float(confusion / total)
    raise ValueError(f"unknown scoring mode {mode!r}")


def jer(ref: LabeledTimeline, hyp: LabeledTimeline) -> float:
    """Jaccard error rate: mean per-reference-speaker Jaccard error.

    Uses the overlap-maximizing mapping; unmapped reference speakers score 1.
    """
    if not ref.segments:
        raise ValueError("reference timeline is empty")
    ref_iv = _speaker_intervals(ref)
    hyp_iv = _speaker_intervals(hyp)
    matrix, ref_labels, hyp_labels = _overlap_matrix(ref, hyp)
    mapping = optimal_mapping(matrix)
    errors = []
    for i, rlab in enumerate(ref_labels):
        if i not in mapping:
            errors.append(1.0)
            continue
        hlab = hyp_labels[mapping[i]]
        inter = _interval_overlap(ref_iv[rlab], hyp_iv[hlab])
        union = (
            _interval_length(ref_iv[rlab]) + _interval_length(hyp_iv[hlab]) - inter
        )
        errors.append(1.0 - inter / union if union > 0 else 1.0)
    return float(np.mean(errors))


def turn_metrics(
    decisions: Sequence[tuple[float, bool]]
) -> tuple[float | None, float]:
    """(AUC, F1) for same-speaker decisions given (score, true label) pairs.

    AUC uses the midrank statistic over the scores (None when only one class
    is present); F1 scores the same-speaker class at threshold 0.5.
    """
    if len(decisions) == 0:
        raise ValueError("turn metrics require at least one decision")
    scores = np.asarray([d[0] for d in decisions], dtype=np.float64)
    labels = np.asarray([bool(d[1]) for d in decisions])
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos

    auc: float | None = None
    if n_pos > 0 and n_neg > 0:
        order = np.argsort(scores, kind="stable")
        ranks = np.empty(len(scores), dtype=np.float64)
        sorted_scores = scores[order]
        i = 0
        while i < len(scores):
            j = i
            while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
                j += 1
            midrank = (i + j) / 2.0 + 1.0
            ranks[order[i : j + 1]] = midrank
            i = j + 1
        rank_sum = float(ranks[labels].sum())
        auc = (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)

    predicted = scores >= 0.5
    tp = int(np.sum(predicted & labels))
    fp = int(np.sum(predicted & ~labels))
    fn = int(np.sum(~predicted & labels))
    denom = 2 * tp + fp + fn
    f1 = 2 * tp / denom if denom > 0 else 0.0
    return auc, f1


def timeline_from_lines(
    spans: Sequence[tuple[float, float]], labels: Sequence[Label]
) -> LabeledTimeline:
    """Build a timeline from per-line (start, end) spans and speaker labels."""
    if len(spans) != len(labels):
        raise ValueError("spans and labels must have equal length")
    return LabeledTimeline(
        segments=tuple((s, e, lab) for (s, e), lab in zip(spans, labels))
    )
