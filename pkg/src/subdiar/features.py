"""Per-line feature ingestion and the synthetic labeled-program generator.

Feature files are JSONL, one object per line of the program:
``{"line_id": 3, "active": true, "face": [...], "timbre": [...]}``
(``face`` present exactly when ``active`` is true). Turn-score files are
JSONL records ``{"left": 3, "right": 4, "p0": 0.1, "p1": 0.9}`` for adjacent
line pairs. Embeddings are unit-normalized on load.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Union

import numpy as np

from .model import Embedding, Line, Program, as_embedding, unit_normalize

_MAX_PROTOTYPE_COSINE = 0.5
_MARKOV_STAY_PROB = 0.6
_SCORER_CONFIDENT = (0.1, 0.9)  # (p0, p1) emitted for a "same speaker" call


@dataclass(frozen=True)
class LineFeatures:
    """Multimodal features for one line: active flag plus embeddings."""

    line_id: int
    active: bool
    face_embedding: Embedding | None
    timbre_embedding: Embedding

    def __post_init__(self):
        if self.active and self.face_embedding is None:
            raise ValueError(
                f"line {self.line_id}: active lines must carry a face embedding"
            )
        if not self.active and self.face_embedding is not None:
            raise ValueError(
                f"line {self.line_id}: face embeddings are only valid on active lines"
            )


@dataclass(frozen=True)
class TurnScoreRecord:
    """External scorer label-token weights for one adjacent line pair."""

    left_line_id: int
    right_line_id: int
    p0: float
    p1: float

    def __post_init__(self):
        if self.right_line_id != self.left_line_id + 1:
            raise ValueError(
                f"turn scores must cover adjacent lines, got "
                f"({self.left_line_id}, {self.right_line_id})"
            )
        if self.p0 < 0 or self.p1 < 0:
            raise ValueError("p0 and p1 must be non-negative")
        if self.p0 + self.p1 == 0:
            raise ValueError(
                f"pair ({self.left_line_id}, {self.right_line_id}): p0 + p1 must be positive"
            )


@dataclass(frozen=True)
class SynthConfig:
    """Parameters for the synthetic labeled-program generator."""

    n_speakers: int
    n_lines: int
    embedding_dim: int
    face_noise_std: float = 0.0
    timbre_noise_std: float = 0.0
    offscreen_rate: float = 0.0
    unregistered_offscreen_speakers: int = 0
    turn_score_accuracy: float = 1.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_speakers < 1:
            raise ValueError("n_speakers must be at least 1")
        if self.n_lines < 1:
            raise ValueError("n_lines must be at least 1")
        if self.embedding_dim < 1:
            raise ValueError("embedding_dim must be at least 1")
        if not 0.0 <= self.offscreen_rate <= 1.0:
            raise ValueError("offscreen_rate must be in [0, 1]")
        if self.face_noise_std < 0 or self.timbre_noise_std < 0:
            raise ValueError("noise stds must be non-negative")
        if not 0 <= self.unregistered_offscreen_speakers <= self.n_speakers:
            raise ValueError(
                "unregistered_offscreen_speakers must be between 0 and n_speakers"
            )
        if not 0.0 <= self.turn_score_accuracy <= 1.0:
            raise ValueError("turn_score_accuracy must be in [0, 1]")


@dataclass(frozen=True)
class GroundTruth:
    """True per-line speakers for a program (evaluation side only)."""

    line_speakers: dict[int, int]
    offscreen_only: frozenset[int] = field(default_factory=frozenset)

    @property
    def n_speakers(self) -> int:
        return len(set(self.line_speakers.values()))


def load_features(source: Union[str, Path, IO[str]]) -> dict[int, LineFeatures]:
    """Load a feature JSONL file into a map line_id -> LineFeatures.

    Embeddings are unit-normalized. Raises ValueError on duplicate line_ids,
    inconsistent dimensions, or an active record without a face embedding.
    """
    features: dict[int, LineFeatures] = {}
    timbre_dim: int | None = None
    face_dim: int | None = None
    for lineno, raw in enumerate(_iter_jsonl(source), start=1):
        rec = json.loads(raw)
        line_id = int(rec["line_id"])
        if line_id in features:
            raise ValueError(f"duplicate feature record for line {line_id}")
        active = bool(rec["active"])
        face_raw = rec.get("face")
        if active and face_raw is None:
            raise ValueError(f"record {lineno}: active=true but no face embedding")
        timbre = unit_normalize(as_embedding(rec["timbre"]))
        if timbre_dim is None:
            timbre_dim = timbre.size
        elif timbre.size != timbre_dim:
            raise ValueError(
                f"record {lineno}: timbre dim {timbre.size} != {timbre_dim}"
            )
        face = None
        if face_raw is not None:
            face = unit_normalize(as_embedding(face_raw))
            if face_dim is None:
                face_dim = face.size
            elif face.size != face_dim:
                raise ValueError(
                    f"record {lineno}: face dim {face.size} != {face_dim}"
                )
        features[line_id] = LineFeatures(
            line_id=line_id, active=active, face_embedding=face, timbre_embedding=timbre
        )
    return features


def save_features(features: dict[int, LineFeatures], sink: Union[str, Path, IO[str]]) -> None:
    """Write features as JSONL, ordered by line_id."""
    with _open_sink(sink) as fh:
        for line_id in sorted(features):
            f = features[line_id]
            rec: dict = {"line_id": f.line_id, "active": f.active}
            if f.face_embedding is not None:
                rec["face"] = list(f.face_embedding)
            rec["timbre"] = list(f.timbre_embedding)
            fh.write(json.dumps(rec) + "\n")


def load_turn_scores(
    source: Union[str, Path, IO[str]]
) -> dict[tuple[int, int], TurnScoreRecord]:
    """Load a turn-score JSONL file into a map (left, right) -> record.

    Coverage may be partial; missing pairs fall back to the neutral scorer
    downstream. Raises ValueError on non-adjacent pairs or degenerate weights.
    """
    scores: dict[tuple[int, int], TurnScoreRecord] = {}
    for raw in _iter_jsonl(source):
        rec = json.loads(raw)
        record = TurnScoreRecord(
            left_line_id=int(rec["left"]),
            right_line_id=int(rec["right"]),
            p0=float(rec["p0"]),
            p1=float(rec["p1"]),
        )
        key = (record.left_line_id, record.right_line_id)
        if key in scores:
            raise ValueError(f"duplicate turn-score record for pair {key}")
        scores[key] = record
    return scores


def save_turn_scores(
    scores: dict[tuple[int, int], TurnScoreRecord], sink: Union[str, Path, IO[str]]
) -> None:
    """Write turn scores as JSONL, ordered by pair."""
    with _open_sink(sink) as fh:
        for key in sorted(scores):
            r = scores[key]
            fh.write(
                json.dumps(
                    {"left": r.left_line_id, "right": r.right_line_id, "p0": r.p0, "p1": r.p1}
                )
                + "\n"
            )


def write_truth(truth: GroundTruth, sink: Union[str, Path, IO[str]]) -> None:
    """Write ground truth as CSV (line_id, speaker)."""
    with _open_sink(sink) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["line_id", "speaker"])
        for line_id in sorted(truth.line_speakers):
            writer.writerow([line_id, truth.line_speakers[line_id]])


def read_truth(source: Union[str, Path, IO[str]]) -> GroundTruth:
    """Read a ground-truth CSV written by write_truth."""
    if isinstance(source, (str, Path)):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = source.read()
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != ["line_id", "speaker"]:
        raise ValueError("truth file missing the expected 'line_id,speaker' header")
    return GroundTruth(
        line_speakers={int(r[0]): int(r[1]) for r in rows[1:] if r}
    )


def _iter_jsonl(source: Union[str, Path, IO[str]]):
    if isinstance(source, (str, Path)):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = source.read()
    for raw in text.splitlines():
        if raw.strip():
            yield raw


class _open_sink:
    def __init__(self, sink: Union[str, Path, IO[str]]):
        self._own = isinstance(sink, (str, Path))
        self._fh = open(sink, "w", encoding="utf-8") if self._own else sink

    def __enter__(self) -> IO[str]:
        return self._fh

    def __exit__(self, *exc):
        if self._own:
            self._fh.close()
        return False


def _sample_prototypes(
    rng: np.random.Generator, count: int, dim: int, max_cos: float = _MAX_PROTOTYPE_COSINE
) -> np.ndarray:
    """Draw unit vectors with pairwise cosine <= max_cos by rejection."""
    protos: list[np.ndarray] = []
    attempts = 0
    limit = 1000 * count
    while len(protos) < count:
        attempts += 1
        if attempts > limit:
            raise ValueError(
                f"could not sample {count} prototypes with pairwise cosine <= {max_cos} "
                f"in dim {dim}; dimension too small"
            )
        cand = rng.normal(size=dim)
        norm = np.linalg.norm(cand)
        if norm == 0:
            continue
        cand = cand / norm
        if all(float(np.dot(cand, p)) <= max_cos for p in protos):
            protos.append(cand)
    return np.asarray(protos)


def synth_program(
    cfg: SynthConfig, program_id: str = "synthetic"
) -> tuple[Program, dict[int, LineFeatures], dict[tuple[int, int], TurnScoreRecord], GroundTruth]:
    """Generate a labeled program with features and turn scores.

    Speakers get unit-sphere timbre/face prototypes (pairwise cosine <= 0.5);
    the line sequence follows a Markov chain with stay probability 0.6;
    per-line embeddings are noisy copies of the prototypes. The last
    ``unregistered_offscreen_speakers`` speakers never appear on screen.
    The synthetic scorer agrees with the true turn label with probability
    ``turn_score_accuracy``. Fully reproducible from ``rng_seed``.
    """
    rng = np.random.default_rng(cfg.rng_seed)
    n = cfg.n_speakers
    dim = cfg.embedding_dim
    timbre_protos = _sample_prototypes(rng, n, dim)
    face_protos = _sample_prototypes(rng, n, dim)
    offscreen_only = frozenset(range(n - cfg.unregistered_offscreen_speakers, n))

    # Speaker sequence: Markov chain, uniform jump to another speaker.
    speakers: list[int] = [int(rng.integers(n))]
    for _ in range(cfg.n_lines - 1):
        prev = speakers[-1]
        if n > 1 and rng.random() >= _MARKOV_STAY_PROB:
            step = int(rng.integers(n - 1))
            speakers.append(step if step < prev else step + 1)
        else:
            speakers.append(prev)

    lines: list[Line] = []
    features: dict[int, LineFeatures] = {}
    truth: dict[int, int] = {}
    t = 0
    for i, spk in enumerate(speakers):
        dur = int(rng.integers(800, 3000))
        gap = int(rng.integers(50, 400))
        line = Line(line_id=i, start=t, end=t + dur, text=f"synthetic utterance {i}")
        t += dur + gap
        lines.append(line)
        truth[i] = spk

        active = spk not in offscreen_only and rng.random() >= cfg.offscreen_rate
        timbre = timbre_protos[spk]
        if cfg.timbre_noise_std > 0:
            timbre = timbre + rng.normal(0.0, cfg.timbre_noise_std, size=dim)
        timbre = unit_normalize(timbre)
        face = None
        if active:
            face = face_protos[spk]
            if cfg.face_noise_std > 0:
                face = face + rng.normal(0.0, cfg.face_noise_std, size=dim)
            face = unit_normalize(face)
        features[i] = LineFeatures(
            line_id=i, active=active, face_embedding=face, timbre_embedding=timbre
        )

    scores: dict[tuple[int, int], TurnScoreRecord] = {}
    for i in range(cfg.n_lines - 1):
        truth_same = speakers[i] == speakers[i + 1]
        agree = rng.random() < cfg.turn_score_accuracy
        predicted_same = truth_same if agree else not truth_same
        p0, p1 = _SCORER_CONFIDENT if predicted_same else _SCORER_CONFIDENT[::-1]
        scores[(i, i + 1)] = TurnScoreRecord(
            left_line_id=i, right_line_id=i + 1, p0=p0, p1=p1
        )

    program = Program(program_id=program_id, lines=tuple(lines))
    return program, features, scores, GroundTruth(
        line_speakers=truth, offscreen_only=offscreen_only
    )
