"""End-to-end pipeline orchestration, evaluation, sweeps, and reports.

Stage order is fixed: ingest -> cluster -> register -> turn-detect ->
supplement -> score. Modality ``A`` stops after timbre clustering (cluster
ids are the speakers); ``AV`` runs the full flow with a neutral scorer and
w forced to 0 (turn decisions reduce to timbre similarity); ``AVT`` replays
the external scorer file. All randomness derives from ``rng_seed``.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass, replace
from pathlib import Path
from typing import IO, Sequence

import numpy as np

from .clustering import ClusterLabels, ahc, spectral_cluster
from .config import PipelineConfig, config_items
from .features import (
    GroundTruth,
    LineFeatures,
    TurnScoreRecord,
    load_features,
    load_turn_scores,
    read_truth,
)
from .metrics import LabeledTimeline, der, jer, spke, timeline_from_lines, turn_metrics
from .model import (
    Assignment,
    Origin,
    Program,
    SpeakerId,
    Stage,
    cosine_similarity,
    mean_embedding,
)
from .registration import (
    RegisteredSpeaker,
    SpeakerRegistry,
    assign_initial,
    build_registry,
)
from .subtitle_io import parse_srt, write_annotation, write_rttm
from .supplement import GroupVerdict, supplement
from .turns import NeutralScorer, ReplayScorer, TurnDecision, detect_turns, segment_groups


@dataclass(frozen=True)
class MetricReport:
    der: float
    jer: float
    spke: float
    turn_auc: float | None
    turn_f1: float | None
    ref_speakers: int
    hyp_speakers: int
    supplemented_speakers: int

    def rows(self) -> list[tuple[str, str]]:
        def fmt(v):
            return "" if v is None else repr(v)

        return [
            ("der", fmt(self.der)),
            ("jer", fmt(self.jer)),
            ("spke", fmt(self.spke)),
            ("turn_auc", fmt(self.turn_auc)),
            ("turn_f1", fmt(self.turn_f1)),
            ("ref_speakers", str(self.ref_speakers)),
            ("hyp_speakers", str(self.hyp_speakers)),
            ("supplemented_speakers", str(self.supplemented_speakers)),
        ]


@dataclass(frozen=True)
class DiarizationResult:
    program: Program
    config: PipelineConfig
    assignments: dict[int, Assignment]
    registry: SpeakerRegistry
    decisions: tuple[TurnDecision, ...]
    verdicts: tuple[GroupVerdict, ...]
    metrics: MetricReport | None

    def speaker_count(self) -> int:
        return len({a.speaker.id for a in self.assignments.values()})


def _kmeans_seeds(rng_seed: int) -> tuple[int, int]:
    """Derive distinct deterministic k-means seeds for the two modalities."""
    children = np.random.SeedSequence(rng_seed).spawn(2)
    return (
        int(children[0].generate_state(1)[0]),
        int(children[1].generate_state(1)[0]),
    )


def _cluster(
    embs, ids, cfg: PipelineConfig, k_max: int, seed: int
) -> ClusterLabels:
    if cfg.clustering_method == "ahc":
        return ahc(embs, cfg.ahc_threshold, ids=ids)
    return spectral_cluster(embs, k=None, k_max=k_max, ids=ids, seed=seed)


def _check_coverage(program: Program, features: dict[int, LineFeatures]) -> None:
    missing = [ln.line_id for ln in program.lines if ln.line_id not in features]
    if missing:
        raise ValueError(
            f"feature file does not cover lines {missing[:5]}"
            + ("..." if len(missing) > 5 else "")
        )


def _audio_only_result(
    program: Program, features: dict[int, LineFeatures], cfg: PipelineConfig, seed: int
) -> tuple[dict[int, Assignment], SpeakerRegistry]:
    """Modality A: timbre clustering only; cluster ids are the speakers."""
    ids = [ln.line_id for ln in program.lines]
    embs = [features[i].timbre_embedding for i in ids]
    c_audio = _cluster(embs, ids, cfg, cfg.k_max_audio, seed)
    speakers = []
    for c in range(1, c_audio.n + 1):
        members = c_audio.members(c)
        proto = mean_embedding([features[s].timbre_embedding for s in members])
        speakers.append(
            RegisteredSpeaker(
                speaker=SpeakerId(id=c, origin=Origin.VISUAL_ANCHOR),
                prototype=proto,
                support=frozenset(members),
            )
        )
    registry = SpeakerRegistry(speakers=tuple(speakers))
    assignments = {}
    for ln in program.lines:
        entry = registry.get(c_audio.labels[ln.line_id])
        assignments[ln.line_id] = Assignment(
            line_id=ln.line_id,
            speaker=entry.speaker,
            confidence=cosine_similarity(
                features[ln.line_id].timbre_embedding, entry.prototype
            ),
            stage=Stage.PROTOTYPE_NEAREST,
        )
    return assignments, registry


def run_pipeline(
    cfg: PipelineConfig,
    program: Program | None = None,
    features: dict[int, LineFeatures] | None = None,
    turn_scores: dict[tuple[int, int], TurnScoreRecord] | None = None,
    truth: GroundTruth | None = None,
) -> DiarizationResult:
    """Run the full flow for one program.

    Inputs may be passed in memory; anything not supplied is loaded from the
    paths in the config.
    """
    if program is None:
        if cfg.subtitles is None:
            raise ValueError("no program given and paths.subtitles not configured")
        with open(cfg.subtitles, encoding="utf-8") as fh:
            program = parse_srt(fh, program_id=Path(cfg.subtitles).stem)
    if features is None:
        if cfg.features is None:
            raise ValueError("no features given and paths.features not configured")
        features = load_features(cfg.features)
    if turn_scores is None and cfg.modality == "AVT" and cfg.turn_scores is not None:
        turn_scores = load_turn_scores(cfg.turn_scores)
    if truth is None and cfg.ground_truth is not None:
        truth = read_truth(cfg.ground_truth)

    _check_coverage(program, features)
    if len(program) == 0:
        raise ValueError("program has no lines")

    visual_seed, audio_seed = _kmeans_seeds(cfg.rng_seed)

    if cfg.modality == "A":
        assignments, registry = _audio_only_result(program, features, cfg, audio_seed)
        decisions: tuple[TurnDecision, ...] = ()
        verdicts: tuple[GroupVerdict, ...] = ()
    else:
        active_ids = [ln.line_id for ln in program.lines if features[ln.line_id].active]
        if not active_ids:
            raise ValueError(
                "no active lines: visual-anchor registration is impossible "
                "(use modality A for audio-only programs)"
            )
        c_visual = _cluster(
            [features[i].face_embedding for i in active_ids],
            active_ids,
            cfg,
            cfg.k_max_visual,
            visual_seed,
        )
        all_ids = [ln.line_id for ln in program.lines]
        c_audio = _cluster(
            [features[i].timbre_embedding for i in all_ids],
            all_ids,
            cfg,
            cfg.k_max_audio,
            audio_seed,
        )
        registry = build_registry(program.lines, features, c_visual, c_audio)
        initial = assign_initial(program.lines, features, c_visual, registry)

        if cfg.modality == "AVT":
            scorer = ReplayScorer(turn_scores or {})
            w = cfg.turn_w
        else:
            scorer = NeutralScorer()
            w = 0.0
        decision_list = detect_turns(program, features, scorer, w, cfg.turn_window)
        groups = segment_groups(program, decision_list)
        registry, assignments, verdict_list = supplement(
            groups,
            initial,
            features,
            registry,
            cfg.supplement_eta,
            cfg.supplement_epsilon,
        )
        decisions = tuple(decision_list)
        verdicts = tuple(verdict_list)

    assert all(ln.line_id in assignments for ln in program.lines)
    metrics = (
        evaluate(program, assignments, registry, decisions, truth, cfg)
        if truth is not None
        else None
    )
    return DiarizationResult(
        program=program,
        config=cfg,
        assignments=assignments,
        registry=registry,
        decisions=decisions,
        verdicts=verdicts,
        metrics=metrics,
    )


def evaluate(
    program: Program,
    assignments: dict[int, Assignment],
    registry: SpeakerRegistry,
    decisions: Sequence[TurnDecision],
    truth: GroundTruth,
    cfg: PipelineConfig,
) -> MetricReport:
    """Score assignments against ground truth."""
    missing = [ln.line_id for ln in program.lines if ln.line_id not in truth.line_speakers]
    if missing:
        raise ValueError(f"ground truth does not cover lines {missing[:5]}")
    spans = [(float(ln.start), float(ln.end)) for ln in program.lines]
    ref = timeline_from_lines(spans, [truth.line_speakers[ln.line_id] for ln in program.lines])
    hyp = timeline_from_lines(spans, [assignments[ln.line_id].speaker.id for ln in program.lines])
    mode, collar = cfg.metrics_mode, cfg.metrics_collar
    auc: float | None = None
    f1: float | None = None
    if decisions:
        labeled = [
            (
                d.fused,
                truth.line_speakers[d.left_line_id] == truth.line_speakers[d.right_line_id],
            )
            for d in decisions
        ]
        auc, f1 = turn_metrics(labeled)
    return MetricReport(
        der=der(ref, hyp, mode=mode, collar=collar),
        jer=jer(ref, hyp),
        spke=spke(ref, hyp, mode=mode, collar=collar),
        turn_auc=auc,
        turn_f1=f1,
        ref_speakers=truth.n_speakers,
        hyp_speakers=len({a.speaker.id for a in assignments.values()}),
        supplemented_speakers=len(registry.supplemented()),
    )


def sweep(
    cfg: PipelineConfig,
    param: str,
    grid: Sequence[float],
    program: Program | None = None,
    features: dict[int, LineFeatures] | None = None,
    turn_scores: dict[tuple[int, int], TurnScoreRecord] | None = None,
    truth: GroundTruth | None = None,
) -> list[dict[str, float | None]]:
    """One pipeline run per grid value of ``w`` or ``eta``, same seed.

    Requires ground truth; returns one row per value with DER, JER, turn F1
    and the supplemented-speaker count.
    """
    if param not in ("w", "eta"):
        raise ValueError(f"sweep parameter must be 'w' or 'eta', got {param!r}")
    rows = []
    for value in grid:
        if param == "w":
            run_cfg = replace(cfg, turn_w=float(value))
        else:
            run_cfg = replace(cfg, supplement_eta=float(value))
        result = run_pipeline(run_cfg, program, features, turn_scores, truth)
        if result.metrics is None:
            raise ValueError("sweep requires ground truth")
        m = result.metrics
        rows.append(
            {
                "value": float(value),
                "der": m.der,
                "jer": m.jer,
                "turn_f1": m.turn_f1,
                "supplemented_speakers": m.supplemented_speakers,
            }
        )
    return rows


def write_sweep_csv(rows: Sequence[dict], sink: IO[str]) -> None:
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(["value", "der", "jer", "turn_f1", "supplemented_speakers"])
    for row in rows:
        writer.writerow(
            [
                repr(row["value"]),
                repr(row["der"]),
                repr(row["jer"]),
                "" if row["turn_f1"] is None else repr(row["turn_f1"]),
                row["supplemented_speakers"],
            ]
        )


def write_metrics_csv(report: MetricReport, sink: IO[str]) -> None:
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(["metric", "value"])
    for name, value in report.rows():
        writer.writerow([name, value])


def render_report(result: DiarizationResult) -> str:
    """Human-readable run summary (deterministic; no timestamps)."""
    lines = [f"program: {result.program.program_id}"]
    lines.append(f"lines: {len(result.program)}")
    lines.append("config:")
    for key, value in config_items(result.config):
        lines.append(f"  {key} = {value}")
    anchored = len(result.registry.visual_anchored())
    supplemented = len(result.registry.supplemented())
    lines.append(f"speakers.anchored: {anchored}")
    lines.append(f"speakers.supplemented: {supplemented}")
    lines.append(f"speakers.assigned: {result.speaker_count()}")
    stage_counts = Counter(a.stage.value for a in result.assignments.values())
    lines.append(
        "assignments.by_stage: "
        + " ".join(f"{k}={v}" for k, v in sorted(stage_counts.items()))
    )
    lines.append(f"groups: {len(result.verdicts)}")
    for v in result.verdicts:
        lines.append(
            f"  group {v.group.first}..{v.group.last} "
            f"main={v.main_speaker} novelty={v.novelty!r} "
            f"action={v.action} speaker={v.assigned_speaker}"
        )
    if result.metrics is not None:
        lines.append("metrics:")
        for name, value in result.metrics.rows():
            lines.append(f"  {name} = {value}")
    return "\n".join(lines) + "\n"


def write_outputs(result: DiarizationResult, out_dir: Path) -> dict[str, Path]:
    """Write annotation CSV, RTTM, report, and metrics CSV into a directory."""
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "annotation": out_dir / "annotation.csv",
        "rttm": out_dir / "hypothesis.rttm",
        "report": out_dir / "report.txt",
    }
    with open(paths["annotation"], "w", encoding="utf-8", newline="") as fh:
        write_annotation(result.program, result.assignments, fh)
    paths["rttm"].write_text(
        write_rttm(result.program, result.assignments, result.program.program_id),
        encoding="utf-8",
    )
    paths["report"].write_text(render_report(result), encoding="utf-8")
    if result.metrics is not None:
        paths["metrics"] = out_dir / "metrics.csv"
        with open(paths["metrics"], "w", encoding="utf-8", newline="") as fh:
            write_metrics_csv(result.metrics, fh)
    return paths
