"""Command-line interface: run, sweep, evaluate, synth."""

from __future__ import annotations

import argparse
import io
import logging
import sys
from pathlib import Path

from .config import PipelineConfig, config_from_mapping, load_config
from .features import read_truth, save_features, save_turn_scores, synth_program, write_truth
from .features import SynthConfig
from .metrics import der, jer, spke, timeline_from_lines, LabeledTimeline
from .pipeline import run_pipeline, sweep, write_outputs, write_sweep_csv
from .subtitle_io import parse_rttm, parse_srt, read_annotation, write_srt

logger = logging.getLogger(__name__)


def _add_config_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="config file with 'key = value' lines")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override any dotted config key (repeatable)",
    )
    parser.add_argument("--subtitles", help="input SRT file")
    parser.add_argument("--features", help="feature JSONL file")
    parser.add_argument("--turn-scores", help="turn-score JSONL file")
    parser.add_argument("--truth", help="ground-truth CSV file")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--modality", choices=("A", "AV", "AVT"))
    parser.add_argument("--seed", type=int, help="rng seed")


def _build_config(args: argparse.Namespace) -> PipelineConfig:
    cfg = PipelineConfig()
    if args.config:
        cfg = load_config(args.config, cfg)
    overrides: dict[str, str] = {}
    for item in args.overrides:
        if "=" not in item:
            raise ValueError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    if args.subtitles:
        overrides["paths.subtitles"] = args.subtitles
    if args.features:
        overrides["paths.features"] = args.features
    if args.turn_scores:
        overrides["paths.turn_scores"] = args.turn_scores
    if args.truth:
        overrides["paths.ground_truth"] = args.truth
    if args.out:
        overrides["paths.output_dir"] = args.out
    if args.modality:
        overrides["modality"] = args.modality
    if args.seed is not None:
        overrides["rng_seed"] = str(args.seed)
    return config_from_mapping(overrides, cfg)


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = _build_config(args)
    result = run_pipeline(cfg)
    if cfg.output_dir:
        paths = write_outputs(result, Path(cfg.output_dir))
        for name, path in sorted(paths.items()):
            print(f"{name}: {path}")
    summary = (
        f"program={result.program.program_id} lines={len(result.program)} "
        f"speakers={result.speaker_count()} "
        f"supplemented={len(result.registry.supplemented())}"
    )
    if result.metrics is not None:
        summary += f" der={result.metrics.der!r} jer={result.metrics.jer!r}"
    print(summary)
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _build_config(args)
    grid = [float(v) for v in args.grid.split(",") if v.strip() != ""]
    if not grid:
        raise ValueError("sweep grid is empty")
    rows = sweep(cfg, args.param, grid)
    out = Path(cfg.output_dir or ".") / f"sweep_{args.param}.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="") as fh:
        write_sweep_csv(rows, fh)
    print(f"sweep table: {out}")
    for row in rows:
        print(
            f"{args.param}={row['value']} der={row['der']!r} jer={row['jer']!r} "
            f"turn_f1={row['turn_f1']!r} supplemented={row['supplemented_speakers']}"
        )
    return 0


def _timeline_from_rttm(path: str) -> LabeledTimeline:
    records = parse_rttm(Path(path).read_text(encoding="utf-8"))
    return LabeledTimeline(
        segments=tuple(
            (r.onset * 1000.0, (r.onset + r.duration) * 1000.0, r.speaker_label)
            for r in records
        )
    )


def _cmd_evaluate(args: argparse.Namespace) -> int:
    if args.ref_rttm or args.hyp_rttm:
        if not (args.ref_rttm and args.hyp_rttm):
            raise ValueError("--ref-rttm and --hyp-rttm must be given together")
        ref = _timeline_from_rttm(args.ref_rttm)
        hyp = _timeline_from_rttm(args.hyp_rttm)
        mode = "timeline"
    else:
        if not (args.annotation and args.truth):
            raise ValueError("evaluate needs --annotation and --truth (or two RTTMs)")
        program, assignments = read_annotation(
            Path(args.annotation).read_text(encoding="utf-8")
        )
        truth = read_truth(args.truth)
        missing = [ln.line_id for ln in program.lines if ln.line_id not in truth.line_speakers]
        if missing:
            raise ValueError(f"truth does not cover lines {missing[:5]}")
        spans = [(float(ln.start), float(ln.end)) for ln in program.lines]
        ref = timeline_from_lines(
            spans, [truth.line_speakers[ln.line_id] for ln in program.lines]
        )
        hyp = timeline_from_lines(
            spans, [assignments[ln.line_id].speaker.id for ln in program.lines]
        )
        mode = args.mode
    d = der(ref, hyp, mode=mode, collar=args.collar)
    j = jer(ref, hyp)
    s = spke(ref, hyp, mode=mode, collar=args.collar)
    print(f"der = {d!r}")
    print(f"jer = {j!r}")
    print(f"spke = {s!r}")
    print(f"ref_speakers = {len(ref.labels())}")
    print(f"hyp_speakers = {len(hyp.labels())}")
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    cfg = SynthConfig(
        n_speakers=args.n_speakers,
        n_lines=args.n_lines,
        embedding_dim=args.dim,
        face_noise_std=args.face_noise,
        timbre_noise_std=args.timbre_noise,
        offscreen_rate=args.offscreen_rate,
        unregistered_offscreen_speakers=args.unregistered,
        turn_score_accuracy=args.scorer_accuracy,
        rng_seed=args.seed,
    )
    program, features, scores, truth = synth_program(cfg, program_id=args.program_id)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    srt_path = out / "program.srt"
    buf = io.StringIO()
    write_srt(program, buf)
    srt_path.write_text(buf.getvalue(), encoding="utf-8")
    save_features(features, out / "features.jsonl")
    save_turn_scores(scores, out / "turn_scores.jsonl")
    write_truth(truth, out / "truth.csv")
    print(
        f"wrote {len(program)} lines, {truth.n_speakers} speakers "
        f"({len(truth.offscreen_only)} never on screen) to {out}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="subdiar",
        description="Deterministic multimodal speaker diarization for subtitle-timed media",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="diarize one program")
    _add_config_args(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="hyperparameter sweep over w or eta")
    _add_config_args(p_sweep)
    p_sweep.add_argument("--param", choices=("w", "eta"), required=True)
    p_sweep.add_argument("--grid", required=True, help="comma-separated values")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_eval = sub.add_parser("evaluate", help="score a result against ground truth")
    p_eval.add_argument("--annotation", help="annotation CSV from a run")
    p_eval.add_argument("--truth", help="ground-truth CSV")
    p_eval.add_argument("--ref-rttm", help="reference RTTM (timeline mode)")
    p_eval.add_argument("--hyp-rttm", help="hypothesis RTTM (timeline mode)")
    p_eval.add_argument("--mode", choices=("line", "timeline"), default="line")
    p_eval.add_argument("--collar", type=float, default=0.0, help="collar in seconds")
    p_eval.set_defaults(func=_cmd_evaluate)

    p_synth = sub.add_parser("synth", help="generate a synthetic labeled program")
    p_synth.add_argument("--out", required=True, help="output directory")
    p_synth.add_argument("--n-speakers", type=int, required=True)
    p_synth.add_argument("--n-lines", type=int, required=True)
    p_synth.add_argument("--dim", type=int, default=64)
    p_synth.add_argument("--face-noise", type=float, default=0.0)
    p_synth.add_argument("--timbre-noise", type=float, default=0.0)
    p_synth.add_argument("--offscreen-rate", type=float, default=0.0)
    p_synth.add_argument("--unregistered", type=int, default=0)
    p_synth.add_argument("--scorer-accuracy", type=float, default=1.0)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--program-id", default="synthetic")
    p_synth.set_defaults(func=_cmd_synth)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
