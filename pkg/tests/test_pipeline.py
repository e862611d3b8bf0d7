import io
from dataclasses import replace
from pathlib import Path

import pytest

from conftest import partitions_equal
from subdiar.config import (
    PipelineConfig,
    config_from_mapping,
    config_items,
    load_config,
    parse_config_text,
)
from subdiar.features import SynthConfig, synth_program
from subdiar.pipeline import render_report, run_pipeline, sweep, write_outputs
from subdiar.subtitle_io import write_srt
from subdiar.features import save_features, save_turn_scores, write_truth


CLEAN = SynthConfig(
    n_speakers=5, n_lines=80, embedding_dim=64, rng_seed=101,
)
OFFSCREEN = SynthConfig(
    n_speakers=5, n_lines=100, embedding_dim=64,
    unregistered_offscreen_speakers=1, rng_seed=7,
)


class TestConfig:
    def test_defaults_match_published_settings(self):
        cfg = PipelineConfig()
        assert cfg.turn_w == 0.45
        assert cfg.supplement_eta == 0.45
        assert cfg.turn_window == 10

    def test_parse_and_override(self):
        text = """
        # comment
        modality = AV
        turn.w = 0.3   # inline comment
        clustering.method = ahc
        """
        cfg = config_from_mapping(parse_config_text(text))
        assert cfg.modality == "AV"
        assert cfg.turn_w == 0.3
        assert cfg.clustering_method == "ahc"
        over = config_from_mapping({"turn.w": "0.7"}, cfg)
        assert over.turn_w == 0.7 and over.modality == "AV"

    def test_unknown_key_rejected(self):
        with pytest.raises(ValueError):
            config_from_mapping({"nope": "1"})

    def test_invalid_values_rejected(self):
        with pytest.raises(ValueError):
            PipelineConfig(modality="X")
        with pytest.raises(ValueError):
            PipelineConfig(turn_w=1.5)
        with pytest.raises(ValueError):
            PipelineConfig(turn_window=11)

    def test_config_items_round_trip(self, tmp_path):
        cfg = PipelineConfig(modality="AV", turn_w=0.3, rng_seed=9)
        path = tmp_path / "cfg.txt"
        path.write_text(
            "\n".join(f"{k} = {v}" for k, v in config_items(cfg) if v != ""),
            encoding="utf-8",
        )
        assert load_config(path) == cfg


class TestRunPipeline:
    def test_noise_free_recovery_avt(self):
        program, feats, scores, truth = synth_program(CLEAN)
        cfg = PipelineConfig(modality="AVT")
        result = run_pipeline(cfg, program, feats, scores, truth)
        assert result.metrics.der == 0.0
        assert result.metrics.jer == 0.0

    def test_noise_free_recovery_ahc(self):
        program, feats, scores, truth = synth_program(CLEAN)
        cfg = PipelineConfig(modality="AVT", clustering_method="ahc")
        result = run_pipeline(cfg, program, feats, scores, truth)
        assert result.metrics.der == 0.0

    def test_offscreen_speaker_supplemented(self):
        program, feats, scores, truth = synth_program(OFFSCREEN)
        cfg = PipelineConfig(modality="AVT")
        result = run_pipeline(cfg, program, feats, scores, truth)
        assert result.metrics.der == 0.0
        assert len(result.registry.supplemented()) == 1

    def test_assignments_total(self):
        program, feats, scores, truth = synth_program(CLEAN)
        result = run_pipeline(PipelineConfig(), program, feats, scores, truth)
        assert sorted(result.assignments) == [ln.line_id for ln in program.lines]

    def test_modality_a_uses_audio_clusters(self):
        program, feats, scores, truth = synth_program(CLEAN)
        result = run_pipeline(PipelineConfig(modality="A"), program, feats, scores, truth)
        got = {i: a.speaker.id for i, a in result.assignments.items()}
        assert partitions_equal(got, truth.line_speakers)
        assert result.decisions == () and result.verdicts == ()

    def test_avt_with_neutral_scores_and_w0_equals_av(self):
        program, feats, _, truth = synth_program(OFFSCREEN)
        avt = run_pipeline(
            PipelineConfig(modality="AVT", turn_w=0.0), program, feats, {}, truth
        )
        av = run_pipeline(PipelineConfig(modality="AV"), program, feats, None, truth)
        assert avt.assignments == av.assignments

    def test_feature_coverage_mismatch_rejected(self):
        program, feats, scores, truth = synth_program(CLEAN)
        del feats[0]
        with pytest.raises(ValueError):
            run_pipeline(PipelineConfig(), program, feats, scores, truth)

    def test_truth_coverage_mismatch_rejected(self):
        program, feats, scores, truth = synth_program(CLEAN)
        partial = replace(
            truth,
            line_speakers={k: v for k, v in truth.line_speakers.items() if k != 0},
        )
        with pytest.raises(ValueError):
            run_pipeline(PipelineConfig(), program, feats, scores, partial)

    def test_perfect_scorer_w1_gives_turn_f1_one(self):
        noisy = replace(CLEAN, timbre_noise_std=0.3, rng_seed=5)
        program, feats, scores, truth = synth_program(noisy)
        cfg = PipelineConfig(modality="AVT", turn_w=1.0)
        result = run_pipeline(cfg, program, feats, scores, truth)
        assert result.metrics.turn_f1 == 1.0
        assert result.metrics.turn_auc == 1.0

    def test_speaker_count_bookkeeping(self):
        program, feats, scores, truth = synth_program(OFFSCREEN)
        result = run_pipeline(PipelineConfig(), program, feats, scores, truth)
        assert result.metrics.ref_speakers == truth.n_speakers
        assert result.metrics.hyp_speakers == result.speaker_count()


class TestFileRoundTrip:
    def _write_inputs(self, tmp_path, synth_cfg):
        program, feats, scores, truth = synth_program(synth_cfg)
        buf = io.StringIO()
        write_srt(program, buf)
        (tmp_path / "program.srt").write_text(buf.getvalue(), encoding="utf-8")
        save_features(feats, tmp_path / "features.jsonl")
        save_turn_scores(scores, tmp_path / "turn_scores.jsonl")
        write_truth(truth, tmp_path / "truth.csv")
        return PipelineConfig(
            subtitles=str(tmp_path / "program.srt"),
            features=str(tmp_path / "features.jsonl"),
            turn_scores=str(tmp_path / "turn_scores.jsonl"),
            ground_truth=str(tmp_path / "truth.csv"),
        )

    def test_run_from_files(self, tmp_path):
        cfg = self._write_inputs(tmp_path, CLEAN)
        result = run_pipeline(cfg)
        assert result.metrics.der == 0.0

    def test_outputs_deterministic(self, tmp_path):
        cfg = self._write_inputs(tmp_path, OFFSCREEN)
        blobs = []
        for sub in ("a", "b"):
            result = run_pipeline(cfg)
            paths = write_outputs(result, tmp_path / sub)
            blobs.append({p.name: p.read_bytes() for p in paths.values()})
        assert blobs[0] == blobs[1]

    def test_report_mentions_groups_and_metrics(self, tmp_path):
        cfg = self._write_inputs(tmp_path, OFFSCREEN)
        result = run_pipeline(cfg)
        report = render_report(result)
        assert "metrics:" in report
        assert "action=new_speaker" in report
        assert "rng_seed = 0" in report


class TestSweep:
    def test_w_grid_cardinality(self):
        program, feats, scores, truth = synth_program(CLEAN)
        rows = sweep(
            PipelineConfig(), "w", [0.0, 0.45, 1.0], program, feats, scores, truth
        )
        assert [row["value"] for row in rows] == [0.0, 0.45, 1.0]

    def test_eta_zero_has_no_supplemented_speakers(self):
        program, feats, scores, truth = synth_program(OFFSCREEN)
        rows = sweep(
            PipelineConfig(), "eta", [0.0, 0.45], program, feats, scores, truth
        )
        assert rows[0]["supplemented_speakers"] == 0
        assert rows[1]["supplemented_speakers"] == 1

    def test_unknown_param_rejected(self):
        program, feats, scores, truth = synth_program(CLEAN)
        with pytest.raises(ValueError):
            sweep(PipelineConfig(), "tau", [0.1], program, feats, scores, truth)
