from pathlib import Path

import pytest

from subdiar.cli import main


def _synth(tmp_path, **overrides):
    args = {
        "--n-speakers": "5",
        "--n-lines": "60",
        "--dim": "64",
        "--seed": "3",
    }
    args.update(overrides)
    argv = ["synth", "--out", str(tmp_path / "data")]
    for k, v in args.items():
        argv += [k, v]
    assert main(argv) == 0
    return tmp_path / "data"


class TestCli:
    def test_synth_writes_all_inputs(self, tmp_path, capsys):
        data = _synth(tmp_path)
        for name in ("program.srt", "features.jsonl", "turn_scores.jsonl", "truth.csv"):
            assert (data / name).exists()
        assert "wrote 60 lines" in capsys.readouterr().out

    def test_run_and_evaluate(self, tmp_path, capsys):
        data = _synth(tmp_path)
        out = tmp_path / "result"
        rc = main(
            [
                "run",
                "--subtitles", str(data / "program.srt"),
                "--features", str(data / "features.jsonl"),
                "--turn-scores", str(data / "turn_scores.jsonl"),
                "--truth", str(data / "truth.csv"),
                "--out", str(out),
                "--seed", "3",
            ]
        )
        assert rc == 0
        assert "der=0.0" in capsys.readouterr().out
        assert (out / "annotation.csv").exists()
        assert (out / "hypothesis.rttm").exists()
        assert (out / "report.txt").exists()
        assert (out / "metrics.csv").exists()

        rc = main(
            [
                "evaluate",
                "--annotation", str(out / "annotation.csv"),
                "--truth", str(data / "truth.csv"),
            ]
        )
        assert rc == 0
        assert "der = 0.0" in capsys.readouterr().out

    def test_evaluate_rttm_pair(self, tmp_path, capsys):
        data = _synth(tmp_path)
        out = tmp_path / "result"
        main(
            [
                "run",
                "--subtitles", str(data / "program.srt"),
                "--features", str(data / "features.jsonl"),
                "--turn-scores", str(data / "turn_scores.jsonl"),
                "--out", str(out),
            ]
        )
        capsys.readouterr()
        rc = main(
            [
                "evaluate",
                "--ref-rttm", str(out / "hypothesis.rttm"),
                "--hyp-rttm", str(out / "hypothesis.rttm"),
            ]
        )
        assert rc == 0
        assert "der = 0.0" in capsys.readouterr().out

    def test_sweep_writes_table(self, tmp_path, capsys):
        data = _synth(tmp_path)
        out = tmp_path / "sweepout"
        rc = main(
            [
                "sweep",
                "--param", "eta",
                "--grid", "0.0,0.45",
                "--subtitles", str(data / "program.srt"),
                "--features", str(data / "features.jsonl"),
                "--turn-scores", str(data / "turn_scores.jsonl"),
                "--truth", str(data / "truth.csv"),
                "--out", str(out),
            ]
        )
        assert rc == 0
        table = (out / "sweep_eta.csv").read_text(encoding="utf-8")
        assert table.splitlines()[0] == "value,der,jer,turn_f1,supplemented_speakers"
        assert len(table.splitlines()) == 3

    def test_config_file_with_cli_override(self, tmp_path, capsys):
        data = _synth(tmp_path)
        cfg = tmp_path / "cfg.txt"
        cfg.write_text(
            "\n".join(
                [
                    "modality = AV",
                    f"paths.subtitles = {data / 'program.srt'}",
                    f"paths.features = {data / 'features.jsonl'}",
                    f"paths.ground_truth = {data / 'truth.csv'}",
                ]
            ),
            encoding="utf-8",
        )
        rc = main(["run", "--config", str(cfg), "--set", "turn.w=0.0"])
        assert rc == 0

    def test_missing_input_is_nonzero_exit(self, tmp_path, capsys):
        rc = main(["run", "--subtitles", str(tmp_path / "nope.srt")])
        assert rc == 1
        assert "error:" in capsys.readouterr().err

    def test_unknown_config_key_is_nonzero_exit(self, tmp_path, capsys):
        rc = main(["run", "--set", "bogus.key=1"])
        assert rc == 1
        assert "error:" in capsys.readouterr().err
