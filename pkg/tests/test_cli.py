import csv
import json

import numpy as np
import pytest

from pulsealign import cli


def run(argv):
    return cli.main([str(a) for a in argv])


def synth_pair(tmp_path, seed=3, n_frames=400, n_sensor=12_000,
               duration_match=True):
    """Write a matched frame + sensor capture pair via the synth subcommand."""
    frames = tmp_path / "frames.csv"
    sensor = tmp_path / "sensor.csv"
    assert run(["synth", "--kind", "frame", "--out", frames,
                "--n", n_frames, "--rate-hz", 30,
                "--jitter-std-ms", 3.0, "--drop-rate", 0.002,
                "--seed", seed]) == 0
    assert run(["synth", "--kind", "sensor", "--out", sensor,
                "--n", n_sensor, "--rate-hz", 1000,
                "--jitter-std-ms", 0.15, "--drop-rate", 0.0005,
                "--seed", seed + 1, "--hr-bpm", 72,
                "--noise-std", 0.3]) == 0
    return frames, sensor


class TestSynthCommand:
    def test_writes_loadable_csv_and_truth(self, tmp_path):
        out = tmp_path / "s.csv"
        truth = tmp_path / "t.json"
        assert run(["synth", "--kind", "sensor", "--out", out, "--truth",
                    truth, "--n", 1000, "--rate-hz", 1000,
                    "--jitter-std-ms", 0.2, "--drop-rate", 0.01,
                    "--seed", 5]) == 0
        from pulsealign.ingest import load_stream
        stream = load_stream(out, "sensor")
        sidecar = json.loads(truth.read_text())
        assert len(stream) + len(sidecar["dropped_slots"]) == 1000
        assert sidecar["T_true_s"] == pytest.approx(0.001)

    def test_deterministic(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        args = ["--kind", "frame", "--n", 500, "--rate-hz", 30,
                "--jitter-std-ms", 5, "--seed", 9]
        assert run(["synth", "--out", a] + args) == 0
        assert run(["synth", "--out", b] + args) == 0
        assert a.read_bytes() == b.read_bytes()


class TestStatsCommand:
    def test_table_format(self, tmp_path, capsys):
        frames, _ = synth_pair(tmp_path)
        capsys.readouterr()  # drop synth output
        assert run(["stats", frames, "--kind", "frame"]) == 0
        out = capsys.readouterr().out.splitlines()
        assert out[0].split() == ["mean_ms", "std_ms", "n_gaps"]
        mean_ms = float(out[1].split()[0])
        assert mean_ms == pytest.approx(33.33, abs=1.0)
        # milliseconds with three decimals, comparison-table style
        assert len(out[1].split()[0].rsplit(".", 1)[1]) == 3


class TestDejitterCommand:
    def test_report_and_corrected_stream(self, tmp_path, capsys):
        frames, _ = synth_pair(tmp_path)
        out = tmp_path / "frames_dj.csv"
        report = tmp_path / "report.json"
        assert run(["dejitter", frames, "--kind", "frame", "--out", out,
                    "--report", report, "--report-drops",
                    "--delta-ms", 500]) == 0
        rep = json.loads(report.read_text())
        assert {"T_s", "rate_hz", "n_excluded", "delta_s", "drops",
                "gaps_before", "gaps_after"} <= set(rep)
        assert rep["gaps_after"]["std_ms"] < rep["gaps_before"]["std_ms"]
        printed = capsys.readouterr().out
        assert printed.count("drop k=") == len(rep["drops"])
        from pulsealign.ingest import load_stream
        corrected = load_stream(out, "frame")
        assert (np.diff(corrected.timestamps) > 0).all()

    def test_exclusions_flag(self, tmp_path):
        frames, _ = synth_pair(tmp_path)
        excl = tmp_path / "excl.csv"
        excl.write_text("start_us,end_us\n0,2000000\n")
        report = tmp_path / "r.json"
        assert run(["dejitter", frames, "--kind", "frame",
                    "--exclusions", excl, "--report", report,
                    "--delta-ms", 500]) == 0
        rep = json.loads(report.read_text())
        assert rep["removed_by_exclusions"] > 0


class TestCompareCommand:
    def test_csv_rows(self, tmp_path, capsys):
        frames, _ = synth_pair(tmp_path)
        capsys.readouterr()  # drop synth output
        assert run(["compare", frames, "--kind", "frame",
                    "--delta-ms", 500]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "method,mean_ms,std_ms"
        methods = [l.split(",")[0] for l in lines[1:]]
        assert methods == ["raw", "kalman", "dejitter", "theoretical"]
        theoretical = lines[4].split(",")
        assert float(theoretical[2]) == 0.0


class TestPipeline:
    def test_all_artifacts_written(self, tmp_path):
        frames, sensor = synth_pair(tmp_path)
        out_dir = tmp_path / "out"
        assert run(["pipeline", "--frames", frames, "--sensor", sensor,
                    "--out-dir", out_dir, "--delta-ms", 500,
                    "--sg-window", 101]) == 0
        paths = cli.pipeline_paths(str(out_dir))
        for key, p in paths.items():
            assert (out_dir / p.split("/")[-1]).exists(), key
        summary = json.loads((out_dir / "summary.json").read_text())
        annos = summary["annotations"]
        with open(out_dir / "annotations.csv") as fh:
            n_rows = sum(1 for _ in csv.reader(fh)) - 1
        assert n_rows == annos["count"]
        # every frame is annotated or counted as skipped head
        with open(out_dir / "frames_dejittered.csv") as fh:
            n_frames = sum(1 for _ in csv.reader(fh)) - 1
        assert annos["count"] + annos["skipped_head"] == n_frames
        assert "gap_statistics" in summary
        assert summary["gap_statistics"]["frame"]["theoretical"]["std_ms"] == 0

    def test_equals_staged_subcommands(self, tmp_path):
        frames, sensor = synth_pair(tmp_path)
        pipe_dir = tmp_path / "pipe"
        assert run(["pipeline", "--frames", frames, "--sensor", sensor,
                    "--out-dir", pipe_dir, "--delta-ms", 500]) == 0

        stage_dir = tmp_path / "staged"
        stage_dir.mkdir()
        f_dj = stage_dir / "frames_dj.csv"
        s_dj = stage_dir / "sensor_dj.csv"
        proc = stage_dir / "processed.csv"
        annos = stage_dir / "annotations.csv"
        overlay = stage_dir / "overlay.csv"
        assert run(["dejitter", frames, "--kind", "frame", "--out", f_dj,
                    "--delta-ms", 500]) == 0
        assert run(["dejitter", sensor, "--kind", "sensor", "--out", s_dj,
                    "--delta-ms", 500]) == 0
        assert run(["filter", s_dj, "--out", proc]) == 0
        assert run(["annotate", f_dj, proc, "--raw-frames", frames,
                    "--out", annos, "--overlay", overlay]) == 0

        assert annos.read_bytes() == (pipe_dir / "annotations.csv").read_bytes()
        assert proc.read_bytes() == (pipe_dir / "processed_signal.csv").read_bytes()
        assert overlay.read_bytes() == (pipe_dir / "overlay.csv").read_bytes()

    def test_deterministic_artifacts(self, tmp_path):
        frames, sensor = synth_pair(tmp_path)
        dirs = [tmp_path / "r1", tmp_path / "r2"]
        for d in dirs:
            assert run(["pipeline", "--frames", frames, "--sensor", sensor,
                        "--out-dir", d, "--delta-ms", 500]) == 0
        for name in ["annotations.csv", "processed_signal.csv", "overlay.csv",
                     "frames_dejittered.csv", "sensor_dejittered.csv"]:
            assert (dirs[0] / name).read_bytes() == (dirs[1] / name).read_bytes()

    def test_missing_sensor_file(self, tmp_path, capsys):
        frames, _ = synth_pair(tmp_path)
        missing = tmp_path / "nope.csv"
        rc = run(["pipeline", "--frames", frames, "--sensor", missing,
                  "--out-dir", tmp_path / "o", "--delta-ms", 500])
        assert rc == 1
        assert "nope.csv" in capsys.readouterr().err

    def test_bad_cutoff_fails_filter_stage_atomically(self, tmp_path, capsys):
        frames, sensor = synth_pair(tmp_path)
        out_dir = tmp_path / "out2"
        rc = run(["pipeline", "--frames", frames, "--sensor", sensor,
                  "--out-dir", out_dir, "--delta-ms", 500,
                  "--band-high-hz", 600])
        assert rc == 1
        err = capsys.readouterr().err
        assert "filter" in err
        assert err.strip().count("\n") == 0  # one diagnostic line
        assert not (out_dir / "annotations.csv").exists()

    def test_config_file_with_flag_override(self, tmp_path):
        frames, sensor = synth_pair(tmp_path)
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({
            "frames_csv": str(frames),
            "sensor_csv": str(sensor),
            "out_dir": str(tmp_path / "cfgout"),
            "frame_dejitter": {"m": 3.0, "delta_ms": 500.0},
            "sensor_dejitter": {"m": 3.0, "delta_ms": 500.0},
            "savgol": {"window": 51, "polyorder": 2},
            "band_low_hz": 0.7,
            "band_high_hz": 2.5,
        }))
        assert run(["pipeline", "--config", cfg_path,
                    "--sg-window", 101]) == 0
        assert (tmp_path / "cfgout" / "summary.json").exists()

    def test_unknown_config_key_rejected(self, tmp_path, capsys):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({"frames": "x.csv"}))
        rc = run(["pipeline", "--config", cfg_path])
        assert rc == 1
        assert "unknown config" in capsys.readouterr().err


class TestUsageErrors:
    def test_unknown_subcommand_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            run(["frobnicate"])
        assert exc.value.code == 2

    def test_missing_required_flag_exits_2(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            run(["stats", tmp_path / "x.csv"])  # --kind missing
        assert exc.value.code == 2

    def test_data_error_exits_1(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("index,ts_us\n0,5\n1,3\n")
        assert run(["stats", bad, "--kind", "frame"]) == 1
        assert "decreasing timestamp at line 3" in capsys.readouterr().err
