"""CLI subcommand tests driven through main()."""

from __future__ import annotations

import csv
import json

import pytest

from cuestream.cli import main
from cuestream.detector import load_cues
from cuestream.evaluation import load_ground_truth


@pytest.fixture()
def session_files(tmp_path):
    session = str(tmp_path / "session.jsonl")
    truth = str(tmp_path / "truth.json")
    code = main(
        [
            "synth",
            "--output", session,
            "--truth", truth,
            "--duration", "900",
            "--shift-at", "450",
            "--seed", "5",
        ]
    )
    assert code == 0
    return session, truth


class TestSynth:
    def test_writes_session_and_truth(self, session_files):
        session, truth = session_files
        with open(session) as fh:
            header = json.loads(fh.readline())
        assert header["schema"] == {"posture": True, "gaze": True, "face": False}
        assert load_ground_truth(truth).times == (450.0,)

    def test_stationary_truth_is_empty(self, tmp_path):
        session = str(tmp_path / "s.jsonl")
        truth = str(tmp_path / "t.json")
        assert main(["synth", "--output", session, "--truth", truth,
                     "--duration", "120", "--stationary"]) == 0
        assert load_ground_truth(truth).times == ()


class TestDetect:
    def test_writes_cues_and_trace(self, session_files, tmp_path, capsys):
        session, _ = session_files
        cues_path = str(tmp_path / "cues.json")
        trace_path = str(tmp_path / "trace.csv")
        code = main(
            [
                "detect",
                "--input", session,
                "--output", cues_path,
                "--trace", trace_path,
                "--threshold", "auto",
                "--warmup-seconds", "180",
            ]
        )
        assert code == 0
        assert "scored 29 batches" in capsys.readouterr().out
        cues = load_cues(cues_path)
        assert any(abs(c.time - 450.0) <= 30.0 for c in cues)
        rows = list(csv.reader(open(trace_path)))
        assert rows[0] == ["time", "outlierness"]
        assert len(rows) == 30

    def test_topk_mode(self, session_files, tmp_path):
        session, _ = session_files
        cues_path = str(tmp_path / "cues.json")
        code = main(
            ["detect", "--input", session, "--output", cues_path,
             "--threshold", "topk:2"]
        )
        assert code == 0
        cues = load_cues(cues_path)
        assert len(cues) == 2
        assert all(c.threshold is None for c in cues)

    def test_determinism_across_runs(self, session_files, tmp_path):
        session, _ = session_files
        a = str(tmp_path / "a.json")
        b = str(tmp_path / "b.json")
        for path in (a, b):
            assert main(["detect", "--input", session, "--output", path]) == 0
        assert open(a, "rb").read() == open(b, "rb").read()


class TestEval:
    def test_metrics_json(self, session_files, tmp_path, capsys):
        session, truth = session_files
        cues_path = str(tmp_path / "cues.json")
        main(["detect", "--input", session, "--output", cues_path, "--threshold", "topk:1"])
        capsys.readouterr()
        code = main(
            ["eval", "--detected", cues_path, "--truth", truth,
             "--tolerance", "30", "--metrics", "recall"]
        )
        assert code == 0
        out = json.loads(capsys.readouterr().out)
        assert out["recall"] == 1.0

    def test_unknown_metric(self, session_files, tmp_path, capsys):
        session, truth = session_files
        cues_path = str(tmp_path / "cues.json")
        main(["detect", "--input", session, "--output", cues_path, "--threshold", "topk:1"])
        assert main(["eval", "--detected", cues_path, "--truth", truth,
                     "--metrics", "f1"]) == 2

    def test_undefined_kendall_is_a_clean_error(self, session_files, tmp_path, capsys):
        # k=10 detected against a k=1 truth: the rank distance is
        # undefined and the CLI must say so instead of crashing.
        session, truth = session_files
        cues_path = str(tmp_path / "cues.json")
        main(["detect", "--input", session, "--output", cues_path, "--threshold", "topk:10"])
        capsys.readouterr()
        assert main(["eval", "--detected", cues_path, "--truth", truth,
                     "--metrics", "recall,kendall"]) == 2
        assert "cannot compute kendall" in capsys.readouterr().err


class TestReport:
    def test_csv_over_subsets(self, tmp_path, capsys):
        session = str(tmp_path / "s.jsonl")
        truth = str(tmp_path / "t.json")
        # Two changes so the rank distance is defined (k >= 2).
        main(["synth", "--output", session, "--truth", truth, "--duration", "1200",
              "--shift-at", "420", "--shift-at", "780", "--seed", "2"])
        capsys.readouterr()
        out_path = str(tmp_path / "report.csv")
        code = main(
            [
                "report",
                "--session", session, "--truth", truth,
                "--subset", "posture", "--subset", "posture,gaze",
                "--output", out_path,
            ]
        )
        assert code == 0
        lines = open(out_path).read().strip().split("\n")
        assert lines[1] == "posture,gaze,face,recall_mean,recall_std,kendall_mean,kendall_std"
        assert len(lines) == 4
        full_row = lines[3].split(",")
        assert full_row[:3] == ["1", "1", "0"]
        assert float(full_row[3]) == 1.0  # both changes recovered

    def test_default_subsets_enumerate_channels(self, tmp_path, capsys):
        session = str(tmp_path / "s.jsonl")
        truth = str(tmp_path / "t.json")
        main(["synth", "--output", session, "--truth", truth, "--duration", "1200",
              "--shift-at", "420", "--shift-at", "780", "--seed", "3"])
        capsys.readouterr()
        assert main(["report", "--session", session, "--truth", truth]) == 0
        lines = capsys.readouterr().out.strip().split("\n")
        assert len(lines) == 2 + 3  # header comment + header + 3 subsets


class TestArgumentErrors:
    def test_mismatched_report_pairs(self, tmp_path, capsys):
        assert main(["report", "--session", "a", "--session", "b", "--truth", "t"]) == 2

    def test_bad_threshold(self, session_files):
        session, _ = session_files
        with pytest.raises(ValueError):
            main(["detect", "--input", session, "--threshold", "sometimes"])

    def test_bad_listen_address(self):
        assert main(["serve", "--listen", "9999", "--live"]) == 2
