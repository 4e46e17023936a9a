"""Modality report tests on engineered multi-channel change sessions."""

from __future__ import annotations

import numpy as np
import pytest

from cuestream.detector import DetectorConfig
from cuestream.evaluation import MatchingConfig
from cuestream.features import SchemaError, schema_from_names
from cuestream.report import SessionData, evaluate_subset, modality_report, report_csv
from cuestream.synthetic import ScenarioSpec, SegmentSpec, baseline_profile, synthesize_session

PG = schema_from_names(["posture", "gaze"])


def channel_specific_session(seed: int) -> SessionData:
    """Two changes, one per channel: posture jumps at 420, gaze at 780."""
    means, stds = baseline_profile(PG)
    posture = PG.slices["posture"]
    gaze = PG.slices["gaze"]
    m1 = means.copy()
    m1[posture] += 5.0 * stds[posture]
    m2 = m1.copy()
    m2[gaze] += 5.0 * stds[gaze]
    scenario = ScenarioSpec(
        schema=PG,
        duration=1200.0,
        segments=(
            SegmentSpec(start=0.0, means=means, stds=stds),
            SegmentSpec(start=420.0, means=m1, stds=stds),
            SegmentSpec(start=780.0, means=m2, stds=stds),
        ),
    )
    frames, truth = synthesize_session(scenario, seed=seed)
    return SessionData(schema=PG, frames=frames, truth=truth)


class TestEvaluateSubset:
    def test_full_channels_recover_both_changes(self):
        session = channel_specific_session(seed=0)
        r, d = evaluate_subset(session, ["posture", "gaze"], DetectorConfig(), MatchingConfig())
        assert r == 1.0
        assert d <= 1.0  # both matched; only the relative order may differ

    def test_single_channel_misses_the_other_change(self):
        session = channel_specific_session(seed=0)
        r_posture, _ = evaluate_subset(session, ["posture"], DetectorConfig(), MatchingConfig())
        assert r_posture <= 0.5


class TestModalityReport:
    def test_full_subset_dominates_projections(self):
        sessions = [channel_specific_session(seed) for seed in range(3)]
        subsets = [["posture"], ["gaze"], ["posture", "gaze"]]
        results = modality_report(sessions, subsets, DetectorConfig())
        by_channels = {r.channels: r for r in results}
        full = by_channels[("posture", "gaze")]
        assert full.recall_mean >= by_channels[("posture",)].recall_mean
        assert full.recall_mean >= by_channels[("gaze",)].recall_mean
        assert full.recall_mean == 1.0

    def test_aggregates_across_sessions(self):
        sessions = [channel_specific_session(seed) for seed in range(2)]
        results = modality_report(sessions, [["posture", "gaze"]], DetectorConfig())
        assert len(results[0].recalls) == 2
        assert results[0].recall_std == pytest.approx(np.std(results[0].recalls))

    def test_empty_subset_is_a_schema_error(self):
        sessions = [channel_specific_session(seed=0)]
        with pytest.raises(SchemaError):
            modality_report(sessions, [[]], DetectorConfig())

    def test_requires_inputs(self):
        with pytest.raises(ValueError):
            modality_report([], [["posture"]], DetectorConfig())
        with pytest.raises(ValueError):
            modality_report([channel_specific_session(0)], [], DetectorConfig())


class TestReportCsv:
    def test_layout(self):
        sessions = [channel_specific_session(seed=0)]
        results = modality_report(
            sessions, [["posture"], ["posture", "gaze"]], DetectorConfig()
        )
        text = report_csv(results, MatchingConfig())
        lines = text.strip().split("\n")
        assert lines[0].startswith("# cue identity: timestamps within 30.0 s")
        assert lines[1] == "posture,gaze,face,recall_mean,recall_std,kendall_mean,kendall_std"
        assert lines[2].startswith("1,0,0,")
        assert lines[3].startswith("1,1,0,")
        assert len(lines) == 4
