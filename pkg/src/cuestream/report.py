"""Modality comparison report: recall and rank distance per channel subset.

Each subset of the session's channels is run through detection in top-k
mode (k taken from the ground truth) and scored against the truth with
both metrics. With several sessions the table carries mean and standard
deviation (population) across sessions.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .detector import DetectorConfig, ThresholdMode, extract_top_k_peaks, run_detector
from .evaluation import MatchingConfig, RankedCueList, kendall_min_distance, recall
from .features import ChannelSchema, FeatureFrame, resample_and_batch, select_channels, subset_schema


@dataclass(frozen=True)
class SessionData:
    """One recorded session: its frames and annotated cue list."""

    schema: ChannelSchema
    frames: list[FeatureFrame]
    truth: RankedCueList


@dataclass(frozen=True)
class ModalityResult:
    channels: tuple[str, ...]
    recalls: tuple[float, ...]
    distances: tuple[float, ...]

    @property
    def recall_mean(self) -> float:
        return float(np.mean(self.recalls))

    @property
    def recall_std(self) -> float:
        return float(np.std(self.recalls))

    @property
    def distance_mean(self) -> float:
        return float(np.mean(self.distances))

    @property
    def distance_std(self) -> float:
        return float(np.std(self.distances))


def evaluate_subset(
    session: SessionData,
    channels: Sequence[str],
    cfg: DetectorConfig,
    matching: MatchingConfig,
) -> tuple[float, float]:
    """Detect on one channel subset and score against the session truth."""
    target = subset_schema(session.schema, list(channels))
    frames = select_channels(session.frames, session.schema, target)
    batches = resample_and_batch(frames, cfg.sampling)
    k = session.truth.k
    run_cfg = DetectorConfig(
        engine=cfg.engine,
        sampling=cfg.sampling,
        threshold=ThresholdMode.top_k(k),
        outlier_count=cfg.outlier_count,
        threshold_step=cfg.threshold_step,
    )
    _, trace = run_detector(batches, run_cfg)
    detected = extract_top_k_peaks(
        trace, k=k, warmup=cfg.sampling.warmup, nms_window=cfg.sampling.batch_duration
    )
    r = recall(detected, session.truth, matching)
    d = kendall_min_distance(detected, session.truth, matching)
    return r, d


def modality_report(
    sessions: Sequence[SessionData],
    channel_subsets: Sequence[Sequence[str]],
    cfg: DetectorConfig,
    matching: MatchingConfig = MatchingConfig(),
) -> list[ModalityResult]:
    """Run every subset over every session; aggregate the two metrics."""
    if not sessions:
        raise ValueError("at least one session is required")
    if not channel_subsets:
        raise ValueError("at least one channel subset is required")
    results = []
    for subset in channel_subsets:
        recalls = []
        distances = []
        for session in sessions:
            r, d = evaluate_subset(session, subset, cfg, matching)
            recalls.append(r)
            distances.append(d)
        results.append(
            ModalityResult(
                channels=tuple(subset),
                recalls=tuple(recalls),
                distances=tuple(distances),
            )
        )
    return results


def report_csv(results: Sequence[ModalityResult], matching: MatchingConfig) -> str:
    """Render results as CSV, one row per subset.

    The header comment states the cue-identity rule: two timestamps
    denote the same cue iff they lie within the matching tolerance.
    """
    out = io.StringIO()
    out.write(
        f"# cue identity: timestamps within {matching.tolerance} s are matched greedily\n"
    )
    out.write("posture,gaze,face,recall_mean,recall_std,kendall_mean,kendall_std\n")
    for res in results:
        flags = [str(int(c in res.channels)) for c in ("posture", "gaze", "face")]
        out.write(
            ",".join(
                flags
                + [
                    f"{res.recall_mean:.4f}",
                    f"{res.recall_std:.4f}",
                    f"{res.distance_mean:.4f}",
                    f"{res.distance_std:.4f}",
                ]
            )
            + "\n"
        )
    return out.getvalue()
