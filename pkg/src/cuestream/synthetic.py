"""Synthetic behavioral sessions with known change points.

A scenario is a list of contiguous segments, each a Gaussian over the
feature space; segment onsets after the first are the ground-truth cue
times, ranked by their configured salience. Generation is deterministic
given a seed. When the face channel is enabled, its block of the segment
parameters is interpreted as softmax logits so generated frames always
carry a valid probability vector; the linear channels (posture, gaze)
reproduce the configured means exactly in expectation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import softmax

from .evaluation import RankedCueList
from .features import ChannelSchema, FeatureFrame


class ScenarioError(ValueError):
    """The scenario description is inconsistent."""


@dataclass(frozen=True, eq=False)
class SegmentSpec:
    """One behavioral regime: onset time and a Gaussian over M channels."""

    start: float
    means: np.ndarray
    stds: np.ndarray
    salience: float = 1.0


@dataclass(frozen=True, eq=False)
class ScenarioSpec:
    schema: ChannelSchema
    duration: float
    segments: tuple[SegmentSpec, ...]
    frame_period: float = 0.5

    def __post_init__(self):
        if self.duration <= 0:
            raise ScenarioError("duration must be > 0")
        if self.frame_period <= 0:
            raise ScenarioError("frame_period must be > 0")
        if not self.segments:
            raise ScenarioError("a scenario needs at least one segment")
        m = self.schema.dimensions
        if self.segments[0].start != 0.0:
            raise ScenarioError("the first segment must start at t=0")
        previous = -1.0
        for seg in self.segments:
            if seg.start <= previous:
                raise ScenarioError(
                    f"segments overlap: onset {seg.start} does not follow {previous}"
                )
            if seg.start >= self.duration:
                raise ScenarioError(f"segment onset {seg.start} is past the session end")
            if seg.means.shape != (m,) or seg.stds.shape != (m,):
                raise ScenarioError(f"segment parameters must have shape ({m},)")
            if np.any(seg.stds <= 0):
                raise ScenarioError("segment stds must be positive")
            previous = seg.start

    def ground_truth(self) -> RankedCueList:
        """Change timestamps ranked by salience (ties to the earlier one)."""
        changes = [(seg.salience, seg.start) for seg in self.segments[1:]]
        changes.sort(key=lambda c: (-c[0], c[1]))
        return RankedCueList(times=tuple(t for _, t in changes))


def synthesize_session(
    scenario: ScenarioSpec, seed: int
) -> tuple[list[FeatureFrame], RankedCueList]:
    """Draw one session from a scenario; deterministic for a fixed seed."""
    schema = scenario.schema
    face_slice = schema.slices.get("face")
    onsets = [seg.start for seg in scenario.segments]
    rng = np.random.default_rng(seed)
    frames: list[FeatureFrame] = []
    n_frames = int(np.floor(scenario.duration / scenario.frame_period))
    valid = (True,) * len(schema.channels)
    segment_idx = 0
    for k in range(n_frames):
        t = k * scenario.frame_period
        if t >= scenario.duration:
            break
        while segment_idx + 1 < len(onsets) and t >= onsets[segment_idx + 1]:
            segment_idx += 1
        seg = scenario.segments[segment_idx]
        values = seg.means + seg.stds * rng.standard_normal(schema.dimensions)
        if face_slice is not None:
            values[face_slice] = softmax(values[face_slice])
        frames.append(FeatureFrame(timestamp=t, values=values, valid=valid))
    return frames, scenario.ground_truth()


# -- canned scenarios ---------------------------------------------------

# Plausible seated-subject pixel geometry for the 12 tracked keypoints
# (head: nose, eyes, ears; body: neck, shoulders, elbows, wrists).
_BASE_KEYPOINTS = np.array(
    [
        [640.0, 220.0],  # nose
        [610.0, 205.0],  # left eye
        [670.0, 205.0],  # right eye
        [575.0, 225.0],  # left ear
        [705.0, 225.0],  # right ear
        [640.0, 330.0],  # neck
        [505.0, 365.0],  # left shoulder
        [775.0, 365.0],  # right shoulder
        [445.0, 500.0],  # left elbow
        [835.0, 500.0],  # right elbow
        [420.0, 625.0],  # left wrist
        [860.0, 625.0],  # right wrist
    ]
)
_GAZE_BASE = np.array([960.0, 540.0])
_FACE_BASE_LOGITS = np.array([2.0, -1.0, -1.5, -1.5, -1.0, 0.5, -0.5, -1.0])


def baseline_profile(schema: ChannelSchema) -> tuple[np.ndarray, np.ndarray]:
    """Nominal (means, stds) for a quietly seated subject."""
    means: list[np.ndarray] = []
    stds: list[np.ndarray] = []
    for channel in schema.channels:
        if channel == "posture":
            means.append(_BASE_KEYPOINTS.ravel())
            stds.append(np.full(24, 14.0))
        elif channel == "gaze":
            means.append(_GAZE_BASE)
            stds.append(np.full(2, 60.0))
        else:
            means.append(_FACE_BASE_LOGITS)
            stds.append(np.full(8, 0.4))
    return np.concatenate(means), np.concatenate(stds)


def stationary_scenario(
    schema: ChannelSchema, duration: float, frame_period: float = 0.5
) -> ScenarioSpec:
    """A single-regime session: no behavioral changes, empty ground truth."""
    means, stds = baseline_profile(schema)
    return ScenarioSpec(
        schema=schema,
        duration=duration,
        frame_period=frame_period,
        segments=(SegmentSpec(start=0.0, means=means, stds=stds),),
    )


def mean_shift_scenario(
    schema: ChannelSchema,
    duration: float,
    shift_time: float,
    shift_sigmas: float = 3.0,
    frame_period: float = 0.5,
) -> ScenarioSpec:
    """Two regimes: every dimension's mean jumps by ``shift_sigmas`` stds."""
    means, stds = baseline_profile(schema)
    return ScenarioSpec(
        schema=schema,
        duration=duration,
        frame_period=frame_period,
        segments=(
            SegmentSpec(start=0.0, means=means, stds=stds),
            SegmentSpec(start=shift_time, means=means + shift_sigmas * stds, stds=stds),
        ),
    )


def multi_shift_scenario(
    schema: ChannelSchema,
    duration: float,
    shifts: list[tuple[float, float]],
    frame_period: float = 0.5,
) -> ScenarioSpec:
    """Several regimes: ``shifts`` is a list of (onset, shift in stds).

    Each onset's salience is the magnitude of its shift, so the ground
    truth ranks larger changes first.
    """
    means, stds = baseline_profile(schema)
    segments = [SegmentSpec(start=0.0, means=means, stds=stds)]
    level = means.copy()
    for onset, sigmas in shifts:
        level = level + sigmas * stds
        segments.append(
            SegmentSpec(start=onset, means=level.copy(), stds=stds, salience=abs(sigmas))
        )
    return ScenarioSpec(
        schema=schema,
        duration=duration,
        frame_period=frame_period,
        segments=tuple(segments),
    )
