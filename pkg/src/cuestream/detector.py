"""Batchwise cue detection: warm-up handling, thresholds, cue assembly.

The first batch initializes the mixture; every later batch is scored
against the pre-update parameters, checked against the threshold, and
then folded into the model. A cue pairs the previous batch's
representative frames (one per mixture component, selected before that
batch updated the model) with the current batch's lowest-likelihood
frames, so the consumer sees "what the behavior looked like" next to
"what just changed".

Batches whose end time falls inside the warm-up period are scored and
learned from but never emit cues. Threshold changes requested mid-batch
take effect at the next batch boundary; detection decisions are
per-batch atoms.

Three threshold modes:

* ``fixed``: emit whenever the batch outlierness exceeds a constant.
* ``auto``: wait for the first post-warm-up local maximum of the trace
  (confirmed once the following batch scores lower) and adopt its value;
  no cues are emitted while pending.
* ``topk``: no online gating; after the stream ends the k most
  significant trace peaks (greedy non-maximum suppression) become cues.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .evaluation import RankedCueList
from .features import FeatureBatch, SamplingConfig
from .sdem import EngineConfig, GmmState

THRESHOLD_MORE = "more"
THRESHOLD_LESS = "less"


class ThresholdUnavailableError(RuntimeError):
    """No adjustable threshold exists (top-k mode, or auto still pending)."""


@dataclass(frozen=True)
class ThresholdMode:
    """Gate policy: fixed(value) | auto | topk(k)."""

    kind: str
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in ("fixed", "auto", "topk"):
            raise ValueError(f"unknown threshold mode {self.kind!r}")
        if self.kind == "fixed" and not np.isfinite(self.value):
            raise ValueError("fixed threshold must be finite")
        if self.kind == "topk" and (self.value < 1 or self.value != int(self.value)):
            raise ValueError("topk threshold mode needs an integer k >= 1")

    @classmethod
    def fixed(cls, value: float) -> "ThresholdMode":
        return cls(kind="fixed", value=float(value))

    @classmethod
    def auto(cls) -> "ThresholdMode":
        return cls(kind="auto")

    @classmethod
    def top_k(cls, k: int) -> "ThresholdMode":
        return cls(kind="topk", value=float(k))

    @classmethod
    def parse(cls, text: str) -> "ThresholdMode":
        """Parse the CLI form: ``auto``, ``fixed:<v>``, or ``topk:<k>``."""
        if text == "auto":
            return cls.auto()
        kind, sep, arg = text.partition(":")
        if sep and kind == "fixed":
            return cls.fixed(float(arg))
        if sep and kind == "topk":
            return cls.top_k(int(arg))
        raise ValueError(f"cannot parse threshold mode {text!r}")

    def format(self) -> str:
        if self.kind == "auto":
            return "auto"
        if self.kind == "fixed":
            return f"fixed:{self.value}"
        return f"topk:{int(self.value)}"


@dataclass(frozen=True)
class DetectorConfig:
    engine: EngineConfig = EngineConfig()
    sampling: SamplingConfig = SamplingConfig()
    threshold: ThresholdMode = ThresholdMode.auto()
    outlier_count: int = 2
    threshold_step: float = 1.10

    def __post_init__(self):
        if self.outlier_count < 1:
            raise ValueError("outlier_count must be >= 1")
        if self.threshold_step <= 1.0:
            raise ValueError("threshold_step must be > 1")


@dataclass(frozen=True)
class TracePoint:
    """One scored batch: (batch end time, mean outlierness)."""

    time: float
    outlierness: float


@dataclass(frozen=True, eq=False)
class CueFrame:
    """A frame embedded in a cue, addressable within its source batch."""

    frame_index: int
    timestamp: float
    values: np.ndarray
    valid: tuple[bool, ...]


@dataclass(frozen=True, eq=False)
class CueEvent:
    """A detected behavioral cue.

    ``representative`` holds (component id, frame) pairs chosen from the
    previous batch; ``outliers`` holds the current batch's least likely
    frames. ``threshold`` is the gate in force at emission (None in
    top-k mode, which has no online gate).
    """

    time: float
    outlierness: float
    representative: tuple[tuple[int, CueFrame], ...]
    outliers: tuple[CueFrame, ...]
    threshold: float | None


@dataclass(frozen=True)
class ThresholdAck:
    """Result of a threshold command: new value and when it applies."""

    threshold: float
    applies_from_batch: int


@dataclass(frozen=True)
class ObservedBatch:
    """Outcome of feeding one batch: trace point (None for the
    initialization batch) and the cue emitted, if any."""

    batch_index: int
    trace_point: TracePoint | None
    cue: CueEvent | None


def adjust_threshold(current: float, command: str, step: float = 1.10) -> float:
    """Apply a "more" / "less" command to a threshold.

    "more" asks for more notifications (divides the threshold by the
    step); "less" multiplies it. The step must exceed 1.
    """
    if current <= 0:
        raise ValueError(f"threshold must be positive, got {current}")
    if step <= 1.0:
        raise ValueError("step must be > 1")
    if command == THRESHOLD_MORE:
        return current / step
    if command == THRESHOLD_LESS:
        return current * step
    raise ValueError(f"unknown threshold command {command!r}")


def auto_initial_threshold(trace: Sequence[TracePoint], warmup: float) -> float | None:
    """First confirmed post-warm-up local maximum of a trace, or None.

    A candidate peak must exceed its predecessor (or open the trace) and
    is confirmed once the following point scores strictly lower.
    """
    for i in range(len(trace) - 1):
        if trace[i].time <= warmup:
            continue
        rising = i == 0 or trace[i].outlierness > trace[i - 1].outlierness
        if rising and trace[i + 1].outlierness < trace[i].outlierness:
            return trace[i].outlierness
    return None


def extract_top_k_peaks(
    trace: Sequence[TracePoint],
    k: int,
    warmup: float = 0.0,
    nms_window: float = 30.0,
) -> RankedCueList:
    """The k most significant post-warm-up trace peaks after suppression.

    Peaks are strict local maxima (boundary entries qualify against their
    single neighbor) at times beyond the warm-up. Selection is greedy by
    descending outlierness (ties to the earlier time); each selection
    suppresses remaining peaks within +/- ``nms_window`` seconds. Returns
    at most k entries, most significant first.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    n = len(trace)
    candidates = []
    for i, point in enumerate(trace):
        if point.time <= warmup:
            continue
        left_ok = i == 0 or point.outlierness > trace[i - 1].outlierness
        right_ok = i == n - 1 or point.outlierness > trace[i + 1].outlierness
        if left_ok and right_ok:
            candidates.append(point)
    candidates.sort(key=lambda p: (-p.outlierness, p.time))
    selected: list[TracePoint] = []
    for point in candidates:
        if len(selected) == k:
            break
        if any(abs(point.time - s.time) <= nms_window for s in selected):
            continue
        selected.append(point)
    return RankedCueList(times=tuple(p.time for p in selected))


@dataclass
class _BatchRecord:
    """Cached per-batch cue material for deferred top-k emission."""

    time: float
    outlierness: float
    representative: tuple[tuple[int, CueFrame], ...]
    outliers: tuple[CueFrame, ...]


class Detector:
    """Stateful per-session detector; feed batches via :meth:`observe`.

    Single logical stream: observe() calls must be serialized. Threshold
    commands may arrive between observes and are read once per batch.
    """

    def __init__(self, cfg: DetectorConfig):
        self.cfg = cfg
        self.state: GmmState | None = None
        self.trace: list[TracePoint] = []
        self.batches_seen = 0
        self._prev_representative: tuple[tuple[int, CueFrame], ...] = ()
        self._staged_threshold: float | None = (
            cfg.threshold.value if cfg.threshold.kind == "fixed" else None
        )
        self._active_threshold: float | None = None
        self._topk_records: list[_BatchRecord] = []

    @property
    def threshold(self) -> float | None:
        """The gate that will apply to the next batch (None if absent)."""
        return self._staged_threshold

    @property
    def warmup(self) -> float:
        return self.cfg.sampling.warmup

    def request_threshold(self, command: str) -> ThresholdAck:
        """Stage a "more"/"less" adjustment; applies at the next batch."""
        if self.cfg.threshold.kind == "topk":
            raise ThresholdUnavailableError("top-k mode has no adjustable threshold")
        if self._staged_threshold is None:
            raise ThresholdUnavailableError(
                "auto threshold is still pending; no threshold to adjust yet"
            )
        new = adjust_threshold(self._staged_threshold, command, self.cfg.threshold_step)
        self._staged_threshold = new
        return ThresholdAck(threshold=new, applies_from_batch=self.batches_seen + 1)

    def observe(self, batch: FeatureBatch) -> ObservedBatch:
        """Process one batch: initialize or score-gate-update."""
        self.batches_seen += 1
        self._active_threshold = self._staged_threshold
        if self.state is None:
            self.state = GmmState.initialize(batch, self.cfg.engine)
            self._prev_representative = self._representatives(batch)
            return ObservedBatch(self.batches_seen, None, None)

        outlierness = self.state.score_batch(batch)
        point = TracePoint(time=batch.end_time, outlierness=outlierness)
        self.trace.append(point)

        if self.cfg.threshold.kind == "auto" and self._staged_threshold is None:
            confirmed = auto_initial_threshold(self.trace, self.warmup)
            if confirmed is not None:
                self._staged_threshold = confirmed
                self._active_threshold = confirmed

        cue: CueEvent | None = None
        eligible = batch.end_time > self.warmup
        if self.cfg.threshold.kind == "topk":
            self._topk_records.append(
                _BatchRecord(
                    time=batch.end_time,
                    outlierness=outlierness,
                    representative=self._prev_representative,
                    outliers=self._outliers(batch),
                )
            )
        elif (
            eligible
            and self._active_threshold is not None
            and outlierness > self._active_threshold
        ):
            cue = CueEvent(
                time=batch.end_time,
                outlierness=outlierness,
                representative=self._prev_representative,
                outliers=self._outliers(batch),
                threshold=self._active_threshold,
            )

        self._prev_representative = self._representatives(batch)
        self.state.update_batch(batch)
        return ObservedBatch(self.batches_seen, point, cue)

    def finish(self) -> list[CueEvent]:
        """Emit deferred cues (top-k mode); other modes return nothing."""
        if self.cfg.threshold.kind != "topk":
            return []
        peaks = extract_top_k_peaks(
            self.trace,
            k=int(self.cfg.threshold.value),
            warmup=self.warmup,
            nms_window=self.cfg.sampling.batch_duration,
        )
        chosen = set(peaks.times)
        return [
            CueEvent(
                time=rec.time,
                outlierness=rec.outlierness,
                representative=rec.representative,
                outliers=rec.outliers,
                threshold=None,
            )
            for rec in self._topk_records
            if rec.time in chosen
        ]

    # -- internals ------------------------------------------------------

    def _representatives(self, batch: FeatureBatch) -> tuple[tuple[int, CueFrame], ...]:
        assert self.state is not None
        indices = self.state.representative_frames(batch)
        return tuple(
            (component, _cue_frame(batch, idx)) for component, idx in enumerate(indices)
        )

    def _outliers(self, batch: FeatureBatch) -> tuple[CueFrame, ...]:
        assert self.state is not None
        count = min(self.cfg.outlier_count, len(batch))
        indices = self.state.outlier_frames(batch, count)
        return tuple(_cue_frame(batch, idx) for idx in indices)


def _cue_frame(batch: FeatureBatch, index: int) -> CueFrame:
    frame = batch.frames[index]
    return CueFrame(
        frame_index=index,
        timestamp=frame.timestamp,
        values=frame.values,
        valid=frame.valid,
    )


def run_detector(
    batches: Iterable[FeatureBatch], cfg: DetectorConfig
) -> tuple[list[CueEvent], list[TracePoint]]:
    """Run the full loop over a batch sequence.

    Returns the emitted cues (in time order) and the outlierness trace,
    one point per scored batch. Fewer than two batches yield empty
    outputs.
    """
    detector = Detector(cfg)
    cues: list[CueEvent] = []
    for batch in batches:
        observed = detector.observe(batch)
        if observed.cue is not None:
            cues.append(observed.cue)
    cues.extend(detector.finish())
    return cues, detector.trace


def ranked_cues(cues: Sequence[CueEvent]) -> RankedCueList:
    """Rank cue events by descending outlierness (ties to earlier time)."""
    ordered = sorted(cues, key=lambda c: (-c.outlierness, c.time))
    return RankedCueList(times=tuple(c.time for c in ordered))


# -- serialization ------------------------------------------------------


def cue_frame_payload(frame: CueFrame) -> dict:
    return {
        "frame_index": frame.frame_index,
        "t": frame.timestamp,
        "valid": list(frame.valid),
        "values": [float(v) for v in frame.values],
    }


def cue_payload(cue: CueEvent) -> dict:
    """JSON-ready cue object (stable key order for reproducible files)."""
    return {
        "time": cue.time,
        "outlierness": cue.outlierness,
        "threshold": cue.threshold,
        "representative": [
            dict(component=component, **cue_frame_payload(frame))
            for component, frame in cue.representative
        ],
        "outliers": [cue_frame_payload(frame) for frame in cue.outliers],
    }


def cue_from_payload(obj: dict) -> CueEvent:
    def frame(o: dict) -> CueFrame:
        return CueFrame(
            frame_index=int(o["frame_index"]),
            timestamp=float(o["t"]),
            values=np.asarray(o["values"], dtype=float),
            valid=tuple(bool(v) for v in o["valid"]),
        )

    return CueEvent(
        time=float(obj["time"]),
        outlierness=float(obj["outlierness"]),
        threshold=None if obj["threshold"] is None else float(obj["threshold"]),
        representative=tuple((int(r["component"]), frame(r)) for r in obj["representative"]),
        outliers=tuple(frame(o) for o in obj["outliers"]),
    )


def cues_to_json(cues: Sequence[CueEvent]) -> str:
    return json.dumps([cue_payload(c) for c in cues], indent=2) + "\n"


def write_cues(path: str, cues: Sequence[CueEvent]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(cues_to_json(cues))


def load_cues(path: str) -> list[CueEvent]:
    with open(path, "r", encoding="utf-8") as fh:
        return [cue_from_payload(obj) for obj in json.load(fh)]


def trace_to_csv(trace: Sequence[TracePoint]) -> str:
    lines = ["time,outlierness"]
    lines += [f"{p.time},{p.outlierness}" for p in trace]
    return "\n".join(lines) + "\n"


def write_trace(path: str, trace: Sequence[TracePoint]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(trace_to_csv(trace))
