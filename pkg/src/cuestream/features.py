"""Multimodal feature schema, session stream I/O, and sampling/batching.

A session stream is newline-delimited JSON. The first line is a metadata
header fixing the channel set::

    {"schema": {"posture": true, "gaze": true, "face": false}, "version": 1}

Each following line is one frame::

    {"t": 12.5, "posture": [24 numbers], "gaze": [2 numbers]}

A channel key set to ``null`` marks the sensor as invalid for that frame;
on parse its values are replaced by the schema's out-of-range sentinel so
that signal loss itself registers as a behavioral change downstream.
Disabled channels are omitted from records entirely.

Resampling uses zero-order hold: a fixed tick grid is anchored at the
first frame's timestamp and each tick repeats the latest frame at or
before it. Ticks are grouped into fixed-duration batches; a trailing
partial batch is dropped.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import IO, Iterable, Iterator, Sequence, Union

import numpy as np

CHANNEL_ORDER = ("posture", "gaze", "face")
CHANNEL_WIDTHS = {"posture": 24, "gaze": 2, "face": 8}
DEFAULT_SENTINEL = -10000.0
FACE_SUM_TOLERANCE = 1e-6
FORMAT_VERSION = 1

StreamSource = Union[str, IO[str], IO[bytes], Iterable[str], Iterable[bytes]]


class SchemaError(ValueError):
    """A frame, batch, or schema violates a structural invariant."""


class StreamFormatError(ValueError):
    """A session stream record could not be parsed.

    Attributes:
        line: 1-based line number of the offending record, if known.
    """

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class StreamOrderError(ValueError):
    """Frame timestamps are not strictly increasing."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


@dataclass(frozen=True)
class ChannelSchema:
    """Which input channels are present and how sensor loss is encoded.

    Widths are fixed: posture 24 (12 keypoints x (x, y) pixels), gaze 2
    (screen coordinates), face 8 (class probabilities summing to 1). The
    face channel is off by default. Sentinels are the per-channel fill
    values used when a sensor reports no data.
    """

    posture: bool = True
    gaze: bool = True
    face: bool = False
    posture_sentinel: float = DEFAULT_SENTINEL
    gaze_sentinel: float = DEFAULT_SENTINEL
    face_sentinel: float = DEFAULT_SENTINEL

    def __post_init__(self):
        if not (self.posture or self.gaze or self.face):
            raise SchemaError("at least one channel must be enabled")

    @property
    def channels(self) -> tuple[str, ...]:
        """Enabled channel names in canonical order."""
        return tuple(c for c in CHANNEL_ORDER if getattr(self, c))

    @property
    def dimensions(self) -> int:
        """Total feature dimensionality M."""
        return sum(CHANNEL_WIDTHS[c] for c in self.channels)

    @property
    def slices(self) -> dict[str, slice]:
        """Channel name -> slice into the M-vector."""
        out: dict[str, slice] = {}
        offset = 0
        for c in self.channels:
            out[c] = slice(offset, offset + CHANNEL_WIDTHS[c])
            offset += CHANNEL_WIDTHS[c]
        return out

    def sentinel_for(self, channel: str) -> float:
        return float(getattr(self, f"{channel}_sentinel"))

    def header_obj(self) -> dict:
        return {
            "schema": {c: getattr(self, c) for c in CHANNEL_ORDER},
            "version": FORMAT_VERSION,
        }

    @classmethod
    def from_header_obj(cls, obj: dict, **sentinels: float) -> "ChannelSchema":
        flags = obj.get("schema")
        if not isinstance(flags, dict):
            raise StreamFormatError("header is missing the 'schema' object", line=1)
        if obj.get("version") != FORMAT_VERSION:
            raise StreamFormatError(
                f"unsupported stream version {obj.get('version')!r}", line=1
            )
        kwargs = {c: bool(flags.get(c, False)) for c in CHANNEL_ORDER}
        kwargs.update(sentinels)
        try:
            return cls(**kwargs)
        except SchemaError as exc:
            raise StreamFormatError(str(exc), line=1) from exc


def schema_from_names(names: Sequence[str], **sentinels: float) -> ChannelSchema:
    """Build a schema from channel names, e.g. ["posture", "gaze"]."""
    unknown = [n for n in names if n not in CHANNEL_ORDER]
    if unknown:
        raise SchemaError(f"unknown channels: {unknown}")
    return ChannelSchema(
        **{c: c in names for c in CHANNEL_ORDER},  # type: ignore[arg-type]
        **sentinels,
    )


@dataclass(frozen=True, eq=False)
class FeatureFrame:
    """One timestamped multimodal observation.

    ``values`` always holds all M entries of the schema; invalid channels
    carry the sentinel. ``valid`` is aligned with ``schema.channels``.
    """

    timestamp: float
    values: np.ndarray
    valid: tuple[bool, ...]


def validate_frame(frame: FeatureFrame, schema: ChannelSchema) -> None:
    """Check a frame against its schema's structural invariants."""
    if frame.timestamp < 0 or not math.isfinite(frame.timestamp):
        raise SchemaError(f"timestamp must be finite and >= 0, got {frame.timestamp}")
    if frame.values.shape != (schema.dimensions,):
        raise SchemaError(
            f"expected {schema.dimensions} values, got shape {frame.values.shape}"
        )
    if len(frame.valid) != len(schema.channels):
        raise SchemaError(
            f"expected {len(schema.channels)} validity flags, got {len(frame.valid)}"
        )
    if not np.isfinite(frame.values).all():
        raise SchemaError("frame values must be finite")
    if schema.face and frame.valid[schema.channels.index("face")]:
        face = frame.values[schema.slices["face"]]
        if face.min() < 0.0 or face.max() > 1.0:
            raise SchemaError("face probabilities must lie in [0, 1]")
        if abs(float(face.sum()) - 1.0) > FACE_SUM_TOLERANCE:
            raise SchemaError(f"face probabilities sum to {face.sum()}, expected 1")


@dataclass(frozen=True, eq=False)
class FeatureBatch:
    """N consecutive resampled frames forming one detection window."""

    frames: tuple[FeatureFrame, ...]
    start_time: float
    end_time: float

    def __post_init__(self):
        if len(self.frames) < 1:
            raise SchemaError("a batch requires at least one frame")
        for f in self.frames:
            if not (self.start_time <= f.timestamp < self.end_time):
                raise SchemaError(
                    f"frame at {f.timestamp} outside [{self.start_time}, {self.end_time})"
                )

    def __len__(self) -> int:
        return len(self.frames)

    def matrix(self) -> np.ndarray:
        """Stack frame values into an (N, M) array."""
        return np.stack([f.values for f in self.frames])


@dataclass(frozen=True)
class SamplingConfig:
    """Sampling cadence, batch window, and warm-up exclusion period."""

    sample_period: float = 0.5
    batch_duration: float = 30.0
    warmup: float = 180.0

    def __post_init__(self):
        if self.sample_period <= 0:
            raise SchemaError("sample_period must be > 0")
        if self.batch_duration < self.sample_period:
            raise SchemaError("batch_duration must be >= sample_period")
        if self.warmup < 0:
            raise SchemaError("warmup must be >= 0")
        n = self.batch_duration / self.sample_period
        if abs(n - round(n)) > 1e-9 or round(n) < 1:
            raise SchemaError(
                f"batch_duration / sample_period must be a positive integer, got {n}"
            )

    @property
    def frames_per_batch(self) -> int:
        return int(round(self.batch_duration / self.sample_period))


# -- stream parsing / serialization -----------------------------------


def _iter_lines(source: StreamSource) -> Iterator[str]:
    if isinstance(source, str):
        with open(source, "r", encoding="utf-8") as fh:
            yield from fh
        return
    for raw in source:
        yield raw.decode("utf-8") if isinstance(raw, bytes) else raw


def parse_record(
    obj: dict, schema: ChannelSchema, last_timestamp: float | None = None
) -> FeatureFrame:
    """Decode one frame record against a schema.

    Raises:
        StreamFormatError: malformed record.
        StreamOrderError: timestamp not strictly after ``last_timestamp``.
    """
    if not isinstance(obj, dict):
        raise StreamFormatError(f"record must be an object, got {type(obj).__name__}")
    t = obj.get("t")
    if isinstance(t, bool) or not isinstance(t, (int, float)) or not math.isfinite(t):
        raise StreamFormatError(f"record timestamp 't' must be a finite number, got {t!r}")
    t = float(t)
    if t < 0:
        raise StreamFormatError(f"timestamps must be >= 0, got {t}")
    if last_timestamp is not None and t <= last_timestamp:
        raise StreamOrderError(
            f"timestamp {t} does not increase past {last_timestamp}"
        )

    values = np.empty(schema.dimensions)
    valid: list[bool] = []
    for channel in schema.channels:
        width = CHANNEL_WIDTHS[channel]
        if channel not in obj:
            raise StreamFormatError(f"record is missing channel '{channel}'")
        payload = obj[channel]
        sl = schema.slices[channel]
        if payload is None:
            values[sl] = schema.sentinel_for(channel)
            valid.append(False)
            continue
        if not isinstance(payload, list) or len(payload) != width:
            raise StreamFormatError(
                f"channel '{channel}' must be a list of {width} numbers or null"
            )
        try:
            arr = np.asarray(payload, dtype=float)
        except (TypeError, ValueError) as exc:
            raise StreamFormatError(f"channel '{channel}' holds non-numeric data") from exc
        if not np.isfinite(arr).all():
            raise StreamFormatError(f"channel '{channel}' holds non-finite values")
        values[sl] = arr
        valid.append(True)

    frame = FeatureFrame(timestamp=t, values=values, valid=tuple(valid))
    try:
        validate_frame(frame, schema)
    except SchemaError as exc:
        raise StreamFormatError(str(exc)) from exc
    return frame


def parse_stream(
    source: StreamSource, schema: ChannelSchema | None = None
) -> Iterator[FeatureFrame]:
    """Parse a session stream, yielding frames in timestamp order.

    The header line fixes the channel set. When ``schema`` is given its
    channel flags must match the header (its sentinels are used for
    invalid channels); when omitted, the header's schema with default
    sentinels applies.
    """
    _, frames = open_stream(source, schema)
    yield from frames


def open_stream(
    source: StreamSource, schema: ChannelSchema | None = None
) -> tuple[ChannelSchema, Iterator[FeatureFrame]]:
    """Like :func:`parse_stream` but also returns the resolved schema."""
    lines = _iter_lines(source)
    try:
        header_line = next(lines)
    except StopIteration:
        raise StreamFormatError("stream is empty; expected a header line", line=1)
    try:
        header = json.loads(header_line)
    except json.JSONDecodeError as exc:
        raise StreamFormatError(f"invalid JSON header: {exc}", line=1) from exc
    declared = ChannelSchema.from_header_obj(header)
    if schema is None:
        schema = declared
    elif schema.channels != declared.channels:
        raise StreamFormatError(
            f"stream channels {declared.channels} do not match expected {schema.channels}",
            line=1,
        )

    def frames() -> Iterator[FeatureFrame]:
        last: float | None = None
        for lineno, raw in enumerate(lines, start=2):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise StreamFormatError(f"invalid JSON: {exc}", line=lineno) from exc
            try:
                frame = parse_record(obj, schema, last)
            except StreamOrderError as exc:
                raise StreamOrderError(str(exc), line=lineno) from None
            except StreamFormatError as exc:
                raise StreamFormatError(str(exc), line=lineno) from None
            last = frame.timestamp
            yield frame

    return schema, frames()


def frame_record(frame: FeatureFrame, schema: ChannelSchema) -> dict:
    """Encode one frame as a session record object."""
    record: dict = {"t": frame.timestamp}
    for idx, channel in enumerate(schema.channels):
        if frame.valid[idx]:
            record[channel] = [float(v) for v in frame.values[schema.slices[channel]]]
        else:
            record[channel] = None
    return record


def write_stream(
    frames: Iterable[FeatureFrame], schema: ChannelSchema, dest: IO[str]
) -> None:
    """Serialize frames to a session stream (header + one record per line)."""
    dest.write(json.dumps(schema.header_obj()) + "\n")
    for frame in frames:
        dest.write(json.dumps(frame_record(frame, schema)) + "\n")


def write_session(path: str, schema: ChannelSchema, frames: Iterable[FeatureFrame]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        write_stream(frames, schema, fh)


def read_session(path: str, schema: ChannelSchema | None = None) -> tuple[ChannelSchema, list[FeatureFrame]]:
    schema, frames = open_stream(path, schema)
    return schema, list(frames)


# -- resampling and batching ------------------------------------------


class StreamBatcher:
    """Incremental zero-order-hold resampler and batch assembler.

    Frames may arrive at any rate; each tick of the fixed grid repeats
    the latest frame at or before it. Completed batches are returned from
    :meth:`push` as soon as they can no longer change; :meth:`finalize`
    flushes ticks covered by the last frame and drops any partial batch.
    """

    def __init__(self, cfg: SamplingConfig):
        self.cfg = cfg
        self._n = cfg.frames_per_batch
        self._origin: float | None = None
        self._tick = 0
        self._held: FeatureFrame | None = None
        self._pending: list[FeatureFrame] = []
        self._batches_emitted = 0

    @property
    def batches_emitted(self) -> int:
        return self._batches_emitted

    def _tick_time(self) -> float:
        assert self._origin is not None
        return self._origin + self._tick * self.cfg.sample_period

    def _emit_tick(self, frame: FeatureFrame, out: list[FeatureBatch]) -> None:
        self._pending.append(
            FeatureFrame(timestamp=self._tick_time(), values=frame.values, valid=frame.valid)
        )
        self._tick += 1
        if len(self._pending) == self._n:
            assert self._origin is not None
            start = self._origin + self._batches_emitted * self.cfg.batch_duration
            out.append(
                FeatureBatch(
                    frames=tuple(self._pending),
                    start_time=start,
                    end_time=start + self.cfg.batch_duration,
                )
            )
            self._pending = []
            self._batches_emitted += 1

    def push(self, frame: FeatureFrame) -> list[FeatureBatch]:
        """Feed one frame; return any batches completed by it."""
        if self._held is not None and frame.timestamp <= self._held.timestamp:
            raise StreamOrderError(
                f"timestamp {frame.timestamp} does not increase past {self._held.timestamp}"
            )
        out: list[FeatureBatch] = []
        if self._origin is None:
            self._origin = frame.timestamp
        else:
            while self._tick_time() < frame.timestamp:
                assert self._held is not None
                self._emit_tick(self._held, out)
        self._held = frame
        if self._tick_time() == frame.timestamp:
            self._emit_tick(frame, out)
        return out

    def finalize(self) -> list[FeatureBatch]:
        """Flush remaining ticks reachable by the last frame; drop partials."""
        out: list[FeatureBatch] = []
        if self._held is not None:
            while self._tick_time() <= self._held.timestamp:
                self._emit_tick(self._held, out)
        self._pending = []
        return out


def resample_and_batch(
    frames: Iterable[FeatureFrame], cfg: SamplingConfig
) -> Iterator[FeatureBatch]:
    """Resample a timestamp-ordered frame sequence into fixed-size batches."""
    batcher = StreamBatcher(cfg)
    for frame in frames:
        yield from batcher.push(frame)
    yield from batcher.finalize()


# -- optional standardization -------------------------------------------


def standardize_stream(
    frames: Iterable[FeatureFrame],
    schema: ChannelSchema,
    cfg: SamplingConfig,
    channels: Sequence[str] | None = None,
) -> Iterator[FeatureFrame]:
    """Optional per-channel z-scoring against first-batch statistics.

    Off by default everywhere; callers opt in explicitly. The first
    batch's worth of frames fixes per-dimension means and stds (stds
    floored at 1e-9); those statistics then standardize every frame,
    including the baseline ones. Invalid channels keep their sentinel
    values so signal loss stays out-of-range after the transform.

    Args:
        frames: timestamp-ordered frames.
        schema: the stream's channel schema.
        cfg: sampling config; its batch size fixes the baseline length.
        channels: channels to standardize (default: all enabled).
    """
    selected = tuple(channels) if channels is not None else schema.channels
    unknown = [c for c in selected if c not in schema.channels]
    if unknown:
        raise SchemaError(f"channels {unknown} not enabled in the schema")
    slices = [schema.slices[c] for c in selected]
    indices = [schema.channels.index(c) for c in selected]

    baseline: list[FeatureFrame] = []
    mean: np.ndarray | None = None
    std: np.ndarray | None = None

    def transform(frame: FeatureFrame) -> FeatureFrame:
        assert mean is not None and std is not None
        values = frame.values.copy()
        for sl, idx in zip(slices, indices):
            if frame.valid[idx]:
                values[sl] = (values[sl] - mean[sl]) / std[sl]
        return FeatureFrame(timestamp=frame.timestamp, values=values, valid=frame.valid)

    n_baseline = cfg.frames_per_batch
    for frame in frames:
        if mean is None:
            baseline.append(frame)
            if len(baseline) < n_baseline:
                continue
            stacked = np.stack([f.values for f in baseline])
            mean = stacked.mean(axis=0)
            std = np.maximum(stacked.std(axis=0), 1e-9)
            for held in baseline:
                yield transform(held)
            baseline = []
            continue
        yield transform(frame)
    # Shorter-than-baseline streams pass through untouched: there is no
    # first batch to standardize against.
    yield from baseline


# -- channel projection ------------------------------------------------


def subset_schema(schema: ChannelSchema, names: Sequence[str]) -> ChannelSchema:
    """Schema restricted to ``names``, inheriting sentinel configuration."""
    missing = [n for n in names if n not in schema.channels]
    if missing:
        raise SchemaError(f"channels {missing} not enabled in the source schema")
    return schema_from_names(
        names,
        **{f"{c}_sentinel": schema.sentinel_for(c) for c in CHANNEL_ORDER},
    )


def select_channels(
    frames: Iterable[FeatureFrame], schema: ChannelSchema, target: ChannelSchema
) -> Iterator[FeatureFrame]:
    """Project frames onto the channel subset of ``target``."""
    missing = [c for c in target.channels if c not in schema.channels]
    if missing:
        raise SchemaError(f"channels {missing} not present in the source schema")
    src_slices = schema.slices
    keep = [schema.channels.index(c) for c in target.channels]
    for frame in frames:
        values = np.concatenate([frame.values[src_slices[c]] for c in target.channels])
        valid = tuple(frame.valid[i] for i in keep)
        yield FeatureFrame(timestamp=frame.timestamp, values=values, valid=valid)
