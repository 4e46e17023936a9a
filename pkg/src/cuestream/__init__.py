"""Real-time behavioral-cue detection over multimodal feature streams.

The pipeline: parse or synthesize multimodal feature frames, resample
them onto a fixed grid and group into batches, score each batch with an
online discounted Gaussian mixture, gate the score by a (steerable)
threshold, and emit interpretable cue events that pair representative
past frames with the current outlier frames. A WebSocket service streams
the same pipeline live or from recorded files, and an evaluation harness
scores detected cue lists against ground truth.
"""

from .detector import (
    CueEvent,
    CueFrame,
    Detector,
    DetectorConfig,
    ThresholdAck,
    ThresholdMode,
    ThresholdUnavailableError,
    TracePoint,
    adjust_threshold,
    auto_initial_threshold,
    extract_top_k_peaks,
    ranked_cues,
    run_detector,
)
from .evaluation import (
    MatchingConfig,
    RankedCueList,
    UndefinedMetricError,
    kendall_min_distance,
    recall,
)
from .features import (
    ChannelSchema,
    FeatureBatch,
    FeatureFrame,
    SamplingConfig,
    SchemaError,
    StreamBatcher,
    StreamFormatError,
    StreamOrderError,
    parse_stream,
    resample_and_batch,
    schema_from_names,
    select_channels,
    standardize_stream,
    subset_schema,
    write_stream,
)
from .report import ModalityResult, SessionData, modality_report, report_csv
from .sdem import (
    EngineConfig,
    GmmComponent,
    GmmState,
    InsufficientDataError,
    NumericDegeneracyError,
    ShapeError,
)
from .service import CueService, ServeConfig, SessionClock
from .synthetic import (
    ScenarioError,
    ScenarioSpec,
    SegmentSpec,
    mean_shift_scenario,
    multi_shift_scenario,
    stationary_scenario,
    synthesize_session,
)

__all__ = [
    "ChannelSchema",
    "CueEvent",
    "CueFrame",
    "CueService",
    "Detector",
    "DetectorConfig",
    "EngineConfig",
    "FeatureBatch",
    "FeatureFrame",
    "GmmComponent",
    "GmmState",
    "InsufficientDataError",
    "MatchingConfig",
    "ModalityResult",
    "NumericDegeneracyError",
    "RankedCueList",
    "SamplingConfig",
    "ScenarioError",
    "ScenarioSpec",
    "SchemaError",
    "SegmentSpec",
    "ServeConfig",
    "SessionClock",
    "SessionData",
    "ShapeError",
    "StreamBatcher",
    "StreamFormatError",
    "StreamOrderError",
    "ThresholdAck",
    "ThresholdMode",
    "ThresholdUnavailableError",
    "TracePoint",
    "UndefinedMetricError",
    "adjust_threshold",
    "auto_initial_threshold",
    "extract_top_k_peaks",
    "kendall_min_distance",
    "mean_shift_scenario",
    "modality_report",
    "multi_shift_scenario",
    "parse_stream",
    "ranked_cues",
    "recall",
    "report_csv",
    "resample_and_batch",
    "run_detector",
    "schema_from_names",
    "select_channels",
    "standardize_stream",
    "stationary_scenario",
    "subset_schema",
    "synthesize_session",
    "write_stream",
]

__version__ = "0.1.0"
