"""Anytime-valid detection of quality degradation in per-frame tracking metrics."""

from .betting import BettingConfig, Bettor, BettingState, agrapa_update, sfogd_update
from .boxes import BoundingBox, giou, iou, ngiou
from .eprocess import Monitor, MonitorConfig, MonitorResult, StepEvent, run_batch, run_monitor
from .evaluation import (
    EvaluationReport,
    OracleConfig,
    TrialConfig,
    aggregate,
    evaluate,
    ground_truth_failure,
    run_trials,
)
from .response import (
    ResponseMap,
    ResponseMetric,
    WindowedNormalizer,
    apce,
    certainty_gain,
    peak_correlation,
    sharpness_gain,
)
from .simulator import StreamSpec, generate_response_maps, generate_stream
from .stream import EmaSmoother, MetricSample, RecencyBuffer, window_stats

__version__ = "0.1.0"
