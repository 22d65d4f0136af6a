"""isacpos: indoor positioning by fusing OFDM-radar sensing with inertial data.

The package covers the full experimental loop: a scenario simulator with a
radar front end, geometric and EKF baselines, a two-stage cascaded DNN
fusion positioner, and the evaluation metrics to compare them.
"""

from .ekf import EkfNoise, EkfState, run_ekf
from .fusion import CascadedPositioner, FusionEstimate, load_fusion, save_fusion
from .geometry import geometric_position, project_range
from .imu import ImuState, rotate_to_global, total_acceleration
from .metrics import ErrorSeries, SummaryRow, align_and_error, cdf, percentile, summarize
from .nn import MlpRegressor, TrainConfig
from .radar import ClutterFilter, Detection, RangeDopplerMap, WaveformConfig, range_doppler
from .simulate import (
    NoiseConfig,
    ScenarioConfig,
    TrajectorySpec,
    generate_truth,
    run_scenario,
    sample_imu,
    synthesize_csi,
)
from .types import (
    GroundTruthSample,
    ImuMeasurement,
    IsacMeasurement,
    Pose2D,
    SensorGeometry,
    merge_streams,
)

__version__ = "0.1.0"

__all__ = [
    "CascadedPositioner",
    "ClutterFilter",
    "Detection",
    "EkfNoise",
    "EkfState",
    "ErrorSeries",
    "FusionEstimate",
    "GroundTruthSample",
    "ImuMeasurement",
    "ImuState",
    "IsacMeasurement",
    "MlpRegressor",
    "NoiseConfig",
    "Pose2D",
    "RangeDopplerMap",
    "ScenarioConfig",
    "SensorGeometry",
    "SummaryRow",
    "TrainConfig",
    "TrajectorySpec",
    "WaveformConfig",
    "align_and_error",
    "cdf",
    "generate_truth",
    "geometric_position",
    "load_fusion",
    "merge_streams",
    "percentile",
    "project_range",
    "range_doppler",
    "rotate_to_global",
    "run_ekf",
    "run_scenario",
    "sample_imu",
    "save_fusion",
    "summarize",
    "synthesize_csi",
    "total_acceleration",
]
