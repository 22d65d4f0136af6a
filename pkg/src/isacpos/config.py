"""YAML config files for scenarios, trajectories, and experiment manifests.

Angles cross this boundary in degrees (``azimuth_deg``/``elevation_deg``)
and are converted to radians immediately; everything else uses SI units.
Unknown keys are rejected so typos fail loudly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .radar import WaveformConfig
from .simulate import NoiseConfig, ScenarioConfig, TrajectorySpec
from .types import Pose2D, SensorGeometry


def _check_keys(section: str, data: dict, allowed: set[str]) -> None:
    unknown = set(data) - allowed
    if unknown:
        raise ValueError(f"unknown key(s) in {section}: {', '.join(sorted(unknown))}")


def geometry_from_dict(data: dict) -> SensorGeometry:
    _check_keys(
        "geometry",
        data,
        {"isac_position", "isac_height", "target_height", "azimuth_deg", "elevation_deg"},
    )
    defaults = SensorGeometry()
    return SensorGeometry(
        isac_position=tuple(data.get("isac_position", defaults.isac_position)),
        isac_height=float(data.get("isac_height", defaults.isac_height)),
        target_height=float(data.get("target_height", defaults.target_height)),
        azimuth=math.radians(float(data.get("azimuth_deg", math.degrees(defaults.azimuth)))),
        elevation=math.radians(
            float(data.get("elevation_deg", math.degrees(defaults.elevation)))
        ),
    )


def waveform_from_dict(data: dict) -> WaveformConfig:
    _check_keys(
        "waveform",
        data,
        {"center_frequency", "bandwidth", "subcarrier_spacing", "num_symbols", "num_subcarriers"},
    )
    defaults = WaveformConfig()
    return WaveformConfig(
        center_frequency=float(data.get("center_frequency", defaults.center_frequency)),
        bandwidth=float(data.get("bandwidth", defaults.bandwidth)),
        subcarrier_spacing=float(data.get("subcarrier_spacing", defaults.subcarrier_spacing)),
        num_symbols=int(data.get("num_symbols", defaults.num_symbols)),
        num_subcarriers=(
            int(data["num_subcarriers"]) if "num_subcarriers" in data else None
        ),
    )


def noise_from_dict(data: dict) -> NoiseConfig:
    allowed = {
        "accel_noise_std",
        "gyro_noise_std",
        "accel_bias",
        "csi_noise_std",
        "clutter_amplitude",
        "clutter_scatterers",
        "echo_amplitude",
    }
    _check_keys("noise", data, allowed)
    defaults = NoiseConfig()
    kwargs = {key: data.get(key, getattr(defaults, key)) for key in allowed}
    kwargs["clutter_scatterers"] = int(kwargs["clutter_scatterers"])
    return NoiseConfig(**{k: (float(v) if k != "clutter_scatterers" else v) for k, v in kwargs.items()})


def scenario_from_dict(data: dict) -> ScenarioConfig:
    _check_keys(
        "scenario",
        data,
        {
            "aoi_extent",
            "geometry",
            "isac_rate",
            "imu_rate",
            "truth_rate",
            "noise",
            "waveform",
            "detection_threshold",
            "clutter_alpha",
            "clutter_bootstrap",
            "rng_seed",
        },
    )
    defaults = ScenarioConfig()
    return ScenarioConfig(
        aoi_extent=tuple(data.get("aoi_extent", defaults.aoi_extent)),
        geometry=geometry_from_dict(data.get("geometry", {})),
        isac_rate=float(data.get("isac_rate", defaults.isac_rate)),
        imu_rate=float(data.get("imu_rate", defaults.imu_rate)),
        truth_rate=float(data.get("truth_rate", defaults.truth_rate)),
        noise=noise_from_dict(data.get("noise", {})),
        waveform=waveform_from_dict(data.get("waveform", {})),
        detection_threshold=float(
            data.get("detection_threshold", defaults.detection_threshold)
        ),
        clutter_alpha=float(data.get("clutter_alpha", defaults.clutter_alpha)),
        clutter_bootstrap=int(data.get("clutter_bootstrap", defaults.clutter_bootstrap)),
        rng_seed=int(data.get("rng_seed", defaults.rng_seed)),
    )


def trajectory_from_dict(data: dict) -> TrajectorySpec:
    _check_keys("trajectory", data, {"waypoints", "speeds", "dwells", "ramp_accel"})
    if "waypoints" not in data:
        raise ValueError("trajectory needs a waypoints list")
    waypoints = [Pose2D(float(x), float(y)) for x, y in data["waypoints"]]
    n_segments = len(waypoints) - 1
    speeds = data.get("speeds", 0.3)
    if isinstance(speeds, (int, float)):
        speeds = [float(speeds)] * n_segments
    dwells = data.get("dwells", 1.0)
    if isinstance(dwells, (int, float)):
        dwells = [float(dwells)] * len(waypoints)
    return TrajectorySpec(
        waypoints=waypoints,
        speeds=[float(s) for s in speeds],
        dwells=[float(d) for d in dwells],
        ramp_accel=float(data.get("ramp_accel", 0.5)),
    )


def load_scenario(path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as handle:
        return scenario_from_dict(yaml.safe_load(handle) or {})


def load_trajectory(path) -> TrajectorySpec:
    with open(path, encoding="utf-8") as handle:
        return trajectory_from_dict(yaml.safe_load(handle) or {})


@dataclass
class TrainSettings:
    """Training hyperparameters exposed at the experiment boundary."""

    learning_rate: float = 1e-3
    batch_size: int = 32
    max_epochs: int = 500
    patience: int = 20
    validation_fraction: float = 0.2
    teacher_noise_std: float = 0.0
    stage2_noise_std: float | None = None


def train_settings_from_dict(data: dict) -> TrainSettings:
    defaults = TrainSettings()
    allowed = set(vars(defaults))
    _check_keys("train", data, allowed)
    kwargs = {key: data.get(key, getattr(defaults, key)) for key in allowed}
    kwargs["batch_size"] = int(kwargs["batch_size"])
    kwargs["max_epochs"] = int(kwargs["max_epochs"])
    kwargs["patience"] = int(kwargs["patience"])
    return TrainSettings(**kwargs)


@dataclass
class ExperimentManifest:
    """One comparison experiment: scenario x trajectory x seeds x methods."""

    scenario_path: Path
    trajectory_path: Path
    seeds: list[int]
    methods: list[str]
    output_dir: Path
    train: TrainSettings = field(default_factory=TrainSettings)
    ekf_range_std: float = 0.1
    ekf_accel_std: float | None = None  # defaults to the scenario's accel noise

    def __post_init__(self):
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if not self.methods:
            raise ValueError("at least one method is required")


def load_manifest(path, default_output: Path | None = None) -> ExperimentManifest:
    path = Path(path)
    with open(path, encoding="utf-8") as handle:
        data = yaml.safe_load(handle) or {}
    _check_keys(
        "manifest",
        data,
        {"scenario", "trajectory", "seeds", "methods", "output_dir", "train", "ekf"},
    )
    base = path.parent
    ekf_data = data.get("ekf", {})
    _check_keys("ekf", ekf_data, {"range_std", "accel_std"})
    output = data.get("output_dir")
    if output is None:
        output = default_output if default_output is not None else base / "comparison"
    return ExperimentManifest(
        scenario_path=(base / data["scenario"]).resolve(),
        trajectory_path=(base / data["trajectory"]).resolve(),
        seeds=[int(s) for s in data.get("seeds", [0])],
        methods=[str(m) for m in data.get("methods", [])],
        output_dir=Path(output),
        train=train_settings_from_dict(data.get("train", {})),
        ekf_range_std=float(ekf_data.get("range_std", 0.1)),
        ekf_accel_std=(
            float(ekf_data["accel_std"]) if "accel_std" in ekf_data else None
        ),
    )
