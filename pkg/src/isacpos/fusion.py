"""Two-stage cascaded DNN fusion of radar sensing and inertial data.

Stage 1 maps ``[prev_x, prev_y, projected range, Doppler velocity]`` to an
initial position at the sensing rate. Stage 2 maps ``[initial_x, initial_y,
d_imu]`` to the final position at the inertial rate; when no fresh stage-1
output exists (sensing gap), the previous final estimate takes its place.

Training uses teacher forcing: the recurrent position inputs are replaced by
ground truth (optionally perturbed with Gaussian noise to soften the
train/inference mismatch), because the recurrent estimate does not exist
before a model does.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from . import imu as imu_mod
from .geometry import project_range
from .io import atomic_write
from .nn import MlpRegressor, mlp_from_dict, mlp_to_dict
from .types import (
    IMU_SOURCE,
    ISAC_SOURCE,
    GroundTruthSample,
    ImuMeasurement,
    IsacMeasurement,
    Pose2D,
    SensorEvent,
    SensorGeometry,
)

STAGE1_LAYERS = (32, 16)  # input 4 -> 32 -> 16 -> 2
STAGE2_LAYERS = (32, 16)  # input 3 -> 32 -> 16 -> 2

FUSION_SCHEMA = "isacpos-fusion/1"


@dataclass(frozen=True)
class FusionEstimate:
    """Final position estimate emitted at the inertial cadence."""

    t: float
    position: Pose2D
    stage1_used: bool


class _TruthInterpolator:
    """Linear interpolation of the ground-truth track, with span checks."""

    def __init__(self, truth: list[GroundTruthSample]):
        if not truth:
            raise ValueError("empty ground-truth stream")
        self.t = np.array([s.t for s in truth])
        self.x = np.array([s.position[0] for s in truth])
        self.y = np.array([s.position[1] for s in truth])
        if np.any(np.diff(self.t) < 0):
            raise ValueError("ground-truth stream is not time-sorted")

    def in_span(self, t: float) -> bool:
        return self.t[0] <= t <= self.t[-1]

    def at(self, t: float) -> tuple[float, float]:
        return float(np.interp(t, self.t, self.x)), float(np.interp(t, self.t, self.y))


@dataclass
class StageDatasets:
    """Training rows for both stages, plus bookkeeping."""

    stage1_inputs: np.ndarray
    stage1_targets: np.ndarray
    stage2_inputs: np.ndarray
    stage2_targets: np.ndarray
    skipped_rows: int = 0


def build_training_sets(
    isac: list[IsacMeasurement],
    imu: list[ImuMeasurement],
    truth: list[GroundTruthSample],
    geometry: SensorGeometry,
    range_slack: float = 0.0,
    teacher_noise_std: float = 0.0,
    stage2_noise_std: float | None = None,
    initial_yaw: float | None = None,
    rng: np.random.Generator | None = None,
) -> StageDatasets:
    """Construct teacher-forced training rows for both stages.

    Stage-1 rows pair each sensing sample with the truth position at the
    previous sensing instant; stage-2 rows pair each inertial distance
    increment with the truth position at the previous inertial instant.
    Rows whose timestamps fall outside the truth span are dropped.
    ``stage2_noise_std`` overrides the perturbation of the stage-2 position
    inputs (it defaults to ``teacher_noise_std``).
    """
    interp = _TruthInterpolator(truth)
    if rng is None:
        rng = np.random.default_rng(0)
    if stage2_noise_std is None:
        stage2_noise_std = teacher_noise_std

    def perturbed(t: float, noise_std: float) -> tuple[float, float]:
        x, y = interp.at(t)
        if noise_std > 0.0:
            # mixture of scales: the recurrent input must be pulled back to
            # the track from small and large drift alike
            scale = noise_std * rng.choice((0.3, 1.0, 3.0), p=(0.4, 0.4, 0.2))
            x += rng.normal(0.0, scale)
            y += rng.normal(0.0, scale)
        return x, y

    skipped = 0
    s1_in, s1_out = [], []
    for prev, cur in zip(isac, isac[1:]):
        if not (interp.in_span(prev.t) and interp.in_span(cur.t)):
            skipped += 1
            continue
        r_2d = project_range(cur.range_3d, geometry.delta_h, range_slack)
        px, py = perturbed(prev.t, teacher_noise_std)
        s1_in.append([px, py, r_2d, cur.doppler_velocity])
        s1_out.append(interp.at(cur.t))

    if initial_yaw is None:
        initial_yaw = initial_heading(truth)
    increments = imu_mod.dead_reckon(imu, initial_yaw)
    s2_in, s2_out = [], []
    for m, inc in zip(imu, increments):
        t_prev = m.t - inc.dt
        if not (interp.in_span(t_prev) and interp.in_span(m.t)):
            skipped += 1
            continue
        px, py = perturbed(t_prev, stage2_noise_std)
        s2_in.append([px, py, inc.d_imu])
        s2_out.append(interp.at(m.t))

    if not s1_in or not s2_in:
        raise ValueError("no temporal overlap between measurement streams and ground truth")
    return StageDatasets(
        stage1_inputs=np.array(s1_in),
        stage1_targets=np.array(s1_out),
        stage2_inputs=np.array(s2_in),
        stage2_targets=np.array(s2_out),
        skipped_rows=skipped,
    )


def initial_heading(truth: list[GroundTruthSample]) -> float:
    """Direction of the first ground-truth displacement (0 if stationary)."""
    first = truth[0].position
    for sample in truth[1:]:
        if (sample.position[0] - first[0]) ** 2 + (sample.position[1] - first[1]) ** 2 > 1e-12:
            return imu_mod.heading_between(first, sample.position)
    return 0.0


class CascadedPositioner(BaseEstimator):
    """Two-stage cascaded DNN positioner with scikit-learn estimator plumbing.

    ``fit`` consumes the three synchronized measurement streams of one
    recorded scenario; ``predict`` replays a merged event stream and emits
    one estimate per inertial event, regardless of sensing gaps.
    """

    def __init__(
        self,
        geometry: SensorGeometry | None = None,
        range_slack: float = 0.0,
        teacher_noise_std: float = 0.0,
        stage2_noise_std: float | None = None,
        learning_rate: float = 1e-3,
        batch_size: int = 32,
        max_epochs: int = 500,
        patience: int = 20,
        validation_fraction: float = 0.2,
        random_state: int = 0,
    ):
        self.geometry = geometry
        self.range_slack = range_slack
        self.teacher_noise_std = teacher_noise_std
        self.stage2_noise_std = stage2_noise_std
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.patience = patience
        self.validation_fraction = validation_fraction
        self.random_state = random_state

    def _geometry(self) -> SensorGeometry:
        return self.geometry if self.geometry is not None else SensorGeometry()

    def fit(
        self,
        isac: list[IsacMeasurement],
        imu: list[ImuMeasurement],
        truth: list[GroundTruthSample],
    ) -> "CascadedPositioner":
        if not isac:
            raise ValueError("empty sensing stream")
        if not imu:
            raise ValueError("empty inertial stream")
        geometry = self._geometry()
        self.initial_yaw_ = initial_heading(truth)
        self.imu_period_ = imu_mod.nominal_period(imu)
        rng = np.random.default_rng((self.random_state, 17))
        datasets = build_training_sets(
            isac,
            imu,
            truth,
            geometry,
            range_slack=self.range_slack,
            teacher_noise_std=self.teacher_noise_std,
            stage2_noise_std=0.0,
            initial_yaw=self.initial_yaw_,
            rng=rng,
        )
        common = dict(
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            max_epochs=self.max_epochs,
            patience=self.patience,
            validation_fraction=self.validation_fraction,
        )
        self.stage1_ = MlpRegressor(
            hidden_layer_sizes=STAGE1_LAYERS, random_state=self.random_state, **common
        ).fit(datasets.stage1_inputs, datasets.stage1_targets)

        # stage 2 sees stage-1 outputs at inference; perturb its position
        # inputs with a matching error scale (stage-1 residual RMS by default)
        sigma2 = self.stage2_noise_std
        if sigma2 is None:
            residuals = self.stage1_.predict(datasets.stage1_inputs) - datasets.stage1_targets
            sigma2 = float(np.sqrt(np.mean(residuals**2)))
        self.stage2_sigma_ = sigma2
        stage2_inputs = datasets.stage2_inputs.copy()
        if sigma2 > 0.0:
            stage2_inputs[:, :2] += rng.normal(0.0, sigma2, stage2_inputs[:, :2].shape)
        datasets.stage2_inputs = stage2_inputs
        self.stage2_ = MlpRegressor(
            hidden_layer_sizes=STAGE2_LAYERS, random_state=self.random_state + 1, **common
        ).fit(datasets.stage2_inputs, datasets.stage2_targets)
        self.initial_pose_ = Pose2D(*truth[0].position)
        self.time_origin_ = truth[0].t
        self.datasets_ = datasets
        return self

    def predict(self, events: list[SensorEvent]) -> list[FusionEstimate]:
        """Replay a merged event stream through both stages.

        A stage-1 output is "fresh" until the next inertial event consumes
        it; inertial events without a fresh initial estimate fall back to
        the previous final estimate.
        """
        geometry = self._geometry()
        delta_h = geometry.delta_h
        prev_final = self.initial_pose_
        pending: Pose2D | None = None
        dr_state: imu_mod.ImuState | None = None
        estimates: list[FusionEstimate] = []
        last_t = None
        for event in events:
            if event.t < self.time_origin_:
                raise ValueError(
                    f"event at {event.t} precedes the model time origin {self.time_origin_}"
                )
            if last_t is not None and event.t < last_t:
                raise ValueError(f"events are not time-ordered at t={event.t}")
            last_t = event.t
            if event.source == ISAC_SOURCE:
                m = event.measurement
                r_2d = project_range(m.range_3d, delta_h, self.range_slack)
                out = self.stage1_.predict(
                    np.array([prev_final.x, prev_final.y, r_2d, m.doppler_velocity])
                )
                pending = Pose2D(float(out[0]), float(out[1]))
            elif event.source == IMU_SOURCE:
                m = event.measurement
                if dr_state is None:
                    dr_state = imu_mod.ImuState(self.initial_yaw_, 0.0, m.t - self.imu_period_)
                dr_state, inc = imu_mod.step(dr_state, m)
                base = pending if pending is not None else prev_final
                out = self.stage2_.predict(np.array([base.x, base.y, inc.d_imu]))
                final = Pose2D(float(out[0]), float(out[1]))
                estimates.append(FusionEstimate(m.t, final, pending is not None))
                pending = None
                prev_final = final
            else:
                raise ValueError(f"unknown event source {event.source!r}")
        return estimates

    def predict_isac_only(
        self, isac: list[IsacMeasurement]
    ) -> list[tuple[float, Pose2D]]:
        """Stage-1-only baseline: feeds back its own previous output."""
        geometry = self._geometry()
        prev = self.initial_pose_
        track: list[tuple[float, Pose2D]] = []
        for m in isac:
            r_2d = project_range(m.range_3d, geometry.delta_h, self.range_slack)
            out = self.stage1_.predict(np.array([prev.x, prev.y, r_2d, m.doppler_velocity]))
            prev = Pose2D(float(out[0]), float(out[1]))
            track.append((m.t, prev))
        return track


def fusion_to_dict(model: CascadedPositioner) -> dict:
    geometry = model._geometry()
    return {
        "schema": FUSION_SCHEMA,
        "stage1": mlp_to_dict(model.stage1_),
        "stage2": mlp_to_dict(model.stage2_),
        "initial_pose": [model.initial_pose_.x, model.initial_pose_.y],
        "initial_yaw": model.initial_yaw_,
        "imu_period": model.imu_period_,
        "time_origin": model.time_origin_,
        "range_slack": model.range_slack,
        "teacher_noise_std": model.teacher_noise_std,
        "stage2_noise_std": model.stage2_sigma_,
        "geometry": {
            "isac_position": list(geometry.isac_position),
            "isac_height": geometry.isac_height,
            "target_height": geometry.target_height,
            "azimuth": geometry.azimuth,
            "elevation": geometry.elevation,
        },
    }


def fusion_from_dict(doc: dict) -> CascadedPositioner:
    if doc.get("schema") != FUSION_SCHEMA:
        raise ValueError(f"unsupported fusion model schema {doc.get('schema')!r}")
    geo = doc["geometry"]
    model = CascadedPositioner(
        geometry=SensorGeometry(
            isac_position=tuple(geo["isac_position"]),
            isac_height=geo["isac_height"],
            target_height=geo["target_height"],
            azimuth=geo["azimuth"],
            elevation=geo["elevation"],
        ),
        range_slack=doc["range_slack"],
        teacher_noise_std=doc["teacher_noise_std"],
        stage2_noise_std=doc["stage2_noise_std"],
    )
    model.stage2_sigma_ = doc["stage2_noise_std"]
    model.stage1_ = mlp_from_dict(doc["stage1"])
    model.stage2_ = mlp_from_dict(doc["stage2"])
    model.initial_pose_ = Pose2D(*doc["initial_pose"])
    model.initial_yaw_ = doc["initial_yaw"]
    model.imu_period_ = doc["imu_period"]
    model.time_origin_ = doc["time_origin"]
    return model


def save_fusion(path, model: CascadedPositioner) -> None:
    with atomic_write(path) as handle:
        json.dump(fusion_to_dict(model), handle, indent=1)
        handle.write("\n")


def load_fusion(path) -> CascadedPositioner:
    with open(path, encoding="utf-8") as handle:
        return fusion_from_dict(json.load(handle))
