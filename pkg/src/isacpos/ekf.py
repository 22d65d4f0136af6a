"""Extended Kalman filter baseline: inertial prediction, range updates.

State is ``[px, py, vx, vy]``. Global-frame accelerations act as the
control input of a constant-velocity motion model; slant ranges projected
to the ground plane update the state through the range observation
``h(x) = ||p_isac - p||``. Process noise is acceleration-driven and
recomputed per time step. The covariance is re-symmetrized after every
step to keep drift out.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import imu as imu_mod
from .geometry import project_range
from .types import (
    IMU_SOURCE,
    ISAC_SOURCE,
    ImuMeasurement,
    IsacMeasurement,
    Pose2D,
    SensorGeometry,
    merge_streams,
)

_SYM_TOL = 1e-9


@dataclass(frozen=True)
class EkfNoise:
    """Process and measurement noise levels.

    ``accel_std`` drives the per-step process covariance
    ``Q = D diag(accel_std^2, accel_std^2) D^T``; ``range_var`` is the
    variance of the projected range measurement.
    """

    accel_std: float = 0.05
    range_var: float = 0.01

    def __post_init__(self):
        if self.accel_std < 0:
            raise ValueError("accel_std must be non-negative")
        if self.range_var <= 0:
            raise ValueError("range_var must be positive")

    def q_matrix(self, dt: float) -> np.ndarray:
        d = _control_matrix(dt)
        return d @ np.diag([self.accel_std**2, self.accel_std**2]) @ d.T


@dataclass
class EkfState:
    """Filter mean and covariance."""

    x: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float).reshape(4)
        self.cov = np.asarray(self.cov, dtype=float).reshape(4, 4)
        if np.abs(self.cov - self.cov.T).max() > _SYM_TOL:
            raise ValueError("covariance must be symmetric")
        if np.linalg.eigvalsh(self.cov).min() < -_SYM_TOL:
            raise ValueError("covariance must be positive semidefinite")

    @property
    def position(self) -> Pose2D:
        return Pose2D(float(self.x[0]), float(self.x[1]))


def initial_state(
    position: tuple[float, float], variances: tuple[float, float, float, float] = (0.01, 0.01, 0.1, 0.1)
) -> EkfState:
    return EkfState(
        np.array([position[0], position[1], 0.0, 0.0]), np.diag(variances)
    )


def _transition_matrix(dt: float) -> np.ndarray:
    c = np.eye(4)
    c[0, 2] = dt
    c[1, 3] = dt
    return c


def _control_matrix(dt: float) -> np.ndarray:
    half = 0.5 * dt * dt
    return np.array([[half, 0.0], [0.0, half], [dt, 0.0], [0.0, dt]])


def _symmetrize(cov: np.ndarray) -> np.ndarray:
    return 0.5 * (cov + cov.T)


def predict(state: EkfState, accel: tuple[float, float], dt: float, noise: EkfNoise) -> EkfState:
    """Propagate with the constant-velocity + acceleration-control model."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    c = _transition_matrix(dt)
    d = _control_matrix(dt)
    x = c @ state.x + d @ np.asarray(accel, dtype=float)
    cov = _symmetrize(c @ state.cov @ c.T + noise.q_matrix(dt))
    return EkfState(x, cov)


def update_range(
    state: EkfState,
    measured_range: float,
    isac_position: tuple[float, float],
    noise: EkfNoise,
) -> EkfState:
    """Range measurement update.

    The Jacobian of ``h(x) = ||p_isac - p||`` has numerators ``(p - p_isac)``
    over the predicted range. A predicted position on top of the sensor
    makes the Jacobian singular; the measurement is skipped with a warning.
    """
    dx = state.x[0] - isac_position[0]
    dy = state.x[1] - isac_position[1]
    predicted = math.hypot(dx, dy)
    if predicted < 1e-9:
        warnings.warn(
            "predicted position coincides with the sensor; range update skipped",
            stacklevel=2,
        )
        return state
    jac = np.array([dx / predicted, dy / predicted, 0.0, 0.0])
    innovation_var = float(jac @ state.cov @ jac) + noise.range_var
    gain = (state.cov @ jac) / innovation_var
    residual = measured_range - predicted
    x = state.x + gain * residual
    cov = _symmetrize((np.eye(4) - np.outer(gain, jac)) @ state.cov)
    return EkfState(x, cov)


def run_ekf(
    isac: list[IsacMeasurement],
    imu: list[ImuMeasurement],
    geometry: SensorGeometry,
    noise: EkfNoise,
    initial: EkfState,
    initial_yaw: float = 0.0,
    start_t: float = 0.0,
    range_slack: float = 0.0,
) -> list[tuple[float, Pose2D]]:
    """Replay both streams: predict on inertial events, update on sensing.

    Inertial accelerations are rotated to the global frame with a yaw
    integrated from the z gyro. Sensing events first propagate the state to
    the event time (holding the last acceleration), then apply the range
    update. Emits the position after every event.
    """
    state = initial
    yaw = initial_yaw
    last_t = start_t
    last_imu_t = start_t  # yaw integrates over full inertial intervals
    last_accel = (0.0, 0.0)
    track: list[tuple[float, Pose2D]] = []
    for event in merge_streams(isac, imu):
        dt = event.t - last_t
        if event.source == IMU_SOURCE:
            m = event.measurement
            yaw += m.gyro[2] * (m.t - last_imu_t)
            last_imu_t = m.t
            last_accel = imu_mod.rotate_to_global((m.accel_body[0], m.accel_body[1]), yaw)
            if dt > 0:
                state = predict(state, last_accel, dt, noise)
        else:
            m = event.measurement
            if dt > 0:
                state = predict(state, last_accel, dt, noise)
            r_2d = project_range(m.range_3d, geometry.delta_h, range_slack)
            state = update_range(state, r_2d, geometry.isac_position, noise)
        last_t = event.t
        track.append((event.t, state.position))
    return track
