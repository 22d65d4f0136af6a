"""Inertial dead reckoning: yaw integration, frame rotation, and per-step
traveled distance.

The update keeps only what the downstream fusion needs: a yaw angle
integrated from the z gyro, a scalar speed integrated from the along-heading
acceleration (clamped at zero, the vehicle does not reverse), and the
distance increment ``d = v*dt + 0.5*a_g*dt**2`` where ``a_g`` is the norm of
the global-frame horizontal acceleration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .types import ImuMeasurement


def rotate_to_global(accel_body: tuple[float, float], phi: float) -> tuple[float, float]:
    """Rotate body-frame horizontal accelerations into the global frame.

    Convention: ``[ax, ay]_g = [[cos phi, sin phi], [-sin phi, cos phi]] @ [ax, ay]_l``.
    """
    c, s = math.cos(phi), math.sin(phi)
    ax, ay = accel_body
    return (c * ax + s * ay, -s * ax + c * ay)


def rotate_to_body(accel_global: tuple[float, float], phi: float) -> tuple[float, float]:
    """Inverse of :func:`rotate_to_global` (transpose of the rotation)."""
    c, s = math.cos(phi), math.sin(phi)
    ax, ay = accel_global
    return (c * ax - s * ay, s * ax + c * ay)


def total_acceleration(accel_global: tuple[float, float]) -> float:
    """Norm of the horizontal global-frame acceleration."""
    return math.hypot(accel_global[0], accel_global[1])


def heading_between(p0: tuple[float, float], p1: tuple[float, float]) -> float:
    """Direction of travel from ``p0`` to ``p1``."""
    return math.atan2(p1[1] - p0[1], p1[0] - p0[0])


@dataclass(frozen=True)
class ImuState:
    """Dead-reckoning state carried between inertial samples."""

    yaw: float
    velocity: float
    last_t: float

    def __post_init__(self):
        if not (math.isfinite(self.yaw) and math.isfinite(self.velocity)):
            raise ValueError("ImuState fields must be finite")
        if self.velocity < 0:
            raise ValueError(f"velocity must be non-negative, got {self.velocity}")


@dataclass(frozen=True)
class DistanceIncrement:
    """Distance traveled over one inertial sampling interval."""

    d_imu: float
    dt: float
    accel_global: tuple[float, float]


def step(state: ImuState, m: ImuMeasurement) -> tuple[ImuState, DistanceIncrement]:
    """Advance the dead-reckoning state by one inertial measurement."""
    dt = m.t - state.last_t
    if dt <= 0:
        raise ValueError(
            f"non-increasing timestamp: {m.t} follows state time {state.last_t}"
        )
    yaw = state.yaw + m.gyro[2] * dt
    a_global = rotate_to_global((m.accel_body[0], m.accel_body[1]), yaw)
    a_g = total_acceleration(a_global)
    d_imu = state.velocity * dt + 0.5 * a_g * dt * dt
    # speed integrates the acceleration component along the current heading
    a_signed = a_global[0] * math.cos(yaw) + a_global[1] * math.sin(yaw)
    velocity = max(0.0, state.velocity + a_signed * dt)
    return ImuState(yaw, velocity, m.t), DistanceIncrement(d_imu, dt, a_global)


def dead_reckon(
    imu_stream: list[ImuMeasurement],
    initial_yaw: float,
    start_t: float | None = None,
    initial_velocity: float = 0.0,
) -> list[DistanceIncrement]:
    """Run :func:`step` over a whole stream, one increment per measurement.

    ``start_t`` anchors the first interval; when omitted it is backed off
    from the first sample by the median sampling period so every measurement
    yields an increment.
    """
    if not imu_stream:
        return []
    if start_t is None:
        start_t = imu_stream[0].t - nominal_period(imu_stream)
    state = ImuState(initial_yaw, initial_velocity, start_t)
    increments = []
    for m in imu_stream:
        state, inc = step(state, m)
        increments.append(inc)
    return increments


def nominal_period(imu_stream: list[ImuMeasurement]) -> float:
    """Median inter-sample gap of a stream (falls back to 0.02 s)."""
    gaps = sorted(b.t - a.t for a, b in zip(imu_stream, imu_stream[1:]) if b.t > a.t)
    if not gaps:
        return 0.02
    return gaps[len(gaps) // 2]
