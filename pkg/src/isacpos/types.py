"""Shared domain types and measurement-stream containers.

Conventions used throughout the package:

* time is expressed in seconds since scenario start (float, non-negative),
* angles are radians everywhere; degrees appear only at config boundaries,
* positions are 2D metric coordinates in the scenario frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

SPEED_OF_LIGHT = 299_792_458.0  # m/s

IMU_SOURCE = "imu"
ISAC_SOURCE = "isac"


def _require_finite(name: str, *values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise ValueError(f"{name} must be finite, got {v!r}")


@dataclass(frozen=True)
class Pose2D:
    """2D position in meters."""

    x: float
    y: float

    def __post_init__(self):
        _require_finite("Pose2D coordinates", self.x, self.y)

    def distance_to(self, other: "Pose2D") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class SensorGeometry:
    """Mounting geometry of the sensing unit relative to the target plane.

    ``azimuth`` is the boresight angle used by the geometric position
    estimate; ``elevation`` is the mechanical down-tilt (negative points
    down) and is informational only, the height difference carries the
    vertical geometry.
    """

    isac_position: tuple[float, float] = (-0.5, 1.75)
    isac_height: float = 1.9
    target_height: float = 0.9
    azimuth: float = 0.0
    elevation: float = math.radians(-6.0)

    def __post_init__(self):
        _require_finite(
            "SensorGeometry fields",
            *self.isac_position,
            self.isac_height,
            self.target_height,
            self.azimuth,
            self.elevation,
        )

    @property
    def delta_h(self) -> float:
        """Height difference between sensing unit and target reflection point."""
        return self.isac_height - self.target_height


@dataclass(frozen=True)
class IsacMeasurement:
    """One radar output sample: slant range and Doppler velocity.

    Positive ``doppler_velocity`` means the target approaches the sensor.
    """

    t: float
    range_3d: float
    doppler_velocity: float

    def __post_init__(self):
        _require_finite("IsacMeasurement fields", self.t, self.range_3d, self.doppler_velocity)
        if self.t < 0:
            raise ValueError(f"timestamp must be non-negative, got {self.t}")
        if self.range_3d < 0:
            raise ValueError(f"range_3d must be non-negative, got {self.range_3d}")


@dataclass(frozen=True)
class ImuMeasurement:
    """One inertial sample: body-frame accelerations and angular rates."""

    t: float
    accel_body: tuple[float, float, float]
    gyro: tuple[float, float, float]

    def __post_init__(self):
        _require_finite("ImuMeasurement fields", self.t, *self.accel_body, *self.gyro)
        if self.t < 0:
            raise ValueError(f"timestamp must be non-negative, got {self.t}")


@dataclass(frozen=True)
class GroundTruthSample:
    """Reference 2D position of the target at time ``t``."""

    t: float
    position: tuple[float, float]

    def __post_init__(self):
        _require_finite("GroundTruthSample fields", self.t, *self.position)
        if self.t < 0:
            raise ValueError(f"timestamp must be non-negative, got {self.t}")


@dataclass(frozen=True)
class SensorEvent:
    """A measurement tagged with its source sensor, used by merged streams."""

    t: float
    source: str  # IMU_SOURCE or ISAC_SOURCE
    measurement: ImuMeasurement | IsacMeasurement = field(repr=False)


def _check_sorted(name: str, stream) -> None:
    prev = None
    for i, m in enumerate(stream):
        if prev is not None and m.t < prev:
            raise ValueError(
                f"{name} stream is not time-sorted: timestamp decreases at index {i} "
                f"({m.t} after {prev})"
            )
        prev = m.t


def merge_streams(
    isac: list[IsacMeasurement], imu: list[ImuMeasurement]
) -> list[SensorEvent]:
    """Merge the two sensor streams into one time-ordered event sequence.

    Both inputs must be individually time-sorted. Simultaneous samples are
    ordered IMU before ISAC so a sensing update always sees the freshest
    inertial state.
    """
    _check_sorted("isac", isac)
    _check_sorted("imu", imu)

    events: list[SensorEvent] = []
    i = j = 0
    while i < len(imu) and j < len(isac):
        if imu[i].t <= isac[j].t:
            events.append(SensorEvent(imu[i].t, IMU_SOURCE, imu[i]))
            i += 1
        else:
            events.append(SensorEvent(isac[j].t, ISAC_SOURCE, isac[j]))
            j += 1
    for m in imu[i:]:
        events.append(SensorEvent(m.t, IMU_SOURCE, m))
    for m in isac[j:]:
        events.append(SensorEvent(m.t, ISAC_SOURCE, m))
    return events
