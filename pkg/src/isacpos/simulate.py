"""Scenario simulator: ground-truth trajectories and synthetic sensor streams.

Replaces the hardware testbed. A trajectory is a waypoint path driven with
trapezoidal speed ramps (constant-acceleration ramp, cruise, ramp down,
optional dwell at each waypoint; turns happen in place during dwells). All
motion-phase boundaries are quantized to the inertial sampling grid so that
noiseless dead reckoning over the sampled accelerations reproduces the truth
exactly, up to float rounding.

From the truth kinematics the simulator derives
  * inertial samples (body-frame accelerations + gyro rates, with noise),
  * raw CSI matrices per sensing frame (point-scatterer echo, static
    clutter, complex noise), which feed the radar pipeline,
  * the ground-truth position stream.

Everything is deterministic given the scenario seed; independent noise
substreams are derived per consumer and per frame.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import radar
from .imu import rotate_to_body
from .radar import ClutterFilter, WaveformConfig
from .types import (
    SPEED_OF_LIGHT,
    GroundTruthSample,
    ImuMeasurement,
    IsacMeasurement,
    Pose2D,
    SensorGeometry,
)

_IMU_STREAM_TAG = 1
_CSI_STREAM_TAG = 2
_CLUTTER_STREAM_TAG = 3


@dataclass(frozen=True)
class NoiseConfig:
    """Sensor error model and channel disturbance levels.

    ``echo_amplitude`` scales the target return, ``csi_noise_std`` is the
    total per-element complex noise std, and clutter is a fixed set of
    static zero-Doppler scatterers drawn once per scenario seed.
    """

    accel_noise_std: float = 0.02
    gyro_noise_std: float = 0.002
    accel_bias: float = 0.0
    csi_noise_std: float = 0.5
    clutter_amplitude: float = 0.3
    clutter_scatterers: int = 5
    echo_amplitude: float = 1.0

    def __post_init__(self):
        for name in ("accel_noise_std", "gyro_noise_std", "csi_noise_std", "clutter_amplitude"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass(frozen=True)
class TrajectorySpec:
    """Waypoint path with per-segment speeds and per-waypoint dwell times."""

    waypoints: list[Pose2D]
    speeds: list[float]
    dwells: list[float]
    ramp_accel: float = 0.5

    def __post_init__(self):
        if len(self.waypoints) < 2:
            raise ValueError("a trajectory needs at least 2 waypoints")
        if len(self.speeds) != len(self.waypoints) - 1:
            raise ValueError(
                f"expected {len(self.waypoints) - 1} segment speeds, got {len(self.speeds)}"
            )
        if len(self.dwells) != len(self.waypoints):
            raise ValueError(
                f"expected {len(self.waypoints)} dwell times, got {len(self.dwells)}"
            )
        if any(s <= 0 for s in self.speeds):
            raise ValueError("segment speeds must be positive")
        if any(d < 0 for d in self.dwells):
            raise ValueError("dwell times must be non-negative")
        if self.ramp_accel <= 0:
            raise ValueError("ramp_accel must be positive")
        for i, (a, b) in enumerate(zip(self.waypoints, self.waypoints[1:])):
            if a.distance_to(b) == 0.0:
                raise ValueError(f"waypoints {i} and {i + 1} coincide at ({a.x}, {a.y})")


@dataclass(frozen=True)
class ScenarioConfig:
    """Full scenario description: area, geometry, rates, waveform, noise."""

    aoi_extent: tuple[float, float] = (3.5, 3.5)
    geometry: SensorGeometry = field(default_factory=SensorGeometry)
    isac_rate: float = 33.0
    imu_rate: float = 50.0
    truth_rate: float = 100.0
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    waveform: WaveformConfig = field(default_factory=WaveformConfig)
    detection_threshold: float = 12.0
    clutter_alpha: float = 0.1
    clutter_bootstrap: int = 5
    rng_seed: int = 0

    def __post_init__(self):
        if min(self.aoi_extent) <= 0:
            raise ValueError("area-of-interest extents must be positive")
        if min(self.isac_rate, self.imu_rate, self.truth_rate) <= 0:
            raise ValueError("sampling rates must be positive")
        if self.rng_seed < 0:
            raise ValueError("rng_seed must be non-negative")
        if self.truth_rate % self.imu_rate != 0:
            warnings.warn(
                "truth_rate is not an integer multiple of imu_rate; "
                "dead-reckoning consistency degrades to interpolation accuracy",
                stacklevel=2,
            )

    def with_seed(self, seed: int) -> "ScenarioConfig":
        return replace(self, rng_seed=seed)


@dataclass(frozen=True)
class _Phase:
    """One constant-acceleration (or in-place turn) segment of motion."""

    start: float
    duration: float
    origin: tuple[float, float]
    direction: tuple[float, float]
    speed0: float
    accel: float
    heading0: float
    heading_rate: float


@dataclass
class TruthTrajectory:
    """Dense ground-truth kinematics plus exact phase-wise evaluation."""

    phases: list[_Phase]
    duration: float
    t: np.ndarray
    position: np.ndarray
    velocity: np.ndarray
    acceleration: np.ndarray
    heading: np.ndarray

    def at(self, times) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Evaluate (position, velocity, acceleration, heading) at any times."""
        t = np.atleast_1d(np.asarray(times, dtype=float))
        starts = np.array([p.start for p in self.phases])
        idx = np.clip(np.searchsorted(starts, t, side="right") - 1, 0, len(self.phases) - 1)
        pos = np.empty((t.size, 2))
        vel = np.empty((t.size, 2))
        acc = np.empty((t.size, 2))
        head = np.empty(t.size)
        for p_i in np.unique(idx):
            ph = self.phases[p_i]
            mask = idx == p_i
            tau = np.clip(t[mask] - ph.start, 0.0, ph.duration)
            s = ph.speed0 * tau + 0.5 * ph.accel * tau * tau
            speed = ph.speed0 + ph.accel * tau
            ux, uy = ph.direction
            pos[mask, 0] = ph.origin[0] + s * ux
            pos[mask, 1] = ph.origin[1] + s * uy
            vel[mask, 0] = speed * ux
            vel[mask, 1] = speed * uy
            acc[mask, 0] = ph.accel * ux
            acc[mask, 1] = ph.accel * uy
            head[mask] = ph.heading0 + ph.heading_rate * tau
        return pos, vel, acc, head

    def truth_stream(self) -> list[GroundTruthSample]:
        return [
            GroundTruthSample(float(t), (float(x), float(y)))
            for t, (x, y) in zip(self.t, self.position)
        ]


def _wrap_angle(angle: float) -> float:
    """Wrap to (-pi, pi]."""
    wrapped = math.fmod(angle + math.pi, 2.0 * math.pi)
    if wrapped <= 0.0:
        wrapped += 2.0 * math.pi
    return wrapped - math.pi


def generate_truth(spec: TrajectorySpec, cfg: ScenarioConfig) -> TruthTrajectory:
    """Build the ground-truth trajectory for a waypoint spec.

    Speeds are re-solved after quantizing ramp/cruise/dwell durations to the
    inertial sampling grid, so each segment still covers its exact length;
    the realized cruise speed can therefore differ slightly from the request.
    """
    width, depth = cfg.aoi_extent
    for i, wp in enumerate(spec.waypoints):
        if not (0.0 <= wp.x <= width and 0.0 <= wp.y <= depth):
            raise ValueError(
                f"waypoint {i} at ({wp.x}, {wp.y}) lies outside the "
                f"{width} x {depth} m area of interest"
            )

    grid_rate = cfg.imu_rate

    def ramp_ticks(seconds: float) -> int:
        return max(1, round(seconds * grid_rate))

    def span_ticks(seconds: float) -> int:
        return max(0, round(seconds * grid_rate))

    phases: list[_Phase] = []
    tick = 0
    heading = math.atan2(
        spec.waypoints[1].y - spec.waypoints[0].y,
        spec.waypoints[1].x - spec.waypoints[0].x,
    )

    def add_phase(ticks: int, origin, direction, speed0, accel, heading0, heading_rate):
        nonlocal tick
        if ticks == 0:
            return
        start = tick / grid_rate
        duration = (tick + ticks) / grid_rate - start
        phases.append(
            _Phase(start, duration, origin, direction, speed0, accel, heading0, heading_rate)
        )
        tick += ticks

    def add_dwell(seconds: float, position: Pose2D, next_heading: float | None):
        nonlocal heading
        ticks = span_ticks(seconds)
        if next_heading is None:
            add_phase(ticks, (position.x, position.y), (0.0, 0.0), 0.0, 0.0, heading, 0.0)
            return
        delta = _wrap_angle(next_heading - heading)
        if ticks == 0:
            heading = heading + delta  # instantaneous turn at the corner
            return
        duration = ticks / grid_rate
        add_phase(
            ticks, (position.x, position.y), (0.0, 0.0), 0.0, 0.0, heading, delta / duration
        )
        heading = heading + delta

    first_heading = heading
    add_dwell(spec.dwells[0], spec.waypoints[0], first_heading)

    for i, (a, b) in enumerate(zip(spec.waypoints, spec.waypoints[1:])):
        length = a.distance_to(b)
        direction = ((b.x - a.x) / length, (b.y - a.y) / length)
        seg_heading = math.atan2(direction[1], direction[0])
        speed, accel = spec.speeds[i], spec.ramp_accel

        t_ramp = speed / accel
        t_cruise = length / speed - t_ramp
        if t_cruise < 0:  # segment too short for a full trapezoid: triangular profile
            t_ramp = math.sqrt(length / accel)
            t_cruise = 0.0
        ramp = ramp_ticks(t_ramp)
        cruise = span_ticks(t_cruise)
        t_ramp_q = ramp / grid_rate
        t_cruise_q = cruise / grid_rate
        speed_eff = length / (t_ramp_q + t_cruise_q)
        accel_eff = speed_eff / t_ramp_q

        ramp_dist = 0.5 * accel_eff * t_ramp_q * t_ramp_q
        cruise_dist = speed_eff * t_cruise_q
        add_phase(ramp, (a.x, a.y), direction, 0.0, accel_eff, heading, 0.0)
        origin_cruise = (a.x + ramp_dist * direction[0], a.y + ramp_dist * direction[1])
        add_phase(cruise, origin_cruise, direction, speed_eff, 0.0, heading, 0.0)
        origin_decel = (
            origin_cruise[0] + cruise_dist * direction[0],
            origin_cruise[1] + cruise_dist * direction[1],
        )
        add_phase(ramp, origin_decel, direction, speed_eff, -accel_eff, heading, 0.0)

        if i + 1 < len(spec.waypoints) - 1:
            nxt = spec.waypoints[i + 2]
            next_heading = math.atan2(nxt.y - b.y, nxt.x - b.x)
        else:
            next_heading = None
        add_dwell(spec.dwells[i + 1], b, next_heading)
        _ = seg_heading  # heading already tracked incrementally

    duration = tick / grid_rate
    # terminal hold so evaluation slightly past the end stays at rest
    last = spec.waypoints[-1]
    phases.append(_Phase(duration, math.inf, (last.x, last.y), (0.0, 0.0), 0.0, 0.0, heading, 0.0))

    traj = TruthTrajectory(
        phases=phases,
        duration=duration,
        t=np.empty(0),
        position=np.empty((0, 2)),
        velocity=np.empty((0, 2)),
        acceleration=np.empty((0, 2)),
        heading=np.empty(0),
    )
    n = int(math.floor(duration * cfg.truth_rate + 1e-9))
    times = np.arange(n + 1) / cfg.truth_rate
    pos, vel, acc, head = traj.at(times)
    traj.t, traj.position, traj.velocity, traj.acceleration, traj.heading = (
        times,
        pos,
        vel,
        acc,
        head,
    )
    return traj


def sample_imu(
    truth: TruthTrajectory, cfg: ScenarioConfig, rng: np.random.Generator | None = None
) -> list[ImuMeasurement]:
    """Sample body-frame inertial measurements from the truth kinematics.

    Accelerations are interval averages (velocity differences over the
    sampling period) rotated into the body frame, so integrating them back
    reproduces the truth velocities exactly in the noiseless case. The z
    gyro is the finite-difference heading rate; the z accelerometer channel
    is gravity-free.
    """
    if rng is None:
        rng = np.random.default_rng((cfg.rng_seed, _IMU_STREAM_TAG))
    dt = 1.0 / cfg.imu_rate
    n = int(math.floor(truth.duration * cfg.imu_rate + 1e-9))
    times = np.arange(n + 1) / cfg.imu_rate  # includes t=0 for differencing
    _, vel, _, head = truth.at(times)

    noise = cfg.noise
    accel_noise = rng.normal(0.0, noise.accel_noise_std, (n, 3)) if noise.accel_noise_std else np.zeros((n, 3))
    gyro_noise = rng.normal(0.0, noise.gyro_noise_std, (n, 3)) if noise.gyro_noise_std else np.zeros((n, 3))

    measurements = []
    for k in range(1, n + 1):
        a_bar = ((vel[k, 0] - vel[k - 1, 0]) / dt, (vel[k, 1] - vel[k - 1, 1]) / dt)
        bx, by = rotate_to_body(a_bar, head[k])
        gz = _wrap_angle(head[k] - head[k - 1]) / dt
        ax = bx + noise.accel_bias + accel_noise[k - 1, 0]
        ay = by + noise.accel_bias + accel_noise[k - 1, 1]
        az = accel_noise[k - 1, 2]
        measurements.append(
            ImuMeasurement(
                float(times[k]),
                (float(ax), float(ay), float(az)),
                (float(gyro_noise[k - 1, 0]), float(gyro_noise[k - 1, 1]), float(gz + gyro_noise[k - 1, 2])),
            )
        )
    return measurements


def slant_geometry(
    position: np.ndarray, velocity: np.ndarray, geometry: SensorGeometry
) -> tuple[float, float]:
    """Slant range and approach speed of the target as seen by the sensor."""
    dx = position[0] - geometry.isac_position[0]
    dy = position[1] - geometry.isac_position[1]
    r_2d = math.hypot(dx, dy)
    r_3d = math.hypot(r_2d, geometry.delta_h)
    if r_2d > 0.0:
        range_rate_2d = (dx * velocity[0] + dy * velocity[1]) / r_2d
        range_rate = range_rate_2d * (r_2d / r_3d)
    else:
        range_rate = 0.0
    return r_3d, -range_rate  # positive = approaching


def make_clutter(cfg: ScenarioConfig) -> np.ndarray:
    """Static zero-Doppler scatterer matrix, identical for every frame."""
    noise = cfg.noise
    wf = cfg.waveform
    g, h = wf.num_symbols, wf.num_subcarriers
    if noise.clutter_amplitude == 0.0 or noise.clutter_scatterers == 0:
        return np.zeros((g, h), dtype=complex)
    rng = np.random.default_rng((cfg.rng_seed, _CLUTTER_STREAM_TAG))
    ranges = rng.uniform(1.0, 10.0, noise.clutter_scatterers)
    phases = rng.uniform(0.0, 2.0 * math.pi, noise.clutter_scatterers)
    subcarriers = np.arange(h)
    row = np.zeros(h, dtype=complex)
    for r, phi in zip(ranges, phases):
        tau = 2.0 * r / SPEED_OF_LIGHT
        carrier = -2.0 * math.pi * wf.center_frequency * tau
        row += noise.clutter_amplitude * np.exp(
            1j * (phi + carrier) - 2j * math.pi * subcarriers * wf.subcarrier_spacing * tau
        )
    return np.broadcast_to(row, (g, h)).copy()


def synthesize_csi(
    truth: TruthTrajectory,
    cfg: ScenarioConfig,
    frame_index: int,
    clutter_matrix: np.ndarray | None = None,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Synthesize the CSI matrix of one sensing frame.

    Point-scatterer model: ``Z[g, h] = b * exp(-j 2 pi h df tau) *
    exp(+j 2 pi g T_sym f_D)`` with ``tau = 2 r_3d / c`` and ``f_D = 2
    v_radial f_c / c``, plus static clutter and complex Gaussian noise.
    """
    wf = cfg.waveform
    t = frame_index / cfg.isac_rate
    pos, vel, _, _ = truth.at(t)
    r_3d, v_radial = slant_geometry(pos[0], vel[0], cfg.geometry)
    if r_3d >= wf.unambiguous_range:
        raise ValueError(
            f"target at {r_3d:.1f} m exceeds the unambiguous range "
            f"{wf.unambiguous_range:.1f} m"
        )
    tau = 2.0 * r_3d / SPEED_OF_LIGHT
    f_doppler = 2.0 * v_radial * wf.center_frequency / SPEED_OF_LIGHT

    symbols = np.arange(wf.num_symbols)
    subcarriers = np.arange(wf.num_subcarriers)
    doppler_phase = np.exp(2j * math.pi * symbols * wf.symbol_duration * f_doppler)
    delay_phase = np.exp(-2j * math.pi * subcarriers * wf.subcarrier_spacing * tau)
    # range-dependent carrier phase: rotates frame to frame as the target
    # moves, which is what lets background subtraction separate it from clutter
    echo = cfg.noise.echo_amplitude * np.exp(-2j * math.pi * wf.center_frequency * tau)
    z = echo * np.outer(doppler_phase, delay_phase)

    if clutter_matrix is None:
        clutter_matrix = make_clutter(cfg)
    z = z + clutter_matrix

    if cfg.noise.csi_noise_std > 0.0:
        if rng is None:
            rng = np.random.default_rng((cfg.rng_seed, _CSI_STREAM_TAG, frame_index))
        scale = cfg.noise.csi_noise_std / math.sqrt(2.0)
        z = z + scale * (rng.standard_normal(z.shape) + 1j * rng.standard_normal(z.shape))
    return z


@dataclass
class RunReport:
    """Bookkeeping for one simulated scenario run."""

    frames_total: int = 0
    dropped_frames: list[int] = field(default_factory=list)
    multi_detection_frames: int = 0
    detections_total: int = 0

    def to_text(self) -> str:
        lines = [
            f"frames_total: {self.frames_total}",
            f"frames_with_detection: {self.frames_total - len(self.dropped_frames)}",
            f"frames_dropped: {len(self.dropped_frames)}",
            f"multi_detection_frames: {self.multi_detection_frames}",
            f"detections_total: {self.detections_total}",
        ]
        if self.dropped_frames:
            lines.append("dropped_frame_indices: " + ",".join(map(str, self.dropped_frames)))
        return "\n".join(lines) + "\n"


@dataclass
class ScenarioRun:
    """All artifacts of one simulated scenario."""

    isac: list[IsacMeasurement]
    imu: list[ImuMeasurement]
    truth: list[GroundTruthSample]
    trajectory: TruthTrajectory
    report: RunReport


def run_scenario(spec: TrajectorySpec, cfg: ScenarioConfig) -> ScenarioRun:
    """Simulate a full scenario and run the radar pipeline end to end.

    Each sensing frame is synthesized, clutter-filtered, and detected; the
    detection nearest to the true slant range is emitted (ground-truth
    association). Frames with no detection leave a gap, recorded in the run
    report.
    """
    truth = generate_truth(spec, cfg)
    imu = sample_imu(truth, cfg)
    clutter_matrix = make_clutter(cfg)
    clutter_filter = ClutterFilter(cfg.clutter_alpha, cfg.clutter_bootstrap)

    n_frames = int(math.floor(truth.duration * cfg.isac_rate + 1e-9))
    report = RunReport(frames_total=n_frames)
    isac: list[IsacMeasurement] = []
    for k in range(1, n_frames + 1):
        t = k / cfg.isac_rate
        z = synthesize_csi(truth, cfg, k, clutter_matrix=clutter_matrix)
        detections = radar.process_csi(z, clutter_filter, cfg.waveform, cfg.detection_threshold)
        if not detections:
            report.dropped_frames.append(k)
            continue
        report.detections_total += len(detections)
        if len(detections) > 1:
            report.multi_detection_frames += 1
        pos, vel, _, _ = truth.at(t)
        r_true, _ = slant_geometry(pos[0], vel[0], cfg.geometry)
        best = min(detections, key=lambda d: abs(d.r - r_true))
        isac.append(IsacMeasurement(t, float(best.r), float(best.v_d)))
    return ScenarioRun(isac, imu, truth.truth_stream(), truth, report)
