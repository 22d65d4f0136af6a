"""OFDM radar processing: CSI formation, range-Doppler periodogram,
clutter removal, and threshold detection.

Processing chain per frame::

    tx/rx symbol matrices --> CSI (element-wise division)
        --> clutter filter (EMA background subtraction)
        --> range-Doppler map (FFT over symbols, IFFT over subcarriers)
        --> threshold detection --> (range, Doppler velocity) per target

DFT normalization is fixed: unnormalized forward transform along the symbol
axis, 1/H-scaled inverse transform along the subcarrier axis (the numpy
defaults). The Doppler axis is center-shifted so bin 0 sits at zero
Doppler; positive Doppler velocity means the target approaches the sensor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .types import SPEED_OF_LIGHT


@dataclass(frozen=True)
class WaveformConfig:
    """OFDM waveform parameters of the sensing unit.

    The symbol duration is ``1/subcarrier_spacing`` (no cyclic prefix), which
    keeps the Doppler bin arithmetic exact. ``num_subcarriers`` defaults to
    the largest count that fits the bandwidth.
    """

    center_frequency: float = 27.4e9
    bandwidth: float = 200e6
    subcarrier_spacing: float = 120e3
    num_symbols: int = 330
    num_subcarriers: int | None = None

    def __post_init__(self):
        if self.num_subcarriers is None:
            object.__setattr__(
                self, "num_subcarriers", int(self.bandwidth // self.subcarrier_spacing)
            )
        if self.num_symbols < 2 or self.num_subcarriers < 2:
            raise ValueError("waveform needs at least 2 symbols and 2 subcarriers")
        if self.num_subcarriers * self.subcarrier_spacing > self.bandwidth * (1 + 1e-9):
            raise ValueError(
                f"{self.num_subcarriers} subcarriers at {self.subcarrier_spacing} Hz "
                f"exceed the {self.bandwidth} Hz bandwidth"
            )

    @property
    def symbol_duration(self) -> float:
        return 1.0 / self.subcarrier_spacing

    @property
    def range_bin_width(self) -> float:
        return SPEED_OF_LIGHT / (2.0 * self.num_subcarriers * self.subcarrier_spacing)

    @property
    def doppler_bin_width(self) -> float:
        return SPEED_OF_LIGHT / (
            2.0 * self.center_frequency * self.num_symbols * self.symbol_duration
        )

    @property
    def unambiguous_range(self) -> float:
        return SPEED_OF_LIGHT / (2.0 * self.subcarrier_spacing)


@dataclass(frozen=True)
class OfdmFrame:
    """Transmitted and received symbol matrices of one sensing frame."""

    tx: np.ndarray
    rx: np.ndarray

    def __post_init__(self):
        tx, rx = np.asarray(self.tx), np.asarray(self.rx)
        if tx.shape != rx.shape or tx.ndim != 2:
            raise ValueError(f"tx/rx must be equal-shape 2D matrices, got {tx.shape} vs {rx.shape}")


def compute_csi(frame: OfdmFrame) -> np.ndarray:
    """Channel state information: element-wise division of rx by tx."""
    tx = np.asarray(frame.tx)
    zeros = np.argwhere(tx == 0)
    if zeros.size:
        g, h = zeros[0]
        raise ValueError(
            f"tx matrix has {len(zeros)} zero element(s); first at symbol {g}, subcarrier {h}"
        )
    return np.asarray(frame.rx) / tx


@dataclass(frozen=True)
class RangeDopplerMap:
    """Magnitude periodogram over (Doppler, range) bins.

    Rows are Doppler bins after center shift (row ``G//2`` is zero Doppler),
    columns are range bins starting at zero delay.
    """

    magnitudes: np.ndarray
    range_bin_width: float
    doppler_bin_width: float

    @property
    def num_doppler_bins(self) -> int:
        return self.magnitudes.shape[0]

    @property
    def num_range_bins(self) -> int:
        return self.magnitudes.shape[1]

    @property
    def zero_doppler_row(self) -> int:
        return self.num_doppler_bins // 2


def range_doppler(z: np.ndarray, waveform: WaveformConfig) -> RangeDopplerMap:
    """Periodogram of a CSI matrix.

    Length-G FFTs along the symbol axis resolve Doppler; length-H IFFTs
    along the subcarrier axis resolve delay (range). The Doppler axis is
    fftshift-ed so negative velocities sit above the center row.
    """
    z = np.asarray(z)
    spectrum = np.fft.fft(z, axis=0)           # unnormalized forward, Doppler axis
    spectrum = np.fft.ifft(spectrum, axis=1)   # 1/H-scaled inverse, range axis
    spectrum = np.fft.fftshift(spectrum, axes=0)
    return RangeDopplerMap(
        magnitudes=np.abs(spectrum),
        range_bin_width=waveform.range_bin_width,
        doppler_bin_width=waveform.doppler_bin_width,
    )


class ClutterFilter:
    """Exponential-moving-average background subtraction in the CSI domain.

    Static reflections accumulate into the background estimate and cancel;
    a moving target de-correlates frame to frame and survives. The first
    ``bootstrap_frames`` frames pass through unmodified while the background
    estimate warms up.
    """

    def __init__(self, alpha: float = 0.1, bootstrap_frames: int = 5):
        if not 0.0 < alpha <= 1.0:
            raise ValueError(f"alpha must be in (0, 1], got {alpha}")
        if bootstrap_frames < 1:
            raise ValueError("at least one bootstrap frame is required")
        self.alpha = alpha
        self.bootstrap_frames = bootstrap_frames
        self._background: np.ndarray | None = None
        self._frames_seen = 0

    def apply(self, z: np.ndarray) -> np.ndarray:
        """Subtract the current background, then fold ``z`` into it."""
        z = np.asarray(z)
        if self._background is not None and z.shape != self._background.shape:
            raise ValueError(
                f"frame shape {z.shape} does not match clutter state {self._background.shape}"
            )
        if self._frames_seen < self.bootstrap_frames:
            out = z.copy()
        else:
            out = z - self._background
        if self._background is None:
            self._background = z.astype(complex, copy=True)
        else:
            self._background = (1.0 - self.alpha) * self._background + self.alpha * z
        self._frames_seen += 1
        return out

    @property
    def frames_seen(self) -> int:
        return self._frames_seen


@dataclass(frozen=True)
class Detection:
    """One detected target in a range-Doppler map.

    ``range_bin``/``doppler_bin`` are the integer peak coordinates
    (Doppler signed, centered at zero); ``r`` and ``v_d`` carry the
    sub-bin quadratic-interpolated values, at most half a bin away from
    the bin center.
    """

    range_bin: int
    doppler_bin: int
    magnitude: float
    r: float
    v_d: float


def _peak_offset(left: float, center: float, right: float) -> float:
    """Sub-bin offset of a spectral peak from its two strongest bins.

    For the unwindowed DFT of a single tone the bin magnitudes follow
    ``|X_m| ~ 1/|m - k0|`` across the peak, which makes
    ``offset = right / (center + right)`` exact (mirrored for the left
    neighbor). Always within half a bin of the peak cell.
    """
    if right >= left:
        denom = center + right
        offset = right / denom if denom > 0 else 0.0
    else:
        denom = center + left
        offset = -left / denom if denom > 0 else 0.0
    return min(0.5, max(-0.5, offset))


def detect(
    rd_map: RangeDopplerMap,
    threshold_factor: float = 12.0,
    interpolate: bool = True,
) -> list[Detection]:
    """Threshold detection of local maxima in a range-Doppler map.

    A cell is a detection when it strictly exceeds its 8-neighborhood and
    its magnitude exceeds ``threshold_factor`` times the map median (a
    relative threshold, so detection survives amplitude scaling). Cells
    below a float-precision floor relative to the map maximum are treated
    as numerically zero. Results are sorted by (range bin, Doppler bin).
    """
    if threshold_factor <= 0:
        raise ValueError(f"threshold_factor must be positive, got {threshold_factor}")
    mag = rd_map.magnitudes
    g, h = mag.shape
    padded = np.pad(mag, 1, constant_values=-np.inf)
    is_peak = np.ones_like(mag, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            is_peak &= mag > padded[1 + di : g + 1 + di, 1 + dj : h + 1 + dj]
    threshold = max(
        threshold_factor * float(np.median(mag)), 1e-12 * float(mag.max(initial=0.0))
    )
    rows, cols = np.nonzero(is_peak & (mag > threshold))

    center = rd_map.zero_doppler_row
    detections = []
    for row, col in zip(rows.tolist(), cols.tolist()):
        range_frac = float(col)
        doppler_frac = float(row - center)
        if interpolate:
            if 0 < col < h - 1:
                range_frac += _peak_offset(mag[row, col - 1], mag[row, col], mag[row, col + 1])
            if 0 < row < g - 1:
                doppler_frac += _peak_offset(mag[row - 1, col], mag[row, col], mag[row + 1, col])
        detections.append(
            Detection(
                range_bin=col,
                doppler_bin=row - center,
                magnitude=float(mag[row, col]),
                r=range_frac * rd_map.range_bin_width,
                v_d=doppler_frac * rd_map.doppler_bin_width,
            )
        )
    detections.sort(key=lambda d: (d.range_bin, d.doppler_bin))
    return detections


def process_frame(
    frame: OfdmFrame,
    clutter: ClutterFilter,
    waveform: WaveformConfig,
    threshold_factor: float = 12.0,
) -> list[Detection]:
    """Full per-frame pipeline; mutates the clutter filter state."""
    z = compute_csi(frame)
    return process_csi(z, clutter, waveform, threshold_factor)


def process_csi(
    z: np.ndarray,
    clutter: ClutterFilter,
    waveform: WaveformConfig,
    threshold_factor: float = 12.0,
) -> list[Detection]:
    """Pipeline tail for callers that already hold the CSI matrix."""
    filtered = clutter.apply(z)
    rd_map = range_doppler(filtered, waveform)
    return detect(rd_map, threshold_factor)
