"""Positioning-error metrics: per-sample error, empirical CDF, percentiles,
and the cross-method comparison summary.

Percentiles use the nearest-rank convention (sorted sample at index
``ceil(q*n)``, no interpolation). Ground truth is linearly interpolated at
the estimate timestamps; estimates outside the truth span are dropped and
counted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .types import GroundTruthSample, Pose2D


@dataclass
class ErrorSeries:
    """Per-sample 2D positioning errors over time."""

    t: np.ndarray
    errors: np.ndarray
    dropped: int = 0

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.errors = np.asarray(self.errors, dtype=float)
        if self.errors.size and (np.any(self.errors < 0) or not np.all(np.isfinite(self.errors))):
            raise ValueError("errors must be finite and non-negative")

    @property
    def mean(self) -> float:
        return float(self.errors.mean())


@dataclass(frozen=True)
class SummaryRow:
    """One method's row of the comparison table."""

    method: str
    average_error: float
    p90: float
    sample_count: int


def align_and_error(
    estimates: list[tuple[float, Pose2D]], truth: list[GroundTruthSample]
) -> ErrorSeries:
    """Euclidean error of each estimate against interpolated ground truth."""
    if not truth:
        raise ValueError("empty ground-truth stream")
    tt = np.array([s.t for s in truth])
    tx = np.array([s.position[0] for s in truth])
    ty = np.array([s.position[1] for s in truth])

    times, errors, dropped = [], [], 0
    for t, pose in estimates:
        if t < tt[0] or t > tt[-1]:
            dropped += 1
            continue
        ex = pose.x - np.interp(t, tt, tx)
        ey = pose.y - np.interp(t, tt, ty)
        times.append(t)
        errors.append(math.hypot(ex, ey))
    if not times:
        raise ValueError("no estimates overlap the ground-truth span")
    return ErrorSeries(np.array(times), np.array(errors), dropped)


def cdf(series: ErrorSeries) -> tuple[np.ndarray, np.ndarray]:
    """Empirical CDF: sorted error levels with cumulative fractions k/n."""
    if series.errors.size == 0:
        raise ValueError("empty error series")
    levels = np.sort(series.errors)
    fractions = np.arange(1, levels.size + 1) / levels.size
    return levels, fractions


def percentile(series: ErrorSeries, q: float) -> float:
    """Nearest-rank percentile: sorted sample at index ``ceil(q*n)``."""
    if not 0.0 < q <= 1.0:
        raise ValueError(f"q must be in (0, 1], got {q}")
    if series.errors.size == 0:
        raise ValueError("empty error series")
    levels = np.sort(series.errors)
    rank = math.ceil(q * levels.size)
    return float(levels[rank - 1])


def summarize(
    labeled_series: list[tuple[str, ErrorSeries]]
) -> tuple[list[SummaryRow], str]:
    """Summary rows plus a report of pairwise relative improvements."""
    if not labeled_series:
        raise ValueError("at least one method is required")
    rows = [
        SummaryRow(label, series.mean, percentile(series, 0.9), int(series.errors.size))
        for label, series in labeled_series
    ]
    lines = ["method, average error [m], 90th percentile [m], samples"]
    for row in rows:
        lines.append(
            f"{row.method}: {row.average_error:.4f}, {row.p90:.4f}, {row.sample_count}"
        )
    for i, a in enumerate(rows):
        for b in rows[i + 1 :]:
            if b.average_error > 0:
                gain = (1.0 - a.average_error / b.average_error) * 100.0
                lines.append(
                    f"{a.method} vs {b.method}: {gain:+.1f}% lower average error"
                )
    return rows, "\n".join(lines) + "\n"
