"""Slant-range projection and the geometric position estimate.

The radar measures the 3D path length to the target. Because the sensing
unit is mounted above the target plane, 2D positioning first projects that
slant range onto the ground plane, then places the target on the boresight
ray of the sensing unit.
"""

from __future__ import annotations

import math
import warnings

from .types import Pose2D, SensorGeometry


def project_range(r_3d: float, delta_h: float, slack: float = 0.0) -> float:
    """Project a 3D slant range onto the 2D ground plane.

    ``r_2d = sqrt(r_3d**2 - delta_h**2)``. Measurements that fall short of
    the vertical distance by no more than ``slack`` (typically one range-bin
    width) are clamped to 0 with a warning; anything shorter is rejected as
    geometrically impossible.
    """
    if r_3d < 0:
        raise ValueError(f"r_3d must be non-negative, got {r_3d}")
    gap = abs(delta_h)
    if r_3d >= gap:
        return math.sqrt(r_3d * r_3d - delta_h * delta_h)
    if gap - r_3d <= slack:
        warnings.warn(
            f"range {r_3d:.3f} m is below the height gap {gap:.3f} m; clamping to 0",
            stacklevel=2,
        )
        return 0.0
    raise ValueError(
        f"range {r_3d} m is shorter than the height difference {gap} m "
        f"by more than the allowed slack {slack} m"
    )


def geometric_position(r_2d: float, geom: SensorGeometry) -> Pose2D:
    """Place the target on the boresight ray at distance ``r_2d``."""
    if r_2d < 0:
        raise ValueError(f"r_2d must be non-negative, got {r_2d}")
    px, py = geom.isac_position
    return Pose2D(px + r_2d * math.cos(geom.azimuth), py + r_2d * math.sin(geom.azimuth))


def geometric_track(isac_stream, geom: SensorGeometry, slack: float = 0.0):
    """Geometric baseline over a sensing stream: one pose per measurement."""
    track = []
    for m in isac_stream:
        r_2d = project_range(m.range_3d, geom.delta_h, slack)
        track.append((m.t, geometric_position(r_2d, geom)))
    return track
