"""CSV measurement-log schemas, estimate files, and the binary CSI dump.

All text files are UTF-8 CSV with a mandatory header row and plain decimal
numbers. Floats are written with ``repr`` so files round-trip bit-exactly.
Every writer goes through :func:`atomic_write`: files are staged next to the
destination and renamed into place, so interrupted runs never leave
truncated output.
"""

from __future__ import annotations

import csv
import os
import struct
import tempfile
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .types import GroundTruthSample, ImuMeasurement, IsacMeasurement

ISAC_HEADER = ["t", "range_3d", "doppler_velocity"]
IMU_HEADER = ["t", "ax", "ay", "az", "gx", "gy", "gz"]
TRUTH_HEADER = ["t", "px", "py"]
ESTIMATE_HEADER = ["t", "px", "py"]
FUSION_ESTIMATE_HEADER = ["t", "px", "py", "stage1_used"]
ERROR_HEADER = ["t", "error_m"]
CDF_HEADER = ["error_m", "fraction"]

_CSI_MAGIC = b"CSI1"
_CSI_HEADER = struct.Struct("<4sII4x")  # magic, G, H, 4 reserved bytes = 16 bytes


@contextmanager
def atomic_write(path: str | Path, binary: bool = False):
    """Yield a file handle whose contents replace ``path`` only on success."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        mode = "wb" if binary else "w"
        with os.fdopen(fd, mode, newline="" if not binary else None) as handle:
            yield handle
        os.replace(tmp_name, path)
    except BaseException:
        os.unlink(tmp_name)
        raise


def _fmt(x: float) -> str:
    return repr(float(x))


def _write_rows(path, header, rows) -> None:
    with atomic_write(path) as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows(rows)


def _read_rows(path, expected_header) -> list[list[str]]:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file, expected header {expected_header}")
        if header != expected_header:
            raise ValueError(f"{path}: bad header {header}, expected {expected_header}")
        return [row for row in reader if row]


def write_isac_csv(path, measurements: list[IsacMeasurement]) -> None:
    _write_rows(
        path,
        ISAC_HEADER,
        ([_fmt(m.t), _fmt(m.range_3d), _fmt(m.doppler_velocity)] for m in measurements),
    )


def read_isac_csv(path) -> list[IsacMeasurement]:
    return [
        IsacMeasurement(float(t), float(r), float(v))
        for t, r, v in _read_rows(path, ISAC_HEADER)
    ]


def write_imu_csv(path, measurements: list[ImuMeasurement]) -> None:
    _write_rows(
        path,
        IMU_HEADER,
        (
            [_fmt(m.t), *(_fmt(a) for a in m.accel_body), *(_fmt(g) for g in m.gyro)]
            for m in measurements
        ),
    )


def read_imu_csv(path) -> list[ImuMeasurement]:
    out = []
    for row in _read_rows(path, IMU_HEADER):
        t, ax, ay, az, gx, gy, gz = (float(v) for v in row)
        out.append(ImuMeasurement(t, (ax, ay, az), (gx, gy, gz)))
    return out


def write_truth_csv(path, samples: list[GroundTruthSample]) -> None:
    _write_rows(
        path,
        TRUTH_HEADER,
        ([_fmt(s.t), _fmt(s.position[0]), _fmt(s.position[1])] for s in samples),
    )


def read_truth_csv(path) -> list[GroundTruthSample]:
    return [
        GroundTruthSample(float(t), (float(x), float(y)))
        for t, x, y in _read_rows(path, TRUTH_HEADER)
    ]


def write_estimates_csv(path, estimates) -> None:
    """Write ``(t, Pose2D)`` pairs with the plain estimate schema."""
    _write_rows(
        path,
        ESTIMATE_HEADER,
        ([_fmt(t), _fmt(p.x), _fmt(p.y)] for t, p in estimates),
    )


def read_estimates_csv(path) -> list[tuple[float, float, float]]:
    return [
        (float(t), float(x), float(y)) for t, x, y in _read_rows(path, ESTIMATE_HEADER)
    ]


def write_fusion_estimates_csv(path, estimates) -> None:
    """Write fusion estimates including the stage-1 usage flag (0/1)."""
    _write_rows(
        path,
        FUSION_ESTIMATE_HEADER,
        (
            [_fmt(e.t), _fmt(e.position.x), _fmt(e.position.y), str(int(e.stage1_used))]
            for e in estimates
        ),
    )


def write_error_csv(path, times, errors) -> None:
    _write_rows(
        path, ERROR_HEADER, ([_fmt(t), _fmt(e)] for t, e in zip(times, errors))
    )


def write_cdf_csv(path, levels, fractions) -> None:
    _write_rows(
        path, CDF_HEADER, ([_fmt(l), _fmt(f)] for l, f in zip(levels, fractions))
    )


def write_csi_dump(path, z: np.ndarray) -> None:
    """Dump a complex CSI matrix as little-endian complex64, row-major.

    Layout: 16-byte header (magic ``CSI1``, G and H as 32-bit unsigned,
    4 reserved bytes), then G*H interleaved float32 re/im pairs.
    """
    z = np.asarray(z)
    if z.ndim != 2:
        raise ValueError(f"CSI matrix must be 2D, got shape {z.shape}")
    g, h = z.shape
    with atomic_write(path, binary=True) as handle:
        handle.write(_CSI_HEADER.pack(_CSI_MAGIC, g, h))
        handle.write(np.ascontiguousarray(z, dtype=np.complex64).tobytes())


def read_csi_dump(path) -> np.ndarray:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _CSI_HEADER.size:
        raise ValueError(f"{path}: truncated CSI dump")
    magic, g, h = _CSI_HEADER.unpack_from(raw)
    if magic != _CSI_MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    body = np.frombuffer(raw, dtype="<c8", offset=_CSI_HEADER.size)
    if body.size != g * h:
        raise ValueError(f"{path}: expected {g * h} samples, found {body.size}")
    return body.reshape(g, h).astype(np.complex64)
