import numpy as np
import pytest

from isacpos import io
from isacpos.types import GroundTruthSample, ImuMeasurement, IsacMeasurement, Pose2D


class TestCsvRoundTrips:
    def test_isac(self, tmp_path):
        stream = [IsacMeasurement(0.1, 1.2345678901234567, -0.25)]
        path = tmp_path / "isac.csv"
        io.write_isac_csv(path, stream)
        assert path.read_text().splitlines()[0] == "t,range_3d,doppler_velocity"
        assert io.read_isac_csv(path) == stream

    def test_imu(self, tmp_path):
        stream = [ImuMeasurement(0.02, (0.1, -0.2, 0.3), (1e-9, 0.0, 0.7))]
        path = tmp_path / "imu.csv"
        io.write_imu_csv(path, stream)
        assert path.read_text().splitlines()[0] == "t,ax,ay,az,gx,gy,gz"
        assert io.read_imu_csv(path) == stream

    def test_truth(self, tmp_path):
        stream = [GroundTruthSample(0.0, (0.5, 3.4999999999999996))]
        path = tmp_path / "truth.csv"
        io.write_truth_csv(path, stream)
        assert io.read_truth_csv(path) == stream

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "isac.csv"
        path.write_text("time,r,v\n0,1,2\n")
        with pytest.raises(ValueError, match="bad header"):
            io.read_isac_csv(path)

    def test_estimates(self, tmp_path):
        path = tmp_path / "est.csv"
        io.write_estimates_csv(path, [(0.1, Pose2D(1.0, 2.0))])
        assert io.read_estimates_csv(path) == [(0.1, 1.0, 2.0)]


class TestAtomicWrite:
    def test_success_replaces(self, tmp_path):
        path = tmp_path / "out.txt"
        path.write_text("old")
        with io.atomic_write(path) as handle:
            handle.write("new")
        assert path.read_text() == "new"
        assert list(tmp_path.iterdir()) == [path]

    def test_failure_leaves_original(self, tmp_path):
        path = tmp_path / "out.txt"
        path.write_text("old")
        with pytest.raises(RuntimeError):
            with io.atomic_write(path) as handle:
                handle.write("partial")
                raise RuntimeError("boom")
        assert path.read_text() == "old"
        assert list(tmp_path.iterdir()) == [path]


class TestCsiDump:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(3)
        z = (rng.standard_normal((4, 6)) + 1j * rng.standard_normal((4, 6))).astype(
            np.complex64
        )
        path = tmp_path / "frame.csi"
        io.write_csi_dump(path, z)
        raw = path.read_bytes()
        assert raw[:4] == b"CSI1"
        assert len(raw) == 16 + 4 * 6 * 8  # 16-byte header + complex64 payload
        back = io.read_csi_dump(path)
        assert back.shape == (4, 6)
        np.testing.assert_array_equal(back, z)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "frame.csi"
        path.write_bytes(b"NOPE" + bytes(12))
        with pytest.raises(ValueError, match="magic"):
            io.read_csi_dump(path)

    def test_truncated_rejected(self, tmp_path):
        path = tmp_path / "frame.csi"
        io.write_csi_dump(path, np.ones((2, 2), dtype=np.complex64))
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(ValueError, match="expected 4 samples"):
            io.read_csi_dump(path)
