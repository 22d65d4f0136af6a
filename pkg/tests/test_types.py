import math

import pytest
from hypothesis import given, strategies as st

from isacpos.types import (
    IMU_SOURCE,
    ISAC_SOURCE,
    GroundTruthSample,
    ImuMeasurement,
    IsacMeasurement,
    Pose2D,
    merge_streams,
)


def imu_at(t):
    return ImuMeasurement(t, (0.0, 0.0, 0.0), (0.0, 0.0, 0.0))


def isac_at(t):
    return IsacMeasurement(t, 1.0, 0.0)


class TestValidation:
    def test_negative_range_rejected(self):
        with pytest.raises(ValueError, match="range_3d"):
            IsacMeasurement(0.0, -0.1, 0.0)

    def test_negative_timestamp_rejected(self):
        with pytest.raises(ValueError, match="non-negative"):
            imu_at(-1.0)

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError, match="finite"):
            Pose2D(math.nan, 0.0)
        with pytest.raises(ValueError, match="finite"):
            ImuMeasurement(0.0, (math.inf, 0.0, 0.0), (0.0, 0.0, 0.0))

    def test_truth_sample_fields(self):
        s = GroundTruthSample(1.5, (2.0, 3.0))
        assert s.t == 1.5 and s.position == (2.0, 3.0)


class TestMergeStreams:
    def test_sorted_by_time(self):
        events = merge_streams([isac_at(0.030)], [imu_at(0.020), imu_at(0.040)])
        assert [(e.t, e.source) for e in events] == [
            (0.020, IMU_SOURCE),
            (0.030, ISAC_SOURCE),
            (0.040, IMU_SOURCE),
        ]

    def test_empty_stream_identity(self):
        events = merge_streams([], [imu_at(0.020)])
        assert [(e.t, e.source) for e in events] == [(0.020, IMU_SOURCE)]

    def test_tie_breaks_imu_first(self):
        events = merge_streams([isac_at(0.020)], [imu_at(0.020)])
        assert [e.source for e in events] == [IMU_SOURCE, ISAC_SOURCE]

    def test_non_monotonic_rejected_with_index(self):
        with pytest.raises(ValueError, match="index 2"):
            merge_streams([isac_at(1.0), isac_at(2.0), isac_at(1.5)], [])
        with pytest.raises(ValueError, match="imu"):
            merge_streams([], [imu_at(1.0), imu_at(0.5)])

    @given(
        st.lists(st.floats(0.0, 100.0, allow_nan=False), max_size=30),
        st.lists(st.floats(0.0, 100.0, allow_nan=False), max_size=30),
    )
    def test_merge_properties(self, isac_times, imu_times):
        isac = [isac_at(t) for t in sorted(isac_times)]
        imu = [imu_at(t) for t in sorted(imu_times)]
        events = merge_streams(isac, imu)
        assert len(events) == len(isac) + len(imu)
        times = [e.t for e in events]
        assert times == sorted(times)
        # filtering by source tag recovers each input exactly
        assert [e.measurement for e in events if e.source == ISAC_SOURCE] == isac
        assert [e.measurement for e in events if e.source == IMU_SOURCE] == imu
