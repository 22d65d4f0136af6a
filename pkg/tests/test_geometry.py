import math

import pytest
from hypothesis import given, strategies as st

from isacpos.geometry import geometric_position, geometric_track, project_range
from isacpos.types import IsacMeasurement, SensorGeometry


class TestProjectRange:
    def test_three_four_five(self):
        assert project_range(5.0, 3.0) == pytest.approx(4.0, abs=1e-12)

    def test_zero_height_gap_is_identity(self):
        assert project_range(7.25, 0.0) == 7.25

    def test_boundary_collapses_to_zero(self):
        assert project_range(1.0, 1.0) == 0.0

    def test_short_range_within_slack_clamps_with_warning(self):
        with pytest.warns(UserWarning, match="clamping"):
            assert project_range(0.9, 1.0, slack=0.2) == 0.0

    def test_short_range_beyond_slack_rejected(self):
        with pytest.raises(ValueError, match="height difference"):
            project_range(0.5, 1.0, slack=0.2)

    @given(st.floats(0.0, 50.0), st.floats(-5.0, 5.0))
    def test_round_trip(self, r_3d, delta_h):
        # composing the projection with the slant reconstruction recovers r_3d
        if r_3d < abs(delta_h):
            r_3d, delta_h = abs(delta_h), r_3d  # keep the input geometrically valid
        r_2d = project_range(r_3d, delta_h)
        assert math.hypot(r_2d, delta_h) == pytest.approx(r_3d, rel=1e-12, abs=1e-12)


class TestGeometricPosition:
    def test_boresight_along_x(self):
        geom = SensorGeometry(isac_position=(0.0, 0.0), azimuth=0.0)
        pose = geometric_position(2.0, geom)
        assert (pose.x, pose.y) == pytest.approx((2.0, 0.0), abs=1e-12)

    def test_zero_range_returns_sensor_position(self):
        geom = SensorGeometry(isac_position=(1.0, 1.0))
        pose = geometric_position(0.0, geom)
        assert (pose.x, pose.y) == (1.0, 1.0)

    def test_quarter_turn_axis_case(self):
        geom = SensorGeometry(isac_position=(0.0, 0.0), azimuth=math.pi / 2)
        pose = geometric_position(1.0, geom)
        assert (pose.x, pose.y) == pytest.approx((0.0, 1.0), abs=1e-12)

    def test_negative_range_rejected(self):
        with pytest.raises(ValueError):
            geometric_position(-1.0, SensorGeometry())

    @given(st.floats(0.0, 20.0), st.floats(-math.pi, math.pi))
    def test_estimate_lies_on_range_circle(self, r_2d, azimuth):
        geom = SensorGeometry(isac_position=(0.4, -1.2), azimuth=azimuth)
        pose = geometric_position(r_2d, geom)
        dist = math.hypot(pose.x - 0.4, pose.y + 1.2)
        assert dist == pytest.approx(r_2d, rel=1e-12, abs=1e-12)

    def test_zero_azimuth_varies_only_along_x(self):
        # the boresight-only estimate collapses all motion onto the x axis
        geom = SensorGeometry(isac_position=(0.0, 1.0), azimuth=0.0)
        stream = [IsacMeasurement(t, 2.0 + 0.3 * t, 0.0) for t in range(5)]
        track = geometric_track(stream, geom)
        ys = {pose.y for _, pose in track}
        xs = {pose.x for _, pose in track}
        assert ys == {1.0}
        assert len(xs) == len(track)
