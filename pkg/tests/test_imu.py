import math

import pytest
from hypothesis import given, strategies as st

from isacpos.imu import (
    DistanceIncrement,
    ImuState,
    dead_reckon,
    nominal_period,
    rotate_to_body,
    rotate_to_global,
    step,
    total_acceleration,
)
from isacpos.types import ImuMeasurement


def measurement(t, ax=0.0, ay=0.0, gz=0.0):
    return ImuMeasurement(t, (ax, ay, 0.0), (0.0, 0.0, gz))


class TestRotation:
    def test_zero_yaw_is_identity(self):
        assert rotate_to_global((1.2, -0.7), 0.0) == (1.2, -0.7)

    def test_quarter_turn(self):
        ax, ay = rotate_to_global((1.0, 0.0), math.pi / 2)
        assert ax == pytest.approx(0.0, abs=1e-12)
        assert ay == pytest.approx(-1.0, abs=1e-12)

    @given(st.floats(-10, 10), st.floats(-10, 10), st.floats(-10, 10))
    def test_norm_preserved(self, ax, ay, phi):
        gx, gy = rotate_to_global((ax, ay), phi)
        assert math.hypot(gx, gy) == pytest.approx(math.hypot(ax, ay), abs=1e-12)

    @given(st.floats(-10, 10), st.floats(-10, 10), st.floats(-10, 10))
    def test_body_round_trip(self, ax, ay, phi):
        gx, gy = rotate_to_global((ax, ay), phi)
        bx, by = rotate_to_body((gx, gy), phi)
        assert bx == pytest.approx(ax, abs=1e-12)
        assert by == pytest.approx(ay, abs=1e-12)


class TestTotalAcceleration:
    def test_three_four_five(self):
        assert total_acceleration((3.0, 4.0)) == 5.0

    def test_zero(self):
        assert total_acceleration((0.0, 0.0)) == 0.0

    def test_sign_insensitive(self):
        assert total_acceleration((-1.0, 0.0)) == 1.0


class TestStep:
    def test_coasting_distance(self):
        state = ImuState(yaw=0.0, velocity=1.0, last_t=0.0)
        _, inc = step(state, measurement(0.02))
        assert inc.d_imu == pytest.approx(0.02)
        assert inc.dt == pytest.approx(0.02)

    def test_stationary_stays_put(self):
        state = ImuState(yaw=0.0, velocity=0.0, last_t=0.0)
        new_state, inc = step(state, measurement(0.02))
        assert inc.d_imu == 0.0
        assert new_state.velocity == 0.0

    def test_constant_acceleration_accumulates(self):
        # 50 steps of 0.02 s at 1 m/s^2 from rest: distance ~ 0.5 m
        state = ImuState(yaw=0.0, velocity=0.0, last_t=0.0)
        total = 0.0
        for k in range(1, 51):
            state, inc = step(state, measurement(0.02 * k, ax=1.0))
            total += inc.d_imu
        assert total == pytest.approx(0.5, rel=0.02)

    def test_non_increasing_timestamp_rejected(self):
        state = ImuState(yaw=0.0, velocity=0.0, last_t=1.0)
        with pytest.raises(ValueError, match="non-increasing"):
            step(state, measurement(1.0))

    def test_velocity_clamped_at_zero(self):
        state = ImuState(yaw=0.0, velocity=0.1, last_t=0.0)
        new_state, inc = step(state, measurement(1.0, ax=-5.0))
        assert new_state.velocity == 0.0
        assert inc.d_imu >= 0.0

    @given(
        st.floats(0.0, 5.0),
        st.floats(-3.0, 3.0),
        st.floats(-3.0, 3.0),
        st.floats(-2.0, 2.0),
        st.floats(0.001, 0.1),
    )
    def test_distance_never_negative(self, v0, ax, ay, gz, dt):
        state = ImuState(yaw=0.3, velocity=v0, last_t=0.0)
        new_state, inc = step(state, measurement(dt, ax=ax, ay=ay, gz=gz))
        assert inc.d_imu >= 0.0
        assert new_state.velocity >= 0.0


class TestDeadReckon:
    def test_one_increment_per_measurement(self):
        stream = [measurement(0.02 * k) for k in range(1, 6)]
        increments = dead_reckon(stream, initial_yaw=0.0)
        assert len(increments) == len(stream)
        assert all(isinstance(i, DistanceIncrement) for i in increments)

    def test_empty_stream(self):
        assert dead_reckon([], initial_yaw=0.0) == []

    def test_nominal_period(self):
        stream = [measurement(0.02 * k) for k in range(1, 10)]
        assert nominal_period(stream) == pytest.approx(0.02)
        assert nominal_period([measurement(0.5)]) == 0.02
