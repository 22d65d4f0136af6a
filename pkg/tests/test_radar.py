import numpy as np
import pytest

from isacpos.radar import (
    ClutterFilter,
    OfdmFrame,
    WaveformConfig,
    compute_csi,
    detect,
    process_frame,
    range_doppler,
)
from isacpos.types import SPEED_OF_LIGHT


@pytest.fixture
def small_wf():
    # 16 symbols x 32 subcarriers keeps unit tests instant
    return WaveformConfig(
        bandwidth=32 * 120e3, subcarrier_spacing=120e3, num_symbols=16
    )


def tone(wf, range_bin=0.0, doppler_bin=0.0, amplitude=1.0):
    """CSI matrix of a single point target at fractional bin coordinates."""
    g = np.arange(wf.num_symbols)
    h = np.arange(wf.num_subcarriers)
    return amplitude * np.outer(
        np.exp(2j * np.pi * g * doppler_bin / wf.num_symbols),
        np.exp(-2j * np.pi * h * range_bin / wf.num_subcarriers),
    )


class TestWaveformConfig:
    def test_defaults_match_hardware_numbers(self):
        wf = WaveformConfig()
        assert wf.num_subcarriers == 1666
        assert wf.range_bin_width == pytest.approx(
            SPEED_OF_LIGHT / (2 * 1666 * 120e3)
        )
        assert wf.range_bin_width == pytest.approx(0.75, abs=0.01)
        assert wf.doppler_bin_width == pytest.approx(1.99, abs=0.01)

    def test_too_many_subcarriers_rejected(self):
        with pytest.raises(ValueError, match="exceed"):
            WaveformConfig(bandwidth=1e6, subcarrier_spacing=120e3, num_subcarriers=16)

    def test_degenerate_sizes_rejected(self):
        with pytest.raises(ValueError, match="at least 2"):
            WaveformConfig(num_symbols=1)


class TestComputeCsi:
    def test_identical_frames_give_ones(self):
        u = np.full((3, 4), 2.0 + 1j)
        z = compute_csi(OfdmFrame(u, u))
        np.testing.assert_allclose(z, np.ones((3, 4)))

    def test_unit_tx_passes_rx_through(self):
        rx = np.arange(12, dtype=complex).reshape(3, 4) + 1j
        z = compute_csi(OfdmFrame(np.ones((3, 4)), rx))
        np.testing.assert_array_equal(z, rx)

    def test_two_by_two_division(self):
        v = np.array([[2.0, 0.0], [0.0, 2.0j]])
        u = np.ones((2, 2))
        np.testing.assert_array_equal(compute_csi(OfdmFrame(u, v)), v)

    def test_zero_tx_element_rejected_with_indices(self):
        u = np.ones((3, 4), dtype=complex)
        u[1, 2] = 0.0
        with pytest.raises(ValueError, match="symbol 1, subcarrier 2"):
            compute_csi(OfdmFrame(u, np.ones((3, 4))))

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError, match="equal-shape"):
            OfdmFrame(np.ones((2, 3)), np.ones((3, 2)))


class TestRangeDoppler:
    def test_pure_delay_tone_peaks_at_range_bin(self, small_wf):
        z = tone(small_wf, range_bin=4)
        m = range_doppler(z, small_wf)
        row, col = np.unravel_index(np.argmax(m.magnitudes), m.magnitudes.shape)
        assert col == 4
        assert row == m.zero_doppler_row

    def test_constant_matrix_is_dc(self, small_wf):
        m = range_doppler(np.ones((small_wf.num_symbols, small_wf.num_subcarriers)), small_wf)
        row, col = np.unravel_index(np.argmax(m.magnitudes), m.magnitudes.shape)
        assert (row, col) == (m.zero_doppler_row, 0)

    def test_parseval_under_documented_normalization(self, small_wf):
        # unnormalized forward FFT x 1/H inverse: map energy = (G/H) * CSI energy
        rng = np.random.default_rng(0)
        z = rng.standard_normal((16, 32)) + 1j * rng.standard_normal((16, 32))
        m = range_doppler(z, small_wf)
        lhs = np.sum(m.magnitudes**2)
        rhs = (16 / 32) * np.sum(np.abs(z) ** 2)
        assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_linearity_in_amplitude(self, small_wf):
        z = tone(small_wf, range_bin=3.3, doppler_bin=1.2)
        base = range_doppler(z, small_wf).magnitudes
        scaled = range_doppler(-2.5j * z, small_wf).magnitudes
        np.testing.assert_allclose(scaled, 2.5 * base, rtol=1e-12, atol=1e-9)

    def test_shift_property_moves_range_peak(self, small_wf):
        h = np.arange(small_wf.num_subcarriers)
        z = tone(small_wf, range_bin=2)
        shifted = z * np.exp(-2j * np.pi * h * 5 / small_wf.num_subcarriers)
        m = range_doppler(shifted, small_wf)
        _, col = np.unravel_index(np.argmax(m.magnitudes), m.magnitudes.shape)
        assert col == (2 + 5) % small_wf.num_subcarriers


class TestClutterFilter:
    def test_static_scene_residual_vanishes(self, small_wf):
        rng = np.random.default_rng(1)
        frame = rng.standard_normal((4, 8)) + 1j * rng.standard_normal((4, 8))
        filt = ClutterFilter(alpha=0.1, bootstrap_frames=5)
        residual = None
        for _ in range(50):
            residual = filt.apply(frame)
        assert np.linalg.norm(residual) <= 1e-6 * np.linalg.norm(frame)

    def test_alpha_one_subtracts_previous_frame(self):
        filt = ClutterFilter(alpha=1.0, bootstrap_frames=1)
        z1 = np.ones((2, 2), dtype=complex)
        z2 = np.full((2, 2), 3.0 + 1j)
        filt.apply(z1)
        np.testing.assert_allclose(filt.apply(z2), z2 - z1)

    def test_bootstrap_passes_frames_through(self):
        filt = ClutterFilter(alpha=0.5, bootstrap_frames=3)
        z = np.full((2, 2), 2.0 + 0j)
        for _ in range(3):
            np.testing.assert_array_equal(filt.apply(z), z)
        assert np.abs(filt.apply(z)).max() < 1e-12

    def test_shape_mismatch_rejected(self):
        filt = ClutterFilter()
        filt.apply(np.ones((2, 2)))
        with pytest.raises(ValueError, match="shape"):
            filt.apply(np.ones((3, 3)))

    def test_bad_alpha_rejected(self):
        with pytest.raises(ValueError, match="alpha"):
            ClutterFilter(alpha=0.0)

    def test_moving_target_survives_static_clutter(self, small_wf):
        # moving target keeps >= 90% peak magnitude, clutter drops >= 20 dB
        clutter = tone(small_wf, range_bin=3, amplitude=1.0)
        filt = ClutterFilter(alpha=0.1, bootstrap_frames=5)
        wavelength = SPEED_OF_LIGHT / small_wf.center_frequency
        speed = 0.3  # m/s toward the sensor
        frame_rate = 33.0
        r0 = 12 * small_wf.range_bin_width
        target_mag = clutter_mag = None
        for k in range(50):
            r = r0 - speed * k / frame_rate
            phase = np.exp(-4j * np.pi * r / wavelength)
            target = phase * tone(small_wf, range_bin=r / small_wf.range_bin_width)
            filtered = filt.apply(clutter + target)
            m = range_doppler(filtered, small_wf)
            target_mag = m.magnitudes[:, int(round(r / small_wf.range_bin_width))].max()
            clutter_mag = m.magnitudes[m.zero_doppler_row, 3]
        reference = range_doppler(tone(small_wf, range_bin=12), small_wf).magnitudes.max()
        clutter_reference = range_doppler(clutter, small_wf).magnitudes.max()
        assert target_mag >= 0.9 * reference
        assert clutter_mag <= clutter_reference * 10 ** (-20 / 20)


class TestDetect:
    def test_single_tone_single_detection(self, small_wf):
        m = range_doppler(tone(small_wf, range_bin=4), small_wf)
        detections = detect(m, threshold_factor=12.0)
        assert len(detections) == 1
        d = detections[0]
        assert (d.range_bin, d.doppler_bin) == (4, 0)
        assert d.r == pytest.approx(4 * small_wf.range_bin_width, abs=1e-9)
        assert d.v_d == pytest.approx(0.0, abs=1e-9)

    def test_all_zero_map_has_no_detections(self, small_wf):
        m = range_doppler(np.zeros((16, 32), dtype=complex), small_wf)
        assert detect(m) == []

    def test_two_separated_tones_two_detections(self, small_wf):
        z = tone(small_wf, range_bin=4) + tone(small_wf, range_bin=20, doppler_bin=5)
        detections = detect(range_doppler(z, small_wf), threshold_factor=12.0)
        assert [(d.range_bin, d.doppler_bin) for d in detections] == [(4, 0), (20, 5)]

    def test_output_sorted_by_bins(self, small_wf):
        z = (
            tone(small_wf, range_bin=20, doppler_bin=-3)
            + tone(small_wf, range_bin=4, doppler_bin=5)
            + tone(small_wf, range_bin=4, doppler_bin=-5)
        )
        detections = detect(range_doppler(z, small_wf), threshold_factor=6.0)
        keys = [(d.range_bin, d.doppler_bin) for d in detections]
        assert keys == sorted(keys)

    def test_threshold_is_relative_to_median(self, small_wf):
        z = tone(small_wf, range_bin=4)
        m = range_doppler(z, small_wf)
        scaled = range_doppler(1000.0 * z, small_wf)
        assert len(detect(m, 12.0)) == len(detect(scaled, 12.0))

    def test_subbin_interpolation_recovers_fractional_position(self, small_wf):
        z = tone(small_wf, range_bin=6.3, doppler_bin=-2.6)
        detections = detect(range_doppler(z, small_wf), threshold_factor=6.0)
        best = max(detections, key=lambda d: d.magnitude)
        assert best.r / small_wf.range_bin_width == pytest.approx(6.3, abs=0.05)
        assert best.v_d / small_wf.doppler_bin_width == pytest.approx(-2.6, abs=0.05)

    def test_invalid_threshold_rejected(self, small_wf):
        m = range_doppler(np.ones((16, 32)), small_wf)
        with pytest.raises(ValueError, match="threshold_factor"):
            detect(m, threshold_factor=0.0)


class TestProcessFrame:
    def test_end_to_end_target_recovery(self, small_wf):
        # noiseless target at 3.0 m recovered within one range bin
        r_true = 3.0
        z = tone(small_wf, range_bin=r_true / small_wf.range_bin_width)
        frame = OfdmFrame(np.ones_like(z), z)
        filt = ClutterFilter(bootstrap_frames=1)
        detections = process_frame(frame, filt, small_wf)
        assert detections
        best = max(detections, key=lambda d: d.magnitude)
        assert abs(best.r - r_true) <= small_wf.range_bin_width
