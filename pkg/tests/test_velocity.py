import os
import sys
sys.path.insert(0, os.path.abspath('../'))

import unittest

import numpy as np

from nlhrflow.beamforming import SlowTimeEnsemble
from nlhrflow.data_validation import ConfigError
from nlhrflow.geometry import AcquisitionConfig
from nlhrflow.metrics import wrap_angle
from nlhrflow.velocity import (
    EstimatorConfig,
    dcc_estimate,
    directional_line,
    estimator_errors,
    kasai_frequency,
    parabolic_peak,
    slowtime_spectrogram,
    tac_estimate,
    tac_field,
    tac_forward,
    validate_estimator,
    velocity_polar,
    velocity_trace,
)


class KasaiTestCase(unittest.TestCase):

    def setUp(self):
        self.prf = 10e3
        self.n = np.arange(64)

    def test_recovers_frequency(self):
        for f in np.linspace(-0.45, 0.45, 100) * self.prf:
            series = np.exp(2j * np.pi * f * self.n / self.prf)
            self.assertLess(abs(kasai_frequency(series, self.prf) - f), 0.005 * self.prf)

    def test_aliasing(self):
        series = np.exp(2j * np.pi * 0.6 * self.n)
        self.assertAlmostEqual(kasai_frequency(series, self.prf), -0.4 * self.prf, places=6)

    def test_axis_and_zero_series(self):
        series = np.stack([np.exp(2j * np.pi * 0.1 * self.n), np.zeros(64)])
        f = kasai_frequency(series.T, 1.0, axis=0)
        self.assertAlmostEqual(f[0], 0.1)
        self.assertTrue(np.isnan(f[1]))

    def test_static_scatterers_give_zero(self):
        self.assertEqual(kasai_frequency(np.full(32, 2.0 + 1.0j), self.prf), 0.0)

    def test_too_short(self):
        with self.assertRaises(ConfigError):
            kasai_frequency(np.ones(1), self.prf)


class TriangulationTestCase(unittest.TestCase):

    def test_round_trip(self):
        c, f_prime = 1540.0, 16e6
        for v in (0.05, 0.25, 0.5):
            for theta in range(-170, 181, 10):
                for alpha in (6.0, 9.0, 12.0, 15.0):
                    f_L, f_R = tac_forward(v, theta, alpha, f_prime, c)
                    magnitude, angle = velocity_polar(*tac_estimate(f_L, f_R, alpha, f_prime, c))
                    self.assertAlmostEqual(magnitude / v, 1.0, places=6)
                    self.assertAlmostEqual(float(wrap_angle(angle - theta)), 0.0, places=4)

    def test_transverse_flow(self):
        ##lateral motion shifts the two sides in opposite directions
        f_L, f_R = tac_forward(0.5, 90.0, 10.0, 8e6, 1540.0)
        self.assertAlmostEqual(f_L, -f_R)
        self.assertGreater(f_L, 0)

    def test_zero_alpha(self):
        with self.assertRaises(ConfigError):
            tac_estimate(100.0, 50.0, 0.0, 8e6, 1540.0)

    def test_mirror_symmetry(self):
        ##swapping the sides mirrors the scene about the depth axis
        rng = np.random.default_rng(5)
        f_L, f_R = rng.uniform(-2e3, 2e3, (2, 50))
        v_axial, v_lateral = tac_estimate(f_L, f_R, 12.0, 16e6, 1540.0)
        mirrored_axial, mirrored_lateral = tac_estimate(f_R, f_L, 12.0, 16e6, 1540.0)
        np.testing.assert_allclose(mirrored_axial, v_axial)
        np.testing.assert_allclose(mirrored_lateral, -v_lateral)

    def test_polar(self):
        magnitude, angle = velocity_polar(0.0, -1.0)
        self.assertEqual(magnitude, 1.0)
        self.assertEqual(angle, -90.0)
        self.assertEqual(velocity_polar(-1.0, 0.0)[1], 180.0)


class EstimatorConfigTestCase(unittest.TestCase):

    def test_window(self):
        cfg = EstimatorConfig()
        self.assertEqual(cfg.window_length(20e3), 16)
        self.assertEqual(cfg.hop_length(20e3), 16)
        self.assertEqual(EstimatorConfig(window_hop=0.2e-3).hop_length(20e3), 4)

    def test_errors(self):
        cfg = EstimatorConfig(estimator="fft", k_window=0.05e-3, L_window=0.0, dcc_lag=0)
        self.assertEqual(len(estimator_errors(cfg, 20e3)), 4)
        with self.assertRaises(ConfigError) as context:
            validate_estimator(cfg, 20e3)
        self.assertEqual(len(context.exception.errors), 4)
        self.assertEqual(estimator_errors(EstimatorConfig(), 20e3), [])


class TacFieldTestCase(unittest.TestCase):

    def setUp(self):
        self.acquisition = AcquisitionConfig(8e6, 50e6, 10e3)
        self.prf = 20e3
        self.alpha_set = (6.0, 9.0, 12.0, 15.0)
        self.n = np.arange(64)

    def _ensemble(self, v, theta, num_pixels=3):
        left, right = [], []
        for alpha in self.alpha_set:
            f_L, f_R = tac_forward(v, theta, alpha, 8e6, 1540.0)
            left.append(np.tile(np.exp(2j * np.pi * f_L * self.n / self.prf), (num_pixels, 1)))
            right.append(np.tile(np.exp(2j * np.pi * f_R * self.n / self.prf), (num_pixels, 1)))
        return SlowTimeEnsemble(np.array(left), np.array(right), self.alpha_set, "das", 8e6,
                                self.prf, None)

    def test_known_velocity(self):
        field = tac_field(self._ensemble(0.3, 70.0), EstimatorConfig(), self.acquisition)
        self.assertEqual(field.magnitude.shape, (3, 4))
        np.testing.assert_allclose(field.magnitude, 0.3, rtol=1e-6)
        np.testing.assert_allclose(field.angle, 70.0, atol=1e-4)
        np.testing.assert_allclose(field.vx, 0.3 * np.sin(np.radians(70.0)), rtol=1e-6)
        np.testing.assert_allclose(field.window_times, (np.arange(4) * 16 + 7.5) / self.prf)
        self.assertTrue(np.all(field.valid))
        self.assertEqual(field.meta["window_frames"], 16)

    def test_static(self):
        field = tac_field(self._ensemble(0.0, 90.0), EstimatorConfig(), self.acquisition)
        np.testing.assert_allclose(field.magnitude, 0.0, atol=1e-12)

    def test_swapped_sides_mirror_the_angle(self):
        slowtime = self._ensemble(0.3, 70.0)
        swapped = SlowTimeEnsemble(slowtime.right, slowtime.left, self.alpha_set, "das", 8e6,
                                   self.prf)
        field = tac_field(swapped, EstimatorConfig(), self.acquisition)
        np.testing.assert_allclose(field.magnitude, 0.3, rtol=1e-6)
        np.testing.assert_allclose(field.angle, -70.0, atol=1e-4)

    def test_masked_angle_is_skipped(self):
        slowtime = self._ensemble(0.3, 70.0)
        left = slowtime.left.copy()
        left[0, 1] = np.nan
        slowtime = SlowTimeEnsemble(left, slowtime.right, self.alpha_set, "das", 8e6, self.prf)
        field = tac_field(slowtime, EstimatorConfig(), self.acquisition)
        np.testing.assert_allclose(field.magnitude[1], 0.3, rtol=1e-6)

    def test_fully_masked_pixel(self):
        slowtime = self._ensemble(0.3, 70.0)
        left = slowtime.left.copy()
        left[:, 2] = np.nan
        slowtime = SlowTimeEnsemble(left, slowtime.right, self.alpha_set, "das", 8e6, self.prf)
        field = tac_field(slowtime, EstimatorConfig(), self.acquisition)
        self.assertFalse(np.any(field.valid[2]))
        self.assertTrue(np.all(np.isnan(field.magnitude[2])))

    def test_window_longer_than_record(self):
        with self.assertRaises(ConfigError):
            tac_field(self._ensemble(0.3, 70.0), EstimatorConfig(k_window=10e-3),
                      self.acquisition)

    def test_trace(self):
        field = tac_field(self._ensemble(0.3, 70.0), EstimatorConfig(), self.acquisition)
        times, magnitude, angle = velocity_trace(field, 0)
        self.assertEqual(times.size, 4)
        np.testing.assert_allclose(magnitude, 0.3, rtol=1e-6)


class DirectionalCrossCorrelationTestCase(unittest.TestCase):

    def setUp(self):
        rng = np.random.default_rng(1)
        self.frequencies = rng.uniform(0.02, 0.08, 10)
        self.phases = rng.uniform(0, 2 * np.pi, 10)
        self.amplitudes = rng.uniform(0.5, 1.0, 10)
        self.cfg = EstimatorConfig(estimator="dcc", k_window=8, dcc_spacing=0.1,
                                   dcc_max_shift=0.5)

    def _lines(self, shift, num_frames=16, num_points=201):
        """Band-limited pattern moving ``shift`` samples per frame."""
        p = np.arange(num_points)[:, None]
        n = np.arange(num_frames)[None, :]
        lines = np.zeros((num_points, num_frames))
        for f, phi, a in zip(self.frequencies, self.phases, self.amplitudes):
            lines += a * np.cos(2 * np.pi * f * (p - n * shift) + phi)
        return lines[None]

    def test_fractional_shifts(self):
        for shift in (-3.0, -2.25, -1.7, -0.5, 0.0, 0.3, 1.0, 1.6, 2.5, 3.0):
            v = dcc_estimate(self._lines(shift), 1.0, 1, self.cfg, 1.0)
            self.assertEqual(v.shape, (2,))
            ##v = shift * spacing * lambda * prf
            np.testing.assert_array_less(np.abs(v / 0.1 - shift), 0.25)

    def test_lines_are_averaged(self):
        lines = np.concatenate([self._lines(1.5), self._lines(1.5)])
        lines[1, 0, 0] = np.nan
        v = dcc_estimate(lines, 1.0, 1, self.cfg, 1.0)
        np.testing.assert_array_less(np.abs(v / 0.1 - 1.5), 0.25)

    def test_lag(self):
        v = dcc_estimate(self._lines(1.0), 1.0, 2, self.cfg, 1.0)
        np.testing.assert_array_less(np.abs(v / 0.1 - 1.0), 0.25)

    def test_time_reversal(self):
        lines = self._lines(1.3)
        forward = dcc_estimate(lines, 1.0, 1, self.cfg, 1.0)
        backward = dcc_estimate(lines[..., ::-1], 1.0, 1, self.cfg, 1.0)
        self.assertTrue(np.all(forward > 0))
        self.assertTrue(np.all(backward < 0))
        ##the reversed record lists the windows in reverse order
        np.testing.assert_allclose(backward, -forward[::-1], atol=0.05)

    def test_unusable_lines(self):
        lines = self._lines(1.0)
        lines[0, 5, 3] = np.nan
        self.assertTrue(np.all(np.isnan(dcc_estimate(lines, 1.0, 1, self.cfg, 1.0))))

    def test_short_line(self):
        with self.assertRaises(ConfigError):
            dcc_estimate(self._lines(1.0, num_points=11), 1.0, 1, self.cfg, 1.0)

    def test_parabolic_peak(self):
        x = np.array([-1.0, 0.0, 1.0])
        y = -(x - 0.3) ** 2
        self.assertAlmostEqual(parabolic_peak(*y), 0.3)
        self.assertEqual(parabolic_peak(1.0, 2.0, 1.0), 0.0)
        self.assertEqual(parabolic_peak(1.0, 0.0, 1.0), 0.0)


class DirectionalLineTestCase(unittest.TestCase):

    def test_lateral_line(self):
        wavelength = 1.925e-4
        line = directional_line((0.0, 15e-3), 90.0, 20, 0.1, wavelength)
        self.assertEqual(line.num_pixels, 201)
        np.testing.assert_allclose(line.z, 15e-3)
        self.assertAlmostEqual(line.x[0], -10 * wavelength)
        self.assertAlmostEqual(line.x[-1], 10 * wavelength)
        self.assertTrue(np.all(line.valid))

    def test_region_masks_points(self):
        line = directional_line((0.0, 15e-3), 90.0, 20, 0.1, 1e-4,
                                region=(-0.505e-3, 0.505e-3, 0.0, np.inf))
        self.assertEqual(int(line.valid.sum()), 101)

    def test_points_above_the_array(self):
        line = directional_line((0.0, 0.5e-3), 0.0, 20, 0.1, 1e-4)
        self.assertFalse(np.all(line.valid))
        self.assertTrue(np.all(line.z > 0))


class SpectrogramTestCase(unittest.TestCase):

    def test_peak_frequency(self):
        prf = 20e3
        series = np.exp(2j * np.pi * 2500 * np.arange(128) / prf)
        f, t, power = slowtime_spectrogram(series, prf, nperseg=32)
        self.assertTrue(np.all(np.diff(f) > 0))
        self.assertEqual(power.shape, (32, t.size))
        self.assertAlmostEqual(f[np.argmax(power[:, 0])], 2500.0)


if __name__ == '__main__':
    unittest.main()
