import os
import sys
sys.path.insert(0, os.path.abspath('../'))

import unittest

import numpy as np

from nlhrflow.beamforming import SlowTimeEnsemble
from nlhrflow.clutter import (
    CasoratiMatrix,
    auto_clutter_rank,
    filter_ensemble,
    sv_report,
    svd_filter,
)
from nlhrflow.data_validation import ConfigError


def _clutter_and_flow(num_pixels=200, num_frames=64, clutter_db=40.0, noise=0.0, seed=0):
    """Static rank-one clutter plus flow rotating at a quarter of the frame
    rate (a whole number of turns, so both are orthogonal in time)."""
    rng = np.random.default_rng(seed)
    n = np.arange(num_frames)
    u = (rng.standard_normal(num_pixels) + 1j * rng.standard_normal(num_pixels)) / np.sqrt(2)
    clutter = 10 ** (clutter_db / 20) * u[:, None] * np.ones(num_frames)[None, :]
    phase = rng.uniform(0, 2 * np.pi, num_pixels)
    flow = np.exp(1j * (2 * np.pi * 0.25 * n[None, :] + phase[:, None]))
    values = clutter + flow
    if noise:
        values = values + noise * (rng.standard_normal(values.shape)
                                   + 1j * rng.standard_normal(values.shape)) / np.sqrt(2)
    return values, clutter, flow


def _power(values):
    return float(np.sum(np.abs(values) ** 2))


class SvdFilterTestCase(unittest.TestCase):

    def setUp(self):
        self.values, self.clutter, self.flow = _clutter_and_flow()
        self.m = CasoratiMatrix(self.values, np.ones(200, bool), ("das", 6.0, "left"))

    def test_clutter_rejection(self):
        filtered = svd_filter(self.m, 1).values
        ##clutter is what stays constant over the frames
        before = _power(self.values.mean(axis=1)) / _power(self.flow)
        after = _power(filtered.mean(axis=1)) / _power(self.flow)
        reduction_db = 10 * np.log10(before / max(after, 1e-300))
        flow_loss_db = 10 * np.log10(_power(filtered) / _power(self.flow))
        self.assertGreaterEqual(reduction_db, 20.0)
        self.assertGreater(flow_loss_db, -1.0)
        self.assertLess(flow_loss_db, 1.0)

    def test_idempotent(self):
        once = svd_filter(self.m, 1)
        twice = svd_filter(once, 1)
        self.assertEqual(once.clutter_rank, 1)
        np.testing.assert_array_equal(once.values, twice.values)

    def test_rank_zero_is_identity(self):
        np.testing.assert_array_equal(svd_filter(self.m, 0).values, self.values)

    def test_energy_decomposition(self):
        report = sv_report(self.m)
        for k in (1, 2, 5):
            filtered = svd_filter(self.m, k).values
            removed = float(np.sum(report.singular_values[:k] ** 2))
            self.assertAlmostEqual((_power(filtered) + removed) / _power(self.values), 1.0,
                                   delta=1e-6)

    def test_global_phase_rotation(self):
        rotation = np.exp(0.7j)
        rotated = CasoratiMatrix(rotation * self.values, np.ones(200, bool))
        scale = np.max(np.abs(self.values))
        np.testing.assert_allclose(svd_filter(rotated, 1).values,
                                   rotation * svd_filter(self.m, 1).values,
                                   atol=1e-9 * scale)

    def test_rank_bound(self):
        with self.assertRaises(ConfigError) as context:
            svd_filter(self.m, 64)
        self.assertEqual(context.exception.field, "k_remove")

    def test_masked_rows(self):
        values = self.values.copy()
        values[5] = np.nan
        mask = np.all(np.isfinite(values), axis=1)
        filtered = svd_filter(CasoratiMatrix(values, mask), 1).values
        self.assertTrue(np.all(np.isnan(filtered[5])))
        self.assertTrue(np.all(np.isfinite(filtered[mask])))


class SvReportTestCase(unittest.TestCase):

    def test_spectrum(self):
        values, _, _ = _clutter_and_flow()
        report = sv_report(CasoratiMatrix(values, np.ones(200, bool), ("das", 6.0, "left")),
                           prf=1000.0)
        self.assertEqual(report.singular_values_db[0], 0.0)
        self.assertAlmostEqual(report.singular_values_db[1], -40.0, delta=1.0)
        self.assertAlmostEqual(report.frequencies[0], 0.0, delta=0.5)
        self.assertAlmostEqual(report.frequencies[1], 250.0, delta=0.5)
        rows = report.to_rows()
        self.assertEqual(rows[0][0], 0)
        self.assertEqual(len(rows), 64)
        self.assertEqual(report.source, ("das", 6.0, "left"))

    def test_single_exponential(self):
        n = np.arange(64)
        rng = np.random.default_rng(7)
        amplitudes = rng.standard_normal(50) + 1j * rng.standard_normal(50)
        values = amplitudes[:, None] * np.exp(2j * np.pi * 120.0 * n / 1000.0)[None, :]
        report = sv_report(CasoratiMatrix(values, np.ones(50, bool)), prf=1000.0)
        self.assertAlmostEqual(report.frequencies[0] / 120.0, 1.0, delta=0.01)
        self.assertLess(report.singular_values[1] / report.singular_values[0], 1e-10)

    def test_zero_matrix(self):
        report = sv_report(CasoratiMatrix(np.zeros((20, 16), complex), np.ones(20, bool)))
        np.testing.assert_array_equal(report.singular_values, 0.0)
        self.assertTrue(np.all(np.isnan(report.frequencies)))

    def test_two_orthogonal_components(self):
        ##whole numbers of turns over 64 frames at 1 kHz
        n = np.arange(64)
        pixels, _ = np.linalg.qr(np.random.default_rng(8).standard_normal((40, 2)))
        values = (2.0 * pixels[:, :1] * np.exp(2j * np.pi * 125.0 * n / 1000.0)
                  + pixels[:, 1:] * np.exp(-2j * np.pi * 250.0 * n / 1000.0))
        report = sv_report(CasoratiMatrix(values, np.ones(40, bool)), prf=1000.0)
        self.assertAlmostEqual(report.singular_values_db[1], 20 * np.log10(0.5), delta=1e-6)
        self.assertAlmostEqual(report.frequencies[0], 125.0, delta=0.5)
        self.assertAlmostEqual(report.frequencies[1], -250.0, delta=0.5)

    def test_auto_rank(self):
        values, _, _ = _clutter_and_flow(noise=0.3)
        report = sv_report(CasoratiMatrix(values, np.ones(200, bool)), prf=1000.0)
        self.assertEqual(auto_clutter_rank(report, max_rank=10), 1)


class FilterEnsembleTestCase(unittest.TestCase):

    def setUp(self):
        left = np.stack([_clutter_and_flow(seed=s)[0] for s in (1, 2)])
        right = np.stack([_clutter_and_flow(seed=s)[0] for s in (3, 4)])
        self.slowtime = SlowTimeEnsemble(left, right, (6.0, 9.0), "nlhr", 16e6, 1000.0, None)

    def test_every_cube_is_filtered(self):
        filtered, reports = filter_ensemble(self.slowtime, 1)
        self.assertEqual(filtered.left.shape, self.slowtime.left.shape)
        self.assertEqual(len(reports), 4)
        self.assertEqual([r.source for r in reports],
                         [("nlhr", 6.0, "left"), ("nlhr", 6.0, "right"),
                          ("nlhr", 9.0, "left"), ("nlhr", 9.0, "right")])
        ##the static part is gone and the flow survives in every cube
        for cube in (filtered.left, filtered.right):
            self.assertLess(np.max(np.abs(cube.mean(axis=-1))), 1e-2)
            flow_loss_db = 10 * np.log10(_power(cube[0]) / (200 * 64))
            self.assertGreater(flow_loss_db, -1.0)

    def test_threads_do_not_change_output(self):
        one, _ = filter_ensemble(self.slowtime, 1)
        two, _ = filter_ensemble(self.slowtime, 1, threads=2)
        np.testing.assert_array_equal(one.left, two.left)
        np.testing.assert_array_equal(one.right, two.right)

    def test_auto(self):
        noisy = np.stack([_clutter_and_flow(noise=0.3, seed=s)[0] for s in (5, 6)])
        slowtime = SlowTimeEnsemble(noisy, noisy.copy(), (6.0, 9.0), "das", 8e6, 1000.0, None)
        filtered, reports = filter_ensemble(slowtime, 0, auto=True, max_rank=10)
        self.assertEqual(len(reports), 4)
        ##one component removed: flow and noise remain
        expected = 200 * 64 * (1 + 0.3 ** 2)
        for a in range(2):
            self.assertAlmostEqual(_power(filtered.left[a]) / expected, 1.0, delta=0.2)


if __name__ == '__main__':
    unittest.main()
