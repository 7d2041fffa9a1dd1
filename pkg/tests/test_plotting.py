import os
import sys
sys.path.insert(0, os.path.abspath('../'))

import unittest

import numpy as np
import plotly.graph_objects as go
from plotly.subplots import make_subplots

from nlhrflow.clutter import SvdReport
from nlhrflow.geometry import ImagingGrid
from nlhrflow.metrics import extract_profile
from nlhrflow.phantom import ParabolicVessel
from nlhrflow.plotting import (
    plot_profile,
    plot_spectrogram,
    plot_sv_frequencies,
    plot_sv_spectrum,
    plot_vector_field,
    plot_velocity_trace,
)
from nlhrflow.velocity import VelocityField, slowtime_spectrogram, velocity_polar


class PlottingTestCase(unittest.TestCase):

    def setUp(self):
        self.vessel = ParabolicVessel(15e-3, 2e-3, 0.5)
        self.grid = ImagingGrid.from_extent(-1e-3, 1e-3, 12.05e-3, 18e-3, 0.25e-3, 0.1e-3)
        x, z = self.grid.pixels()
        vx, vz = self.vessel.velocity_at(x, z)
        magnitude, angle = velocity_polar(vz, vx)
        self.field = VelocityField(magnitude[:, None], angle[:, None],
                                   np.ones((x.size, 1), bool), vx[:, None], vz[:, None],
                                   np.array([0.4e-3]), x, z, self.grid.shape, "tac")

    def test_profile(self):
        report = extract_profile(self.field, self.vessel, self.grid)
        fig = plot_profile(report)
        self.assertIsInstance(fig, go.Figure)
        self.assertEqual(len(fig.data), 4)
        self.assertEqual(fig.data[0].name, "truth")
        np.testing.assert_allclose(fig.data[3].y, report.measured_v)

        ##traces can go into an existing subplot
        grid = make_subplots(rows=1, cols=2)
        self.assertIs(plot_profile(report, grid, 1, 2), grid)
        self.assertEqual(len(grid.data), 4)

    def test_sv_spectrum(self):
        reports = [SvdReport(np.array([10.0, 1.0]), np.array([0.0, -20.0]),
                             np.array([0.0, 250.0]), ("das", 6.0, side))
                   for side in ("left", "right")]
        fig = plot_sv_spectrum(reports)
        self.assertEqual(len(fig.data), 2)
        self.assertEqual(fig.data[1].name, "das 6.0 right")
        self.assertEqual(len(plot_sv_frequencies(reports).data), 2)

    def test_velocity_trace(self):
        times = np.arange(5) * 1e-3
        fig = plot_velocity_trace(times, np.full(5, 0.5), angle=np.full(5, 90.0),
                                  truth=np.full(5, 0.5))
        self.assertEqual(len(fig.data), 3)
        np.testing.assert_allclose(fig.data[0].x, np.arange(5))
        self.assertEqual(len(plot_velocity_trace(times, np.ones(5)).data), 1)

    def test_vector_field(self):
        bmode = np.zeros(self.grid.shape)
        fig = plot_vector_field(self.field, self.grid, bmode)
        self.assertEqual(len(fig.data), 2)
        self.assertIsInstance(fig.data[0], go.Heatmap)

    def test_empty_vector_field(self):
        nan = np.full_like(self.field.vx, np.nan)
        empty = VelocityField(nan, nan, np.zeros(nan.shape, bool), nan, nan,
                              self.field.window_times, self.field.x, self.field.z,
                              self.grid.shape)
        self.assertEqual(len(plot_vector_field(empty, self.grid).data), 0)
        self.assertEqual(len(plot_vector_field(empty, self.grid, np.zeros(self.grid.shape)).data),
                         1)

    def test_spectrogram(self):
        series = np.exp(2j * np.pi * 2500 * np.arange(128) / 20e3)
        f, t, power = slowtime_spectrogram(series, 20e3, nperseg=32)
        fig = plot_spectrogram(f, t, power)
        self.assertEqual(np.max(fig.data[0].z), 0.0)
        self.assertGreaterEqual(np.min(fig.data[0].z), -40.0)


if __name__ == '__main__':
    unittest.main()
