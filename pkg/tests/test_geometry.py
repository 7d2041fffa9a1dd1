import os
import sys
sys.path.insert(0, os.path.abspath('../'))

import unittest

import numpy as np

from nlhrflow.data_validation import ConfigError
from nlhrflow.geometry import (
    AcquisitionConfig,
    ImagingGrid,
    PixelSet,
    TransducerArray,
    build_array,
    config_errors,
    validate_config,
)


class TransducerArrayTestCase(unittest.TestCase):

    def setUp(self):
        self.array = build_array(64, 0.3e-3)

    def test_layout(self):
        ##centered on x = 0 with the requested pitch
        x = self.array.element_x
        self.assertEqual(self.array.num_elements, 64)
        self.assertAlmostEqual(x.mean(), 0.0)
        np.testing.assert_allclose(np.diff(x), 0.3e-3)
        self.assertAlmostEqual(self.array.aperture, 63 * 0.3e-3)
        self.assertEqual(self.array.element_z, 0.0)

    def test_nearest_element(self):
        x = self.array.element_x
        self.assertEqual(self.array.nearest_element(x[10] + 0.1e-3), 10)
        self.assertEqual(self.array.nearest_element(x[0]), 0)
        ##positions beyond the aperture fall outside the index range
        self.assertLess(self.array.nearest_element(x[0] - 1e-3), 0)
        self.assertGreaterEqual(self.array.nearest_element(x[-1] + 1e-3), 64)

    def test_invalid(self):
        with self.assertRaises(ConfigError):
            build_array(1, 0.3e-3)
        with self.assertRaises(ConfigError):
            build_array(64, 0)
        ##ConfigError stays a ValueError
        with self.assertRaises(ValueError):
            build_array(64.5, 0.3e-3)

    def test_direct_construction(self):
        single = TransducerArray(1, 0.3e-3)
        np.testing.assert_array_equal(single.element_x, [0.0])
        custom = TransducerArray(3, 0.3e-3, element_x=[-1e-3, 0.0, 2e-3])
        self.assertAlmostEqual(custom.aperture, 3e-3)
        ##positions are read-only
        with self.assertRaises(ValueError):
            custom.element_x[0] = 0.5
        for args, kwargs in (((0, 0.3e-3), {}), ((2, -0.3e-3), {}),
                             ((2, 0.3e-3), {"element_x": [0.0]}),
                             ((2, 0.3e-3), {"element_x": [1e-3, 0.0]}),
                             ((2, 0.3e-3), {"element_z": 1e-3})):
            with self.assertRaises(ConfigError):
                TransducerArray(*args, **kwargs)


class AcquisitionConfigTestCase(unittest.TestCase):

    def test_valid(self):
        cfg = validate_config(AcquisitionConfig(8e6, 100e6, 10e3, 1540.0))
        self.assertAlmostEqual(cfg.wavelength, 0.1925e-3)
        self.assertEqual(cfg.alpha_set, (6.0, 9.0, 12.0, 15.0))
        np.testing.assert_allclose(np.degrees(cfg.alpha_radians), cfg.alpha_set)
        self.assertEqual(config_errors(cfg), [])

    def test_every_violation_is_reported(self):
        cfg = AcquisitionConfig(8e6, 20e6, -1.0, 1540.0, num_frames=1, alpha_set=(0.0, 50.0))
        errors = config_errors(cfg)
        self.assertEqual(len(errors), 5)
        with self.assertRaises(ConfigError) as context:
            validate_config(cfg)
        self.assertEqual(context.exception.errors, errors)
        self.assertEqual(context.exception.field, "acquisition")

    def test_sampling_rule(self):
        ##f_s must be at least 4 f0
        self.assertEqual(config_errors(AcquisitionConfig(8e6, 32e6, 10e3)), [])
        self.assertEqual(len(config_errors(AcquisitionConfig(8e6, 31e6, 10e3))), 1)

    def test_empty_alpha_set(self):
        errors = config_errors(AcquisitionConfig(8e6, 50e6, 10e3, alpha_set=()))
        self.assertEqual(len(errors), 1)
        self.assertIn("alpha_set", errors[0])


class ImagingGridTestCase(unittest.TestCase):

    def setUp(self):
        self.grid = ImagingGrid.from_extent(-1e-3, 1e-3, 10e-3, 20e-3, 0.5e-3, 1e-3)

    def test_shape(self):
        self.assertEqual(self.grid.shape, (5, 11))
        self.assertEqual(self.grid.num_pixels, 55)
        self.assertAlmostEqual(self.grid.dx, 0.5e-3)
        self.assertAlmostEqual(self.grid.dz, 1e-3)
        np.testing.assert_allclose(self.grid.extent, (-1e-3, 1e-3, 10e-3, 20e-3))

    def test_depth_major_order(self):
        x, z = self.grid.pixels()
        self.assertEqual(x.size, 55)
        ##the first column is contiguous
        np.testing.assert_allclose(x[:11], -1e-3)
        np.testing.assert_allclose(z[:11], self.grid.z_coords)
        p = self.grid.pixel_index(1, 3)
        self.assertEqual(p, 14)
        self.assertAlmostEqual(x[p], -0.5e-3)
        self.assertAlmostEqual(z[p], 13e-3)

    def test_single_column(self):
        grid = ImagingGrid.from_extent(0.0, 0.0, 10e-3, 11e-3, 1e-4, 1e-4)
        self.assertEqual(grid.shape, (1, 11))
        self.assertIsNone(grid.dx)

    def test_invalid(self):
        with self.assertRaises(ConfigError):
            ImagingGrid(np.array([0.0]), np.array([-1e-3, 1e-3]))
        with self.assertRaises(ConfigError):
            ImagingGrid(np.array([1.0, 0.0]), np.array([1e-3, 2e-3]))
        with self.assertRaises(ConfigError):
            ImagingGrid.from_extent(0.0, 1e-3, 10e-3, 11e-3, 0.0, 1e-4)


class PixelSetTestCase(unittest.TestCase):

    def test_pixels(self):
        pixels = PixelSet([0.0, 1e-3], [10e-3, 11e-3])
        x, z = pixels.pixels()
        self.assertEqual(pixels.num_pixels, 2)
        self.assertTrue(np.all(pixels.valid))
        np.testing.assert_allclose(z, [10e-3, 11e-3])

    def test_mismatch(self):
        with self.assertRaises(ConfigError):
            PixelSet([0.0, 1e-3], [10e-3])


if __name__ == '__main__':
    unittest.main()
