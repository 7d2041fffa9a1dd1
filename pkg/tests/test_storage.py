import os
import sys
sys.path.insert(0, os.path.abspath('../'))

import hashlib
import json
import shutil
import tempfile
import unittest

import numpy as np

from nlhrflow.beamforming import SubApertureEnsemble
from nlhrflow.data_validation import ConfigError
from nlhrflow.phantom import RFFrameSet
from nlhrflow.storage import (
    load_ensemble,
    load_rf,
    load_velocity_field,
    read_csv,
    read_cube,
    save_ensemble,
    save_rf,
    save_velocity_field,
    sha256_file,
    write_csv,
    write_cube,
    write_json,
    write_manifest,
    write_pgm,
)
from nlhrflow.velocity import VelocityField


class StorageTestCase(unittest.TestCase):

    def setUp(self):
        self.dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.dir)

    def path(self, name):
        return os.path.join(self.dir, name)

    def test_cube(self):
        data = np.arange(24, dtype=float).reshape(2, 3, 4)
        data[1, 2, 3] = np.nan
        paths = write_cube(self.path("cube"), data, dims=["a", "b", "c"], seed=3)
        self.assertEqual(paths, [self.path("cube.bin"), self.path("cube.json")])
        self.assertEqual(os.path.getsize(self.path("cube.bin")), 24 * 4)

        values, meta = read_cube(self.path("cube"))
        np.testing.assert_array_equal(values, data)
        self.assertEqual(meta["shape"], [2, 3, 4])
        self.assertEqual(meta["dims"], ["a", "b", "c"])
        self.assertEqual(meta["dtype"], "<f4")
        self.assertEqual(meta["seed"], 3)

        ##sidecar keys are sorted
        with open(self.path("cube.json")) as f:
            keys = list(json.load(f))
        self.assertEqual(keys, sorted(keys))

    def test_cube_bytes_are_reproducible(self):
        data = np.random.default_rng(0).standard_normal((5, 7))
        write_cube(self.path("a"), data, note=0.1)
        write_cube(self.path("b"), data, note=0.1)
        self.assertEqual(sha256_file(self.path("a.bin")), sha256_file(self.path("b.bin")))
        self.assertEqual(sha256_file(self.path("a.json")), sha256_file(self.path("b.json")))

    def test_complex_cube(self):
        with self.assertRaises(ConfigError):
            write_cube(self.path("c"), np.ones(3, dtype=complex))

    def test_truncated_cube(self):
        write_cube(self.path("t"), np.ones((4, 4)))
        with open(self.path("t.bin"), "r+b") as f:
            f.truncate(12)
        with self.assertRaises(ConfigError):
            read_cube(self.path("t"))

    def test_json_nan(self):
        write_json(self.path("doc.json"), {"b": np.float64(np.nan), "a": np.arange(2)})
        with open(self.path("doc.json")) as f:
            self.assertEqual(json.load(f), {"a": [0, 1], "b": None})

    def test_rf(self):
        rf = RFFrameSet(np.ones((2, 5, 3)), 50e6, 1e-6, 20e3, 8e6, 1540.0, 10e3, 7)
        save_rf(self.path("rf"), rf)
        loaded = load_rf(self.path("rf"))
        np.testing.assert_array_equal(loaded.samples, rf.samples)
        self.assertEqual(loaded.sampling_frequency, 50e6)
        self.assertEqual(loaded.prf_effective, 20e3)
        self.assertEqual(loaded.seed, 7)

    def test_ensemble(self):
        left = np.zeros((2, 6, 4))
        left[1, 2] = np.nan
        ensemble = SubApertureEnsemble(left, np.ones((2, 6, 4)), (6.0, 9.0), "nlhr", 16e6, 20e3,
                                       (2, 3), "signed_sqrt")
        save_ensemble(self.dir, ensemble)
        loaded = load_ensemble(self.dir)
        self.assertEqual(loaded.alpha_set, (6.0, 9.0))
        self.assertEqual(loaded.pixel_shape, (2, 3))
        self.assertEqual(loaded.mas_mode, "signed_sqrt")
        self.assertTrue(np.all(np.isnan(loaded.left[1, 2])))
        np.testing.assert_array_equal(loaded.right, 1.0)

    def test_velocity_field(self):
        magnitude = np.array([[0.1, np.nan], [0.2, 0.3]])
        field = VelocityField(magnitude, np.full((2, 2), 90.0), np.isfinite(magnitude),
                              magnitude, np.zeros((2, 2)), np.array([1e-3, 2e-3]),
                              np.array([0.0, 0.0]), np.array([10e-3, 11e-3]), (1, 2), "tac",
                              {"window_frames": 16})
        save_velocity_field(self.path("velocity"), field)
        loaded = load_velocity_field(self.path("velocity"))
        np.testing.assert_array_equal(loaded.valid, field.valid)
        np.testing.assert_allclose(loaded.magnitude, magnitude.astype(np.float32))
        np.testing.assert_allclose(loaded.z, [10e-3, 11e-3], rtol=1e-6)
        self.assertEqual(loaded.pixel_shape, (1, 2))
        self.assertEqual(loaded.meta["window_frames"], 16)

    def test_csv(self):
        write_csv(self.path("t.csv"), ("k", "value"), [(0, 1 / 3), (1, np.float32(2.5))])
        with open(self.path("t.csv")) as f:
            self.assertEqual(f.read(), "k,value\n0,0.333333333\n1,2.5\n")
        header, rows = read_csv(self.path("t.csv"))
        self.assertEqual(header, ["k", "value"])
        self.assertEqual(rows[1], ["1", "2.5"])

    def test_pgm(self):
        write_pgm(self.path("img.pgm"), [[0.0, 0.5], [1.0, np.nan], [2.0, -1.0]], 0.0, 1.0)
        with open(self.path("img.pgm"), "rb") as f:
            data = f.read()
        self.assertTrue(data.startswith(b"P5\n2 3\n255\n"))
        self.assertEqual(list(data[-6:]), [0, 128, 255, 0, 255, 0])
        with self.assertRaises(ConfigError):
            write_pgm(self.path("bad.pgm"), np.ones(4), 0.0, 1.0)
        with self.assertRaises(ConfigError):
            write_pgm(self.path("bad.pgm"), np.ones((2, 2)), 1.0, 1.0)

    def test_manifest(self):
        os.makedirs(self.path("sub"))
        a = write_json(self.path("a.json"), {"x": 1})
        b = write_json(self.path(os.path.join("sub", "b.json")), {"y": 2})
        manifest = write_manifest(self.dir, [a, b])
        with open(a, "rb") as f:
            expected = hashlib.sha256(f.read()).hexdigest()
        self.assertEqual(manifest["files"]["a.json"], expected)
        self.assertIn("sub/b.json", manifest["files"])
        with open(self.path("manifest.json")) as f:
            self.assertEqual(json.load(f), manifest)


if __name__ == '__main__':
    unittest.main()
