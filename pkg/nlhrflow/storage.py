"""Reading and writing of pipeline artefacts.

Arrays are stored as a flat little-endian float32 ``.bin`` file in C order
next to a ``.json`` sidecar holding the dimensions and any metadata. JSON
is written with sorted keys so that a run repeated with the same seed
gives byte-identical files.
"""

# Standard Library Imports
import csv
import hashlib
import json
import os

# Third Party Imports
import numpy as np

# Local Application Imports
from nlhrflow.beamforming import SubApertureEnsemble
from nlhrflow.data_validation import ConfigError
from nlhrflow.phantom import RFFrameSet
from nlhrflow.velocity import VelocityField

CUBE_DTYPE = "<f4"
FLOAT_FORMAT = "{:.9g}"


def _plain(value):
    """numpy scalars and arrays to JSON-friendly Python values."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if np.isfinite(value) else None
    return value


def write_json(path, document):
    with open(path, "w") as f:
        json.dump(_plain(document), f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def read_json(path):
    with open(path) as f:
        return json.load(f)


def write_cube(path_stem, array, dims=None, **meta):
    """Write an array as ``<stem>.bin`` plus a ``<stem>.json`` sidecar.

    Parameters
    ----------
    path_stem: str
        Path without extension.
    array: array_like
        Real array of any shape; stored as float32, NaN kept.
    dims: list of str, optional
        Names of the array axes, stored in the sidecar.
    **meta:
        Extra sidecar entries.

    Returns
    -------
    list of str
        The two written paths.
    """
    array = np.asarray(array)
    if np.iscomplexobj(array):
        raise ConfigError(f"'{path_stem}' is complex; cubes hold real data.", field="array")
    data = np.ascontiguousarray(array, dtype=CUBE_DTYPE)
    bin_path = path_stem + ".bin"
    data.tofile(bin_path)

    sidecar = dict(meta)
    sidecar["shape"] = list(data.shape)
    sidecar["dtype"] = CUBE_DTYPE
    sidecar["dims"] = list(dims) if dims is not None else [f"axis{i}" for i in range(data.ndim)]
    json_path = write_json(path_stem + ".json", sidecar)
    return [bin_path, json_path]


def read_cube(path_stem):
    """Inverse of :func:`write_cube`: returns ``(array, meta)``."""
    meta = read_json(path_stem + ".json")
    data = np.fromfile(path_stem + ".bin", dtype=meta.get("dtype", CUBE_DTYPE))
    shape = tuple(meta["shape"])
    if data.size != int(np.prod(shape)):
        raise ConfigError(
            f"'{path_stem}.bin' holds {data.size} values, the sidecar expects {shape}.",
            field="input")
    return data.reshape(shape).astype(float), meta


# SECTION - PIPELINE OBJECTS

def save_rf(path_stem, rf):
    return write_cube(
        path_stem, rf.samples, dims=["channel", "sample", "frame"],
        sampling_frequency=rf.sampling_frequency, start_time=rf.start_time,
        prf_effective=rf.prf_effective, center_frequency=rf.center_frequency,
        sound_speed=rf.sound_speed, prf=rf.prf, seed=rf.seed)


def load_rf(path_stem):
    samples, meta = read_cube(path_stem)
    return RFFrameSet(samples, meta["sampling_frequency"], meta["start_time"],
                      meta["prf_effective"], meta["center_frequency"], meta["sound_speed"],
                      meta["prf"], meta["seed"])


def save_ensemble(directory, ensemble):
    """Write the left and right sub-aperture cubes of an ensemble as
    ``left`` and ``right`` in ``directory``."""
    meta = dict(alpha_set=list(ensemble.alpha_set), beamformer_tag=ensemble.beamformer_tag,
                center_frequency_out=ensemble.center_frequency_out,
                prf_effective=ensemble.prf_effective, mas_mode=ensemble.mas_mode,
                pixel_shape=list(ensemble.pixel_shape) if ensemble.pixel_shape else None)
    dims = ["alpha", "pixel", "frame"]
    paths = write_cube(os.path.join(directory, "left"), ensemble.left, dims=dims, side="left",
                       **meta)
    paths += write_cube(os.path.join(directory, "right"), ensemble.right, dims=dims,
                        side="right", **meta)
    return paths


def load_ensemble(directory):
    left, meta = read_cube(os.path.join(directory, "left"))
    right, _ = read_cube(os.path.join(directory, "right"))
    pixel_shape = tuple(meta["pixel_shape"]) if meta.get("pixel_shape") else None
    return SubApertureEnsemble(left, right, tuple(meta["alpha_set"]), meta["beamformer_tag"],
                               meta["center_frequency_out"], meta["prf_effective"],
                               pixel_shape, meta.get("mas_mode", "product"))


def save_velocity_field(path_stem, field):
    """Store a velocity field as one (4, pixels, windows) cube holding
    magnitude, angle, vx and vz, with the pixel coordinates in a second
    ``<stem>_pixels`` cube."""
    values = np.stack([field.magnitude, field.angle, field.vx, field.vz])
    paths = write_cube(path_stem, values, dims=["component", "pixel", "window"],
                       components=["magnitude", "angle", "vx", "vz"],
                       window_times=field.window_times, estimator=field.estimator,
                       pixel_shape=list(field.pixel_shape) if field.pixel_shape else None,
                       meta=field.meta)
    if field.x is not None:
        paths += write_cube(path_stem + "_pixels", np.stack([field.x, field.z]),
                            dims=["coordinate", "pixel"])
    return paths


def load_velocity_field(path_stem):
    values, meta = read_cube(path_stem)
    magnitude, angle, vx, vz = values
    x = z = None
    if os.path.exists(path_stem + "_pixels.bin"):
        (x, z), _ = read_cube(path_stem + "_pixels")
    pixel_shape = tuple(meta["pixel_shape"]) if meta.get("pixel_shape") else None
    return VelocityField(magnitude, angle, np.isfinite(magnitude), vx, vz,
                         np.asarray(meta["window_times"], dtype=float), x, z, pixel_shape,
                         meta["estimator"], meta.get("meta") or {})


# SECTION - TABLES, IMAGES AND MANIFESTS

def _cell(value):
    if isinstance(value, (float, np.floating)):
        return FLOAT_FORMAT.format(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return value


def write_csv(path, header, rows):
    """Write rows with floats in a fixed format."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
    return path


def read_csv(path):
    """Header and rows of a CSV file, every cell as a string."""
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    return rows[0], rows[1:]


def write_pgm(path, image, vmin, vmax):
    """8-bit binary PGM (P5) of a 2-D image.

    ``image`` is indexed (rows, columns); values are mapped linearly from
    [vmin, vmax] to [0, 255] and clipped; NaN becomes 0.
    """
    image = np.asarray(image, dtype=float)
    if image.ndim != 2:
        raise ConfigError(f"A PGM image should be 2-D, not {image.ndim}-D.", field="image")
    if not vmax > vmin:
        raise ConfigError(f"'vmax' should be > vmin, not {vmax} <= {vmin}", field="vmax")
    scaled = np.clip((image - vmin) / (vmax - vmin) * 255.0, 0, 255)
    pixels = np.where(np.isfinite(scaled), np.rint(scaled), 0).astype(np.uint8)
    rows, cols = pixels.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{cols} {rows}\n255\n".encode("ascii"))
        f.write(pixels.tobytes())
    return path


def sha256_file(path, chunk_size=1 << 20):
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(chunk_size), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(out_dir, files):
    """Write ``manifest.json`` listing each file by its path relative to
    ``out_dir`` with its SHA-256, and return the manifest."""
    entries = {}
    for path in files:
        rel = os.path.relpath(path, out_dir).replace(os.sep, "/")
        entries[rel] = sha256_file(path)
    manifest = {"files": entries}
    write_json(os.path.join(out_dir, "manifest.json"), manifest)
    return manifest
