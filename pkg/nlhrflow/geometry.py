"""Transducer geometry, imaging grids and acquisition parameters.

Every other module consumes these objects. They are immutable once
constructed and can be shared freely between worker threads.

Coordinates are ``(x, z)`` in meters: x is lateral (along the array) and
z is depth, increasing away from the array, which lies on z = 0.

Example
--------
>>> array = build_array(64, 0.3e-3)
>>> cfg = validate_config(AcquisitionConfig(8e6, 50e6, 10e3, 1540.0))
>>> grid = ImagingGrid.from_extent(-1e-3, 1e-3, 10e-3, 20e-3,
...                                cfg.wavelength / 2, cfg.wavelength / 12)
"""

# Standard Library Imports
from math import radians

# Third Party Imports
import numpy as np

# Local Application Imports
from nlhrflow.data_validation import (
    ConfigError,
    assert_integer,
    assert_strictly_positive_number,
    assert_strictly_increasing,
)


class TransducerArray:
    """
    A class to represent a linear array lying on z = 0.

    Attributes
    ----------
    num_elements: int
        Number of receive channels (N_c).
    pitch: float
        Element spacing (m).
    element_x: numpy.ndarray
        Lateral element positions (m), strictly increasing, read-only.
    element_z: float
        Element depth, always 0 m.

    Examples
    --------
    >>> # A single channel at x = 0
    >>> TransducerArray(1, 0.3e-3)
    >>> # Custom element positions
    >>> TransducerArray(3, 0.3e-3, element_x=[-0.3e-3, 0.0, 0.3e-3])
    """

    def __init__(self, num_elements, pitch, element_x=None, element_z=0.0):
        """
        Parameters
        ----------
        num_elements: int
            Number of elements, at least 1.
        pitch: float
            Element spacing (m), > 0.
        element_x: array_like, optional
            Element positions (m). By default the array is centered on x = 0.
        element_z: float
            Must be 0; the array lies on z = 0.
        """
        assert_integer(num_elements, "num_elements", minimum=1)
        assert_strictly_positive_number(pitch, "pitch")
        if element_z != 0:
            raise ConfigError(f"The array lies on z = 0, not z = {element_z}",
                              field="element_z")

        if element_x is None:
            element_x = (np.arange(num_elements) - (num_elements - 1) / 2) * pitch
        element_x = np.array(element_x, dtype=float, ndmin=1)
        if element_x.size != num_elements:
            raise ConfigError(
                f"{element_x.size} element positions were given for {num_elements} elements.",
                field="element_x")
        assert_strictly_increasing(element_x, "element_x")
        element_x.setflags(write=False)

        self.num_elements = int(num_elements)
        self.pitch = float(pitch)
        self.element_x = element_x
        self.element_z = 0.0

    @property
    def aperture(self):
        """Lateral span between the outermost element centers (m)."""
        return float(self.element_x[-1] - self.element_x[0])

    def nearest_element(self, x):
        """Index of the element laterally nearest each position in x.

        Positions beyond the aperture give indices outside
        ``[0, num_elements)``; callers decide whether that masks a pixel.
        """
        x = np.asarray(x, dtype=float)
        return np.rint((x - self.element_x[0]) / self.pitch).astype(int)

    def __repr__(self):
        return f"<TransducerArray, {self.num_elements} elements, pitch = {self.pitch} m>"


class AcquisitionConfig:
    """
    Plane-wave acquisition parameters.

    Frequencies are in Hz, the sound speed in m/s and the transmit-receive
    angles ``alpha_set`` in degrees. The constructor only stores the values
    so that every broken rule can be reported at once; pass the object
    through :func:`validate_config` before use.
    """

    def __init__(self, center_frequency, sampling_frequency, prf, sound_speed=1540.0,
                 num_frames=128, num_tx_cycles=5, f_number=4.0,
                 alpha_set=(6.0, 9.0, 12.0, 15.0)):
        self.center_frequency = center_frequency
        self.sampling_frequency = sampling_frequency
        self.prf = prf
        self.sound_speed = sound_speed
        self.num_frames = num_frames
        self.num_tx_cycles = num_tx_cycles
        self.f_number = f_number
        if isinstance(alpha_set, (list, tuple, np.ndarray)):
            alpha_set = tuple(alpha_set)
        self.alpha_set = alpha_set

    @property
    def wavelength(self):
        """lambda = c / f0 (m)."""
        return self.sound_speed / self.center_frequency

    @property
    def alpha_radians(self):
        return np.array([radians(a) for a in self.alpha_set])

    def __repr__(self):
        return (f"<AcquisitionConfig, f0 = {self.center_frequency} Hz, "
                f"prf = {self.prf} Hz, {self.num_frames} frames>")


class ImagingGrid:
    """
    A class to represent a dense rectangular pixel lattice.

    Pixels are numbered depth-major: the depth index runs fastest, so
    every image column is a contiguous run of ``len(z_coords)`` pixels.
    """

    def __init__(self, x_coords, z_coords):
        x = np.array(x_coords, dtype=float, ndmin=1)
        z = np.array(z_coords, dtype=float, ndmin=1)
        if z.size == 0 or x.size == 0:
            raise ConfigError("The imaging grid holds no pixels.", field="grid")
        if np.any(z <= 0):
            raise ConfigError(
                f"All grid depths should be > 0, the shallowest is {z.min()}",
                field="grid.z_min")
        assert_strictly_increasing(x, "grid.x_coords")
        assert_strictly_increasing(z, "grid.z_coords")
        self.x_coords = x
        self.z_coords = z

    @classmethod
    def from_extent(cls, x_min, x_max, z_min, z_max, dx, dz):
        """Build a grid covering ``[x_min, x_max] x [z_min, z_max]`` with the
        given spacings. The first coordinate sits on the lower bound; the
        last one never goes past the upper bound."""
        assert_strictly_positive_number(dx, "dx")
        assert_strictly_positive_number(dz, "dz")
        n_x = int(np.floor((x_max - x_min) / dx + 1e-9)) + 1
        n_z = int(np.floor((z_max - z_min) / dz + 1e-9)) + 1
        return cls(x_min + dx * np.arange(n_x), z_min + dz * np.arange(n_z))

    @property
    def shape(self):
        """(n_x, n_z)"""
        return (self.x_coords.size, self.z_coords.size)

    @property
    def num_pixels(self):
        return self.x_coords.size * self.z_coords.size

    @property
    def dx(self):
        return float(self.x_coords[1] - self.x_coords[0]) if self.x_coords.size > 1 else None

    @property
    def dz(self):
        return float(self.z_coords[1] - self.z_coords[0]) if self.z_coords.size > 1 else None

    @property
    def extent(self):
        """(x_min, x_max, z_min, z_max)"""
        return (float(self.x_coords[0]), float(self.x_coords[-1]),
                float(self.z_coords[0]), float(self.z_coords[-1]))

    def pixels(self):
        """Flattened pixel coordinates ``(x, z)``, depth fastest."""
        xx, zz = np.meshgrid(self.x_coords, self.z_coords, indexing="ij")
        return xx.ravel(), zz.ravel()

    def pixel_index(self, ix, iz):
        return ix * self.z_coords.size + iz

    def __repr__(self):
        return f"<ImagingGrid, {self.shape[0]} x {self.shape[1]} pixels>"


class PixelSet:
    """
    Arbitrary list of sample points, e.g. a rotated line.

    ``valid`` flags points that may be used; masked points are beamformed
    like any other but callers discard them.
    """

    def __init__(self, x, z, valid=None):
        x = np.array(x, dtype=float, ndmin=1)
        z = np.array(z, dtype=float, ndmin=1)
        if x.shape != z.shape:
            raise ConfigError("x and z of a pixel set must have equal length.",
                              field="pixels")
        self.x = x
        self.z = z
        self.valid = np.ones(x.shape, bool) if valid is None else np.asarray(valid, bool)

    @property
    def num_pixels(self):
        return self.x.size

    def pixels(self):
        return self.x, self.z

    def __repr__(self):
        return f"<PixelSet, {self.num_pixels} points>"


def build_array(num_elements, pitch):
    """Centered uniform linear array.

    Parameters
    ----------
    num_elements: int
        Number of elements, at least 2.
    pitch: float
        Element spacing (m), > 0.

    Returns
    -------
    TransducerArray

    Examples
    --------
    >>> build_array(3, 0.3e-3).element_x
    array([-0.0003,  0.    ,  0.0003])
    """
    assert_integer(num_elements, "num_elements", minimum=2)
    return TransducerArray(num_elements, pitch)


def config_errors(cfg):
    """Return every rule the acquisition config breaks, one string each,
    each naming its field. An empty list means the config is valid."""
    errors = []

    def positive(name, integer=False):
        value = getattr(cfg, name)
        if integer:
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
                errors.append(f"'{name}' should be an integer, not {value!r}")
                return False
        elif not isinstance(value, (int, float, np.integer, np.floating)) or isinstance(value, bool):
            errors.append(f"'{name}' should be a number, not {value!r}")
            return False
        if not value > 0:
            errors.append(f"'{name}' should be > 0, not {value}")
            return False
        return True

    ok_f0 = positive("center_frequency")
    ok_fs = positive("sampling_frequency")
    positive("prf")
    positive("sound_speed")
    positive("f_number")
    if positive("num_frames", integer=True) and cfg.num_frames < 2:
        errors.append(f"'num_frames' should be >= 2, not {cfg.num_frames}")
    positive("num_tx_cycles", integer=True)

    if ok_f0 and ok_fs and cfg.sampling_frequency < 4 * cfg.center_frequency:
        errors.append(
            f"'sampling_frequency' should be >= 4 x center_frequency"
            f" ({4 * cfg.center_frequency} Hz), not {cfg.sampling_frequency}")

    alphas = list(cfg.alpha_set) if cfg.alpha_set is not None else []
    if len(alphas) == 0:
        errors.append("'alpha_set' should hold at least one angle")
    for a in alphas:
        if not 0 < a < 45:
            errors.append(f"'alpha_set' angles should lie in (0, 45) degrees, not {a}")

    return errors


def validate_config(cfg):
    """Return ``cfg`` when it satisfies every acquisition rule.

    Raises
    ------
    ConfigError
        Carrying the complete list of violations in ``errors``.

    Examples
    --------
    >>> cfg = validate_config(AcquisitionConfig(8e6, 100e6, 10e3, 1540.0))
    >>> round(cfg.wavelength * 1e3, 4)
    0.1925
    """
    errors = config_errors(cfg)
    if errors:
        raise ConfigError(
            "Invalid acquisition config: " + "; ".join(errors),
            field="acquisition", errors=errors)
    return cfg
