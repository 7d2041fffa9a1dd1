"""Flow phantoms, moving point scatterers and plane-wave RF synthesis.

The simulator is a single-scattering, attenuation-free point model: every
scatterer returns a copy of the pulse delayed by the transmit (plane wave,
straight down) plus receive (spherical, back to each element) path.

Example
--------
>>> vessel = ParabolicVessel(center_depth=15e-3, radius=5e-3, peak_velocity=0.25)
>>> region = vessel.region(segment_length=6e-3)
>>> field = seed_scatterers(region, density=2, seed=0, wavelength=cfg.wavelength)
>>> frames = scatterer_trajectory(field, vessel, cfg)
>>> rf = simulate_rf(frames, array, cfg, z_max=20e-3)
"""

# Standard Library Imports
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from math import ceil, cos, degrees, radians, sin, atan2
import logging

# Third Party Imports
import numpy as np
from scipy.integrate import trapezoid
from scipy.signal import fftconvolve

# Local Application Imports
from nlhrflow.data_validation import (
    ConfigError,
    assert_contents,
    assert_number,
    assert_positive_number,
    assert_strictly_positive_number,
)

logger = logging.getLogger(__name__)

# half length (taps) and shape of the fractional-delay kernel
FRACTIONAL_DELAY_HALF_TAPS = 4
FRACTIONAL_DELAY_BETA = 6.0


# SECTION - REGIONS

class Region:
    """Area that scatterers are seeded in and wrapped back into."""

    area = 0.0

    def contains(self, x, z):
        raise NotImplementedError

    def sample(self, rng, n):
        raise NotImplementedError

    def wrap(self, x, z):
        """Map positions that left the region back inside it."""
        return x, z


class BoxRegion(Region):
    """Axis-aligned rectangle, periodic in both directions."""

    def __init__(self, x_min, x_max, z_min, z_max):
        if not (x_max > x_min and z_max > z_min):
            raise ConfigError("A box region needs x_max > x_min and z_max > z_min.",
                              field="region")
        self.x_min, self.x_max = float(x_min), float(x_max)
        self.z_min, self.z_max = float(z_min), float(z_max)
        self.area = (self.x_max - self.x_min) * (self.z_max - self.z_min)

    def contains(self, x, z):
        return ((x >= self.x_min) & (x <= self.x_max)
                & (z >= self.z_min) & (z <= self.z_max))

    def sample(self, rng, n):
        x = rng.uniform(self.x_min, self.x_max, n)
        z = rng.uniform(self.z_min, self.z_max, n)
        return x, z

    def wrap(self, x, z):
        x = self.x_min + np.mod(x - self.x_min, self.x_max - self.x_min)
        z = self.z_min + np.mod(z - self.z_min, self.z_max - self.z_min)
        return x, z


class VesselRegion(Region):
    """Straight lumen segment: a rectangle of the vessel's diameter and
    ``length`` along the vessel axis, periodic along the axis."""

    def __init__(self, center_x, center_depth, inclination, length, radius):
        assert_strictly_positive_number(length, "segment_length")
        assert_strictly_positive_number(radius, "radius")
        self.center = np.array([center_x, center_depth], dtype=float)
        phi = radians(inclination)
        self.axis = np.array([cos(phi), sin(phi)])
        self.normal = np.array([-sin(phi), cos(phi)])
        self.length = float(length)
        self.radius = float(radius)
        self.area = self.length * 2 * self.radius

    def local(self, x, z):
        """(along-axis, across-axis) coordinates relative to the center."""
        dx = np.asarray(x) - self.center[0]
        dz = np.asarray(z) - self.center[1]
        return dx * self.axis[0] + dz * self.axis[1], dx * self.normal[0] + dz * self.normal[1]

    def to_global(self, a, r):
        x = self.center[0] + a * self.axis[0] + r * self.normal[0]
        z = self.center[1] + a * self.axis[1] + r * self.normal[1]
        return x, z

    def contains(self, x, z):
        a, r = self.local(x, z)
        return (np.abs(a) <= self.length / 2) & (np.abs(r) <= self.radius)

    def sample(self, rng, n):
        a = rng.uniform(-self.length / 2, self.length / 2, n)
        r = rng.uniform(-self.radius, self.radius, n)
        return self.to_global(a, r)

    def wrap(self, x, z):
        # re-enter at the inflow end with the same offset across the lumen
        a, r = self.local(x, z)
        a = np.mod(a + self.length / 2, self.length) - self.length / 2
        return self.to_global(a, r)


class DiskRegion(Region):

    def __init__(self, center_x, center_depth, radius):
        assert_strictly_positive_number(radius, "radius")
        self.center = np.array([center_x, center_depth], dtype=float)
        self.radius = float(radius)
        self.area = np.pi * self.radius ** 2

    def contains(self, x, z):
        return (np.asarray(x) - self.center[0]) ** 2 + (np.asarray(z) - self.center[1]) ** 2 <= self.radius ** 2

    def sample(self, rng, n):
        r = self.radius * np.sqrt(rng.uniform(0, 1, n))
        phi = rng.uniform(0, 2 * np.pi, n)
        return self.center[0] + r * np.cos(phi), self.center[1] + r * np.sin(phi)


# SECTION - FLOW FIELDS

class FlowField:
    """Flow field class from which every phantom flow inherits.

    Subclasses implement ``velocity_at`` and ``region``; ``advance`` moves
    points with a forward step unless a subclass can do it exactly.
    """

    kind = "flow"

    def velocity_at(self, x, z, time=0.0):
        """Velocity ``(vx, vz)`` in m/s at the given points."""
        raise NotImplementedError

    def region(self, **kwargs):
        raise NotImplementedError

    def advance(self, x, z, dt, time=0.0):
        vx, vz = self.velocity_at(x, z, time)
        return x + vx * dt, z + vz * dt

    def to_dict(self):
        raise NotImplementedError


class ParabolicVessel(FlowField):
    """Straight vessel with a steady parabolic (Poiseuille) profile.

    Parameters
    ----------
    center_depth: float
        Depth of the vessel axis at ``center_x`` (m).
    radius: float
        Lumen radius R (m), > 0.
    peak_velocity: float
        Centerline speed V_P (m/s), >= 0.
    inclination: float
        Angle of the vessel axis from the lateral axis (degrees). Positive
        values take the axis deeper as x increases. Default 0 (transverse).
    center_x: float
        Lateral position of the vessel center (m). Default 0.

    Examples
    --------
    >>> vessel = ParabolicVessel(15e-3, 5e-3, 0.5)
    >>> flow_velocity_at(vessel, (0.0, 15e-3 + 2.5e-3))
    array([0.375, 0.   ])

    Notes
    -----
    Inside the lumen the speed is V_P (1 - r^2 / R^2), r being the distance
    from the axis; flow runs along +axis. Outside the lumen it is zero.
    """

    kind = "parabolic_vessel"

    def __init__(self, center_depth, radius, peak_velocity, inclination=0.0, center_x=0.0):
        assert_strictly_positive_number(center_depth, "center_depth")
        assert_strictly_positive_number(radius, "radius")
        assert_positive_number(peak_velocity, "peak_velocity")
        assert_number(inclination, "inclination")
        assert_number(center_x, "center_x")

        self.center_depth = float(center_depth)
        self.radius = float(radius)
        self.peak_velocity = float(peak_velocity)
        self.inclination = float(inclination)
        self.center_x = float(center_x)

        phi = radians(self.inclination)
        self.axis = np.array([cos(phi), sin(phi)])
        self.normal = np.array([-sin(phi), cos(phi)])

    def peak_velocity_at(self, time=0.0):
        return self.peak_velocity

    def radial_position(self, x, z):
        """Signed distance from the vessel axis (m), positive on the deep side
        for a transverse vessel."""
        return ((np.asarray(x) - self.center_x) * self.normal[0]
                + (np.asarray(z) - self.center_depth) * self.normal[1])

    def speed_at(self, x, z, time=0.0):
        r = self.radial_position(x, z)
        profile = np.where(np.abs(r) <= self.radius, 1 - (r / self.radius) ** 2, 0.0)
        return self.peak_velocity_at(time) * profile

    def velocity_at(self, x, z, time=0.0):
        speed = self.speed_at(x, z, time)
        return speed * self.axis[0], speed * self.axis[1]

    def flow_angle(self, time=0.0):
        """Flow direction in degrees from the depth axis, positive toward +x.

        A transverse vessel (inclination 0) flows at 90 degrees.
        """
        sign = 1.0 if self.peak_velocity_at(time) >= 0 else -1.0
        return degrees(atan2(sign * self.axis[0], sign * self.axis[1]))

    def region(self, segment_length):
        return VesselRegion(self.center_x, self.center_depth, self.inclination,
                            segment_length, self.radius)

    def to_dict(self):
        return {
            "type": self.kind,
            "center_x": self.center_x,
            "center_depth": self.center_depth,
            "radius": self.radius,
            "peak_velocity": self.peak_velocity,
            "inclination": self.inclination,
        }

    def __repr__(self):
        return (f"ParabolicVessel(center_depth={self.center_depth}, radius={self.radius}, "
                f"peak_velocity={self.peak_velocity}, inclination={self.inclination})")


class PulsatileVessel(ParabolicVessel):
    """Parabolic vessel whose centerline speed pulses in time.

    The peak velocity follows V_P (1 + pulsatility sin(2 pi t / period)).
    When ``reversal_time`` is set the flow direction flips from that time
    on, which emulates a sudden flow reversal.
    """

    kind = "pulsatile_vessel"

    def __init__(self, center_depth, radius, peak_velocity, inclination=0.0, center_x=0.0,
                 period=0.01, pulsatility=0.5, reversal_time=None):
        super().__init__(center_depth, radius, peak_velocity, inclination, center_x)
        assert_strictly_positive_number(period, "period")
        assert_positive_number(pulsatility, "pulsatility")
        if reversal_time is not None:
            assert_positive_number(reversal_time, "reversal_time")
        self.period = float(period)
        self.pulsatility = float(pulsatility)
        self.reversal_time = reversal_time

    def peak_velocity_at(self, time=0.0):
        v = self.peak_velocity * (1 + self.pulsatility * np.sin(2 * np.pi * time / self.period))
        if self.reversal_time is not None and time >= self.reversal_time:
            v = -v
        return float(v)

    def to_dict(self):
        doc = super().to_dict()
        doc.update(period=self.period, pulsatility=self.pulsatility,
                   reversal_time=self.reversal_time)
        return doc


class RotatingDisk(FlowField):
    """Solid-body rotation inside a disk (rotating-disk phantom).

    Velocity is omega (-(z - z_c), x - x_c) inside the disk, zero outside.
    """

    kind = "rotating_disk"

    def __init__(self, center_x, center_depth, radius, angular_velocity):
        assert_number(center_x, "center_x")
        assert_strictly_positive_number(center_depth, "center_depth")
        assert_strictly_positive_number(radius, "radius")
        assert_number(angular_velocity, "angular_velocity")
        self.center_x = float(center_x)
        self.center_depth = float(center_depth)
        self.radius = float(radius)
        self.angular_velocity = float(angular_velocity)

    def velocity_at(self, x, z, time=0.0):
        dx = np.asarray(x, dtype=float) - self.center_x
        dz = np.asarray(z, dtype=float) - self.center_depth
        inside = dx ** 2 + dz ** 2 <= self.radius ** 2
        w = np.where(inside, self.angular_velocity, 0.0)
        return -w * dz, w * dx

    def advance(self, x, z, dt, time=0.0):
        # exact rotation keeps scatterers on their circle
        dx = np.asarray(x, dtype=float) - self.center_x
        dz = np.asarray(z, dtype=float) - self.center_depth
        inside = dx ** 2 + dz ** 2 <= self.radius ** 2
        theta = np.where(inside, self.angular_velocity * dt, 0.0)
        c, s = np.cos(theta), np.sin(theta)
        return self.center_x + c * dx - s * dz, self.center_depth + s * dx + c * dz

    def region(self, **kwargs):
        return DiskRegion(self.center_x, self.center_depth, self.radius)

    def to_dict(self):
        return {
            "type": self.kind,
            "center_x": self.center_x,
            "center_depth": self.center_depth,
            "radius": self.radius,
            "angular_velocity": self.angular_velocity,
        }


class UniformFlow(FlowField):
    """Constant velocity everywhere.

    ``angle`` is the flow direction in degrees from the depth axis,
    positive toward +x, so 90 is purely lateral.
    """

    kind = "uniform_flow"

    def __init__(self, speed, angle=90.0):
        assert_number(speed, "speed")
        assert_number(angle, "angle")
        self.speed = float(speed)
        self.angle = float(angle)

    @property
    def velocity(self):
        a = radians(self.angle)
        return self.speed * sin(a), self.speed * cos(a)

    def velocity_at(self, x, z, time=0.0):
        vx, vz = self.velocity
        shape = np.shape(x)
        return np.full(shape, vx), np.full(shape, vz)

    def region(self, x_min, x_max, z_min, z_max):
        return BoxRegion(x_min, x_max, z_min, z_max)

    def to_dict(self):
        return {"type": self.kind, "speed": self.speed, "angle": self.angle}


FLOW_TYPES = {
    cls.kind: cls for cls in (ParabolicVessel, PulsatileVessel, RotatingDisk, UniformFlow)
}


def flow_velocity_at(spec, point, time=0.0):
    """Velocity vector of a flow field at a point.

    Parameters
    ----------
    spec: FlowField
        Flow description.
    point: tuple of float or tuple of arrays
        ``(x, z)`` in meters.
    time: float
        Time (s), only used by time-varying flows. Default 0.

    Returns
    -------
    numpy.ndarray
        ``[vx, vz]`` in m/s (shape (2,) for a single point, (2, N) for N).
    """
    x, z = point
    vx, vz = spec.velocity_at(np.asarray(x, dtype=float), np.asarray(z, dtype=float), time)
    return np.array([vx, vz], dtype=float)


# SECTION - SCATTERERS

@dataclass(frozen=True, eq=False)
class ScattererField:
    """Point scatterers of one frame.

    Attributes
    ----------
    x, z: numpy.ndarray
        Positions (m).
    amplitudes: numpy.ndarray
        Reflectivities (dimensionless).
    rng_seed: int
        Seed the field was drawn with.
    density: float
        Scatterers per lambda^3 (lambda-thick slab).
    region: Region
        Region the field lives in; moving scatterers are wrapped back into it.
    """

    x: np.ndarray
    z: np.ndarray
    amplitudes: np.ndarray
    rng_seed: int = 0
    density: float = 0.0
    region: Region = None

    @property
    def positions(self):
        return np.column_stack([self.x, self.z])

    def __len__(self):
        return self.x.size


def merge_fields(*fields):
    """One field holding the scatterers of several (region of the first)."""
    fields = [f for f in fields if f is not None]
    return replace(
        fields[0],
        x=np.concatenate([f.x for f in fields]),
        z=np.concatenate([f.z for f in fields]),
        amplitudes=np.concatenate([f.amplitudes for f in fields]),
    )


def seed_scatterers(region, density, seed, wavelength):
    """Uniformly seed scatterers in a region.

    The count is round(density * area * lambda / lambda^3): the 2-D region
    stands for a slab one wavelength thick. Amplitudes are standard normal.

    Parameters
    ----------
    region: Region
    density: float
        Scatterers per lambda^3, > 0.
    seed: int
        Seed of the generator; the same seed gives the same field.
    wavelength: float
        lambda (m).

    Returns
    -------
    ScattererField
    """
    assert_strictly_positive_number(density, "density")
    assert_strictly_positive_number(wavelength, "wavelength")
    if region is None or not region.area > 0:
        raise ConfigError("Scatterers cannot be seeded in an empty region.", field="region")

    count = int(round(density * region.area * wavelength / wavelength ** 3))
    if count < 1:
        raise ConfigError(
            f"A density of {density} per lambda^3 puts no scatterer in the region.",
            field="density")

    rng = np.random.default_rng(seed)
    x, z = region.sample(rng, count)
    amplitudes = rng.standard_normal(count)
    logger.debug("seeded %d scatterers (seed %s)", count, seed)
    return ScattererField(np.asarray(x, float), np.asarray(z, float), amplitudes,
                          rng_seed=seed, density=density, region=region)


def seed_tissue(box, flow_region, density, seed, wavelength, level_db=20.0):
    """Static tissue scatterers filling ``box`` outside ``flow_region``.

    Amplitudes are scaled by 10^(level_db / 20) relative to blood, so a
    positive level makes the tissue brighter than the flow.
    """
    field = seed_scatterers(box, density, seed, wavelength)
    outside = ~flow_region.contains(field.x, field.z)
    gain = 10 ** (level_db / 20)
    return replace(field, x=field.x[outside], z=field.z[outside],
                   amplitudes=field.amplitudes[outside] * gain)


def advance_scatterers(field, spec, dt, time=0.0):
    """Move every scatterer along the flow for one step of ``dt`` seconds.

    Scatterers that leave the region re-enter it at the opposite boundary,
    which keeps the density constant.
    """
    assert_strictly_positive_number(dt, "dt")
    x, z = spec.advance(field.x, field.z, dt, time)
    if field.region is not None:
        x, z = field.region.wrap(x, z)
    return replace(field, x=np.asarray(x, float), z=np.asarray(z, float))


class Bubble:
    """High-amplitude transient scatterer travelling down the vessel axis.

    The bubble enters at the upstream end of the vessel segment at
    ``start_time``, moves at ``speed_factor`` times the centerline speed and
    disappears once it leaves the segment.
    """

    def __init__(self, amplitude_factor=20.0, speed_factor=1.5, start_time=0.0):
        assert_strictly_positive_number(amplitude_factor, "bubble.amplitude_factor")
        assert_strictly_positive_number(speed_factor, "bubble.speed_factor")
        assert_positive_number(start_time, "bubble.start_time")
        self.amplitude_factor = float(amplitude_factor)
        self.speed_factor = float(speed_factor)
        self.start_time = float(start_time)

    def __repr__(self):
        return (f"<Bubble, {self.amplitude_factor} x amplitude, "
                f"{self.speed_factor} x centerline speed>")

    def to_dict(self):
        return {"amplitude_factor": self.amplitude_factor,
                "speed_factor": self.speed_factor,
                "start_time": self.start_time}


def bubble_position(bubble, vessel, region, time):
    """Position of the bubble at ``time`` or None when it is not in the
    segment. Pulsatile speed changes are integrated numerically."""
    if time < bubble.start_time:
        return None
    ts = np.linspace(bubble.start_time, time, 64)
    speeds = np.array([vessel.peak_velocity_at(t) for t in ts]) * bubble.speed_factor
    travelled = float(trapezoid(speeds, ts)) if time > bubble.start_time else 0.0
    a = -region.length / 2 + travelled
    if abs(a) > region.length / 2:
        return None
    x, z = region.to_global(a, 0.0)
    return float(x), float(z)


def scatterer_trajectory(field, spec, cfg, tissue=None, bubble=None):
    """Scatterer snapshots for every frame of an acquisition.

    Parameters
    ----------
    field: ScattererField
        Moving (blood) scatterers at frame 0.
    spec: FlowField
        Flow moving them.
    cfg: AcquisitionConfig
        Supplies the frame count and PRF.
    tissue: ScattererField, optional
        Static scatterers added to every frame.
    bubble: Bubble, optional
        Transient scatterer, only for vessel flows.

    Returns
    -------
    list of ScattererField, one per frame
    """
    dt = 1.0 / cfg.prf
    rms = float(np.sqrt(np.mean(field.amplitudes ** 2)))
    frames = []
    current = field
    for n in range(cfg.num_frames):
        time = n * dt
        parts = [current, tissue]
        if bubble is not None:
            position = bubble_position(bubble, spec, field.region, time)
            if position is not None:
                parts.append(ScattererField(np.array([position[0]]), np.array([position[1]]),
                                            np.array([bubble.amplitude_factor * rms])))
        frames.append(merge_fields(*parts))
        current = advance_scatterers(current, spec, dt, time)
    return frames


# SECTION - RF SYNTHESIS

@dataclass(frozen=True, eq=False)
class RFFrameSet:
    """Per-channel RF echoes of a plane-wave acquisition.

    ``samples`` has shape (channels, fast-time samples, frames). Sample n
    of every channel was recorded at ``start_time + n / sampling_frequency``.
    """

    samples: np.ndarray
    sampling_frequency: float
    start_time: float
    prf_effective: float
    center_frequency: float = 0.0
    sound_speed: float = 1540.0
    prf: float = 0.0
    seed: int = 0

    @property
    def num_channels(self):
        return self.samples.shape[0]

    @property
    def num_samples(self):
        return self.samples.shape[1]

    @property
    def num_frames(self):
        return self.samples.shape[2]

    @property
    def end_time(self):
        return self.start_time + self.num_samples / self.sampling_frequency

    def times(self):
        return self.start_time + np.arange(self.num_samples) / self.sampling_frequency

    def covers_depth(self, z_max):
        """True when the record reaches the round trip to depth z_max."""
        return self.end_time >= 2 * z_max / self.sound_speed


def _burst(cycles, f0, fs):
    """``cycles`` periods of a sine at f0, floor(cycles fs / f0) samples."""
    n = int(np.floor(cycles * fs / f0 + 1e-9))
    return np.sin(2 * np.pi * f0 * np.arange(n) / fs)


def synth_pulse(cfg, impulse_response="hanning"):
    """Received pulse shape sampled at f_s.

    The excitation, a ``num_tx_cycles``-cycle sinusoid at f0, is convolved
    with the transmit and the receive impulse responses (each a Hanning
    weighted single-cycle sinusoid at f0) and peak-normalized to 1.

    Every burst holds floor(cycles f_s / f0) samples, so the full pulse is
    (num_tx_cycles + 2) f_s / f0 - 2 samples long when f_s / f0 is an
    integer, and at most two samples shorter otherwise.

    Parameters
    ----------
    cfg: AcquisitionConfig
    impulse_response: {'hanning', 'delta'}
        'delta' skips both impulse responses and returns the bare excitation.

    Returns
    -------
    numpy.ndarray

    Examples
    --------
    >>> cfg = AcquisitionConfig(8e6, 96e6, 10e3)
    >>> synth_pulse(cfg).size
    82
    """
    assert_contents(impulse_response, ("hanning", "delta"), "impulse_response")
    f0, fs = cfg.center_frequency, cfg.sampling_frequency

    pulse = _burst(cfg.num_tx_cycles, f0, fs)
    if impulse_response == "hanning":
        kernel = _burst(1, f0, fs)
        kernel *= np.hanning(kernel.size)
        pulse = np.convolve(np.convolve(pulse, kernel), kernel)

    return pulse / np.max(np.abs(pulse))


def _fractional_delay_taps(position):
    """Indices and weights of the Kaiser-windowed sinc kernel that places
    a unit impulse at each fractional sample ``position``."""
    h = FRACTIONAL_DELAY_HALF_TAPS
    base = np.floor(position).astype(np.int64)
    offsets = np.arange(-h + 1, h + 1)
    idx = base[..., None] + offsets
    dist = idx - position[..., None]
    window = np.i0(FRACTIONAL_DELAY_BETA * np.sqrt(np.clip(1 - (dist / h) ** 2, 0, None)))
    window /= np.i0(FRACTIONAL_DELAY_BETA)
    return idx, np.sinc(dist) * window


def _simulate_frame(field, element_x, pulse, cfg, start_time, num_samples, spreading):
    fs, c = cfg.sampling_frequency, cfg.sound_speed
    n_c = element_x.size
    center = (pulse.size - 1) / 2
    center_int = int(np.floor(center))
    pad = pulse.size + FRACTIONAL_DELAY_HALF_TAPS
    length = num_samples + 2 * pad

    dx = element_x[:, None] - field.x[None, :]
    r_rx = np.sqrt(dx ** 2 + field.z[None, :] ** 2)
    tau = (field.z[None, :] + r_rx) / c

    amplitude = np.broadcast_to(field.amplitudes[None, :], tau.shape)
    if spreading == "spherical":
        amplitude = amplitude / r_rx

    # pulse centers land on tau; the integer part of the center is taken up
    # by the slice after the convolution
    position = (tau - start_time) * fs - (center - center_int) + pad
    idx, weights = _fractional_delay_taps(position)
    weights = weights * amplitude[..., None]

    inside = (idx >= 0) & (idx < length)
    rows = np.broadcast_to(np.arange(n_c)[:, None, None], idx.shape)
    flat = (rows * length + idx)[inside]
    timeline = np.bincount(flat, weights=weights[inside], minlength=n_c * length)
    timeline = timeline.reshape(n_c, length)

    full = fftconvolve(timeline, pulse[None, :], axes=1)
    first = pad + center_int
    return full[:, first:first + num_samples]


def simulate_rf(trajectory, array, cfg, z_max, start_time=0.0, num_samples=None,
                spreading="none", threads=1, pulse=None, seed=0):
    """Synthesize plane-wave pulse-echo RF for a scatterer trajectory.

    Parameters
    ----------
    trajectory: list of ScattererField
        One snapshot per frame, ``cfg.num_frames`` in total.
    array: TransducerArray
    cfg: AcquisitionConfig
    z_max: float
        Deepest depth of interest (m); the record always reaches its round
        trip.
    start_time: float
        Time of the first sample (s). Default 0.
    num_samples: int, optional
        Samples per channel. By default just enough to cover the round trip
        to z_max from the farthest element plus the pulse length.
    spreading: {'none', 'spherical'}
        'spherical' divides each echo by the receive path length.
    threads: int
        Frames simulated concurrently. Results do not depend on it.
    pulse: numpy.ndarray, optional
        Pulse shape; :func:`synth_pulse` by default.
    seed: int
        Recorded in the frame set.

    Returns
    -------
    RFFrameSet
    """
    if len(trajectory) != cfg.num_frames:
        raise ConfigError(
            f"The trajectory holds {len(trajectory)} frames, num_frames is {cfg.num_frames}.",
            field="num_frames")
    assert_contents(spreading, ("none", "spherical"), "spreading")
    assert_positive_number(start_time, "start_time")

    fs, c = cfg.sampling_frequency, cfg.sound_speed
    if pulse is None:
        pulse = synth_pulse(cfg)

    if num_samples is None:
        farthest = np.max(np.abs(array.element_x)) + 0.0
        end = (z_max + np.sqrt(farthest ** 2 + z_max ** 2)) / c + pulse.size / fs
        num_samples = int(ceil((end - start_time) * fs)) + 1
    if start_time + num_samples / fs < 2 * z_max / c:
        raise ConfigError(
            f"{num_samples} samples from t = {start_time} s do not reach the round trip"
            f" to z_max = {z_max} m.", field="num_samples")

    logger.info("simulating %d frames x %d channels x %d samples",
                cfg.num_frames, array.num_elements, num_samples)

    def work(field):
        return _simulate_frame(field, array.element_x, pulse, cfg, start_time,
                               num_samples, spreading)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            frames = list(pool.map(work, trajectory))
    else:
        frames = [work(f) for f in trajectory]

    samples = np.stack(frames, axis=2)
    return RFFrameSet(samples, float(fs), float(start_time), float(cfg.prf),
                      center_frequency=float(cfg.center_frequency),
                      sound_speed=float(c), prf=float(cfg.prf), seed=seed)
