"""Velocity estimators: triangulation with lag-one autocorrelation (TAC)
and directional cross-correlation (DCC).

Angles follow one convention throughout: theta is measured from the depth
axis and is positive toward +x, so the axial component is v cos(theta)
(positive away from the array) and the lateral one v sin(theta).
"""

# Standard Library Imports
from dataclasses import dataclass, field
from math import radians
import logging

# Third Party Imports
import numpy as np
from scipy.ndimage import uniform_filter1d
from scipy.signal import spectrogram

# Local Application Imports
from nlhrflow.data_validation import (
    ConfigError,
    assert_integer,
)
from nlhrflow.beamforming import beamform_subapertures
from nlhrflow.geometry import PixelSet

logger = logging.getLogger(__name__)

ESTIMATORS = ("tac", "dcc")


class EstimatorConfig:
    """Velocity estimator settings.

    The constructor stores values as given; :func:`validate_estimator`
    checks them against the effective frame rate.

    Attributes
    ----------
    estimator: str
        'tac' or 'dcc'.
    k_window: float
        Estimation window (s). Default 0.8 ms.
    L_window: float
        Correlation length in wavelengths: the axial averaging segment for
        TAC and the directional line length for DCC. Default 20.
    dcc_spacing: float
        Sample spacing of directional lines in wavelengths. Default 0.1.
    f_prime: float or None
        Carrier for the velocity equations (Hz). None takes it from the
        ensemble (f0 for DAS, 2 f0 for NLHR).
    window_hop: float or None
        Step between windows (s). None means non-overlapping windows.
    dcc_lag: int
        Frame lag of the DCC correlation. Default 1.
    dcc_max_shift: float
        Largest displacement searched per lag, in wavelengths. Default 1.
    dcc_stride: int
        Every n-th pixel of the profile line gets a DCC estimate.
    use_tac_angle: bool
        Beamform DCC lines along the TAC angle instead of the known flow
        direction.
    """

    def __init__(self, estimator="tac", k_window=0.8e-3, L_window=20.0, dcc_spacing=0.1,
                 f_prime=None, window_hop=None, dcc_lag=1, dcc_max_shift=1.0,
                 dcc_stride=8, use_tac_angle=False):
        self.estimator = estimator
        self.k_window = k_window
        self.L_window = L_window
        self.dcc_spacing = dcc_spacing
        self.f_prime = f_prime
        self.window_hop = window_hop
        self.dcc_lag = dcc_lag
        self.dcc_max_shift = dcc_max_shift
        self.dcc_stride = dcc_stride
        self.use_tac_angle = bool(use_tac_angle)

    def __repr__(self):
        return f"<EstimatorConfig, {self.estimator}, k_window = {self.k_window} s>"

    def window_length(self, prf):
        """Frames per estimation window (at least 2)."""
        return max(2, int(round(self.k_window * prf)))

    def hop_length(self, prf):
        if self.window_hop is None:
            return self.window_length(prf)
        return max(1, int(round(self.window_hop * prf)))


def estimator_errors(cfg, prf_effective):
    """Every rule the estimator config breaks at the given frame rate."""
    errors = []
    if cfg.estimator not in ESTIMATORS:
        errors.append(f"'estimator' should be one of {ESTIMATORS}, not '{cfg.estimator}'")
    if not cfg.k_window * prf_effective >= 2:
        errors.append(
            f"'k_window' should hold at least 2 frames at {prf_effective} Hz,"
            f" not {cfg.k_window * prf_effective:.3g}")
    if not cfg.L_window > 0:
        errors.append(f"'L_window' should be > 0, not {cfg.L_window}")
    if not cfg.dcc_spacing > 0:
        errors.append(f"'dcc_spacing' should be > 0, not {cfg.dcc_spacing}")
    if not cfg.dcc_max_shift > 0:
        errors.append(f"'dcc_max_shift' should be > 0, not {cfg.dcc_max_shift}")
    if cfg.window_hop is not None and not cfg.window_hop > 0:
        errors.append(f"'window_hop' should be > 0, not {cfg.window_hop}")
    if cfg.f_prime is not None and not cfg.f_prime > 0:
        errors.append(f"'f_prime' should be > 0, not {cfg.f_prime}")
    if not isinstance(cfg.dcc_lag, (int, np.integer)) or cfg.dcc_lag < 1:
        errors.append(f"'dcc_lag' should be an integer >= 1, not {cfg.dcc_lag}")
    if not isinstance(cfg.dcc_stride, (int, np.integer)) or cfg.dcc_stride < 1:
        errors.append(f"'dcc_stride' should be an integer >= 1, not {cfg.dcc_stride}")
    return errors


def validate_estimator(cfg, prf_effective):
    errors = estimator_errors(cfg, prf_effective)
    if errors:
        raise ConfigError("Invalid estimator config: " + "; ".join(errors),
                          field="estimator", errors=errors)
    return cfg


@dataclass(frozen=True, eq=False)
class VelocityField:
    """Velocity estimates per pixel and estimation window.

    Arrays are shaped (pixels, windows). ``magnitude`` is in m/s and
    ``angle`` in degrees within (-180, 180]; both are NaN where ``valid``
    is False.
    """

    magnitude: np.ndarray
    angle: np.ndarray
    valid: np.ndarray
    vx: np.ndarray
    vz: np.ndarray
    window_times: np.ndarray
    x: np.ndarray = None
    z: np.ndarray = None
    pixel_shape: tuple = None
    estimator: str = "tac"
    meta: dict = field(default_factory=dict)

    @property
    def num_windows(self):
        return self.magnitude.shape[1]


# SECTION - DOPPLER AND TRIANGULATION

def kasai_frequency(series, prf, axis=-1):
    """Mean Doppler frequency from the lag-one autocorrelation,
    f = prf / (2 pi) arg(sum_n conj(y_n) y_{n+1}).

    Parameters
    ----------
    series: array_like
        Complex slow-time samples, frames along ``axis``.
    prf: float
        Frame rate (Hz).
    axis: int
        Frame axis. Default -1.

    Returns
    -------
    float or numpy.ndarray
        Hz within [-prf / 2, prf / 2]; NaN for all-zero series.

    Examples
    --------
    >>> n = np.arange(64)
    >>> kasai_frequency(np.exp(2j * np.pi * 0.1 * n), 1.0)
    0.1
    """
    y = np.moveaxis(np.asarray(series), axis, -1)
    if y.shape[-1] < 2:
        raise ConfigError("The Kasai estimator needs at least 2 samples.", field="k_window")
    r1 = np.sum(np.conj(y[..., :-1]) * y[..., 1:], axis=-1)
    power = np.sum(np.abs(y) ** 2, axis=-1)
    f = prf / (2 * np.pi) * np.angle(r1)
    return np.where(power > 0, f, np.nan)[()]


def tac_estimate(f_L, f_R, alpha, f_prime, c):
    """Axial and lateral velocity from left and right Doppler frequencies.

    v cos(theta) = (f_L + f_R) / (1 + cos(alpha)) * c / (2 f')
    v sin(theta) = (f_L - f_R) / sin(alpha) * c / (2 f')

    Returns
    -------
    (v_axial, v_lateral): float or numpy.ndarray (m/s)
    """
    alpha = np.radians(alpha)
    if np.any(np.asarray(alpha) == 0):
        raise ConfigError("Triangulation needs a non-zero angle alpha.", field="alpha_set")
    scale = c / (2 * f_prime)
    f_L = np.asarray(f_L, dtype=float)
    f_R = np.asarray(f_R, dtype=float)
    v_axial = (f_L + f_R) / (1 + np.cos(alpha)) * scale
    v_lateral = (f_L - f_R) / np.sin(alpha) * scale
    return v_axial[()], v_lateral[()]


def tac_forward(v, theta, alpha, f_prime, c):
    """Left and right Doppler frequencies of a velocity (v, theta); the
    inverse of :func:`tac_estimate`."""
    theta = np.radians(theta)
    alpha = np.radians(alpha)
    v_axial = v * np.cos(theta) * (1 + np.cos(alpha))
    v_lateral = v * np.sin(theta) * np.sin(alpha)
    return f_prime / c * (v_axial + v_lateral), f_prime / c * (v_axial - v_lateral)


def velocity_polar(v_axial, v_lateral):
    """Magnitude (m/s) and angle (degrees, (-180, 180]) of a velocity."""
    magnitude = np.hypot(v_axial, v_lateral)
    angle = np.degrees(np.arctan2(v_lateral, v_axial))
    angle = np.where(angle <= -180.0, angle + 360.0, angle)
    return magnitude[()], angle[()]


def _window_starts(num_frames, length, hop):
    if length > num_frames:
        raise ConfigError(
            f"An estimation window of {length} frames does not fit in {num_frames} frames.",
            field="k_window")
    return np.arange(0, num_frames - length + 1, hop)


def _window_sums(pairs, starts, count):
    """Sum of ``count`` consecutive pair terms (last axis) from each start."""
    zero = np.zeros(pairs.shape[:-1] + (1,), dtype=pairs.dtype)
    cumulative = np.concatenate([zero, np.cumsum(pairs, axis=-1)], axis=-1)
    return cumulative[..., starts + count] - cumulative[..., starts]


def _axial_average(values, pixel_shape, length):
    """Moving sum of complex values over ``length`` axial pixels."""
    if pixel_shape is None or length <= 1:
        return values
    n_x, n_z = pixel_shape
    cube = values.reshape((n_x, n_z) + values.shape[1:])
    real = uniform_filter1d(cube.real, length, axis=1, mode="constant")
    imag = uniform_filter1d(cube.imag, length, axis=1, mode="constant")
    return (real + 1j * imag).reshape(values.shape)


def tac_field(slowtime, cfg, acquisition, grid=None):
    """TAC velocity field from a (clutter-filtered) slow-time ensemble.

    For every angle and side, lag-one autocorrelations are summed over the
    estimation window and over the L_window-long axial segment around each
    pixel, then turned into a Doppler frequency. Each angle gives an
    (axial, lateral) pair through :func:`tac_estimate`; the pairs of all
    valid angles are averaged component-wise.

    Parameters
    ----------
    slowtime: SlowTimeEnsemble
    cfg: EstimatorConfig
    acquisition: AcquisitionConfig
        Supplies the sound speed and the wavelength.
    grid: ImagingGrid, optional
        Pixel coordinates and axial spacing; without it no axial averaging
        is done.

    Returns
    -------
    VelocityField
    """
    prf = slowtime.prf_effective
    validate_estimator(cfg, prf)
    f_prime = cfg.f_prime or slowtime.f_prime
    c = acquisition.sound_speed

    length = cfg.window_length(prf)
    starts = _window_starts(slowtime.num_frames, length, cfg.hop_length(prf))
    segment = 1
    if grid is not None and grid.dz is not None:
        segment = max(1, int(round(cfg.L_window * acquisition.wavelength / grid.dz)))
    pixel_shape = slowtime.pixel_shape if grid is not None else None

    sum_axial = 0.0
    sum_lateral = 0.0
    count = 0
    for a, alpha in enumerate(slowtime.alpha_set):
        freqs = []
        for side in ("left", "right"):
            y = slowtime.side(side)[a]
            missing = ~np.all(np.isfinite(y), axis=1)
            y = np.where(missing[:, None], 0.0, y)
            pairs = np.conj(y[:, :-1]) * y[:, 1:]
            r1 = _axial_average(_window_sums(pairs, starts, length - 1), pixel_shape, segment)
            f = prf / (2 * np.pi) * np.angle(r1)
            f[(np.abs(r1) == 0) | missing[:, None]] = np.nan
            freqs.append(f)
        v_axial, v_lateral = tac_estimate(freqs[0], freqs[1], alpha, f_prime, c)
        ok = np.isfinite(v_axial) & np.isfinite(v_lateral)
        sum_axial = sum_axial + np.where(ok, v_axial, 0.0)
        sum_lateral = sum_lateral + np.where(ok, v_lateral, 0.0)
        count = count + ok

    valid = count > 0
    with np.errstate(invalid="ignore", divide="ignore"):
        vz = np.where(valid, sum_axial / np.maximum(count, 1), np.nan)
        vx = np.where(valid, sum_lateral / np.maximum(count, 1), np.nan)
    magnitude, angle = velocity_polar(vz, vx)

    if not np.any(valid):
        logger.warning("no pixel has a valid TAC estimate")
    x, z = grid.pixels() if grid is not None else (None, None)
    times = (starts + (length - 1) / 2) / prf
    return VelocityField(magnitude, angle, valid, vx, vz, times, x, z, pixel_shape, "tac",
                         {"window_frames": int(length), "segment_pixels": int(segment),
                          "f_prime": float(f_prime)})


# SECTION - DIRECTIONAL CROSS-CORRELATION

def directional_line(pixel, flow_angle, L=20.0, spacing=0.1, wavelength=1.0, region=None):
    """Sample points along the flow direction, centered at a pixel.

    Parameters
    ----------
    pixel: tuple of float
        (x, z) of the center (m).
    flow_angle: float
        Direction in degrees from the depth axis.
    L: float
        Line length in wavelengths. Default 20.
    spacing: float
        Point spacing in wavelengths. Default 0.1.
    wavelength: float
        lambda (m).
    region: tuple, optional
        (x_min, x_max, z_min, z_max); points outside it are masked, as are
        points at or above the array.

    Returns
    -------
    PixelSet
        2 round(L / 2 / spacing) + 1 points.

    Examples
    --------
    >>> directional_line((0.0, 15e-3), 90.0, 20, 0.1, 1.925e-4).num_pixels
    201
    """
    n = int(round(L / 2 / spacing))
    s = np.arange(-n, n + 1) * spacing * wavelength
    theta = radians(flow_angle)
    x = pixel[0] + s * np.sin(theta)
    z = pixel[1] + s * np.cos(theta)
    valid = z > 0
    if region is not None:
        x_min, x_max, z_min, z_max = region
        valid &= (x >= x_min) & (x <= x_max) & (z >= z_min) & (z <= z_max)
    z = np.where(z > 0, z, wavelength)
    return PixelSet(x, z, valid)


def parabolic_peak(y0, y1, y2):
    """Offset of the vertex of the parabola through (-1, y0), (0, y1),
    (1, y2); 0 where the three points do not form a maximum."""
    y0, y1, y2 = (np.asarray(v, dtype=float) for v in (y0, y1, y2))
    denom = y2 - 2 * y1 + y0
    with np.errstate(invalid="ignore", divide="ignore"):
        offset = np.where(denom < 0, -0.5 * (y2 - y0) / denom, 0.0)
    return np.clip(offset, -1.0, 1.0)[()]


def _normalized_correlation(a, b):
    a = a - a.mean(axis=1, keepdims=True)
    b = b - b.mean(axis=1, keepdims=True)
    denom = np.sqrt(np.sum(a * a, axis=1) * np.sum(b * b, axis=1))
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(denom > 0, np.sum(a * b, axis=1) / denom, np.nan)


def dcc_estimate(lines, prf_effective, lag, cfg, wavelength):
    """Velocity along the flow from directional lines.

    The central part of each line (``max_shift`` samples trimmed at both
    ends) at frame n is correlated with shifted windows of the line at
    frame n + lag. Normalized correlation functions are averaged over the
    pairs of each estimation window, the peak is refined by parabolic
    interpolation and the shift converted to a velocity,
    v = shift * spacing * lambda * prf / lag. Estimates of all lines
    (angles and sides) are averaged.

    Parameters
    ----------
    lines: numpy.ndarray
        (lines, points, frames), real. A line holding NaN is ignored.
    prf_effective: float
    lag: int
    cfg: EstimatorConfig
    wavelength: float

    Returns
    -------
    numpy.ndarray
        Signed velocity per window (m/s), positive along the line
        direction. NaN when no line is usable.
    """
    assert_integer(lag, "dcc_lag", minimum=1)
    lines = np.asarray(lines, dtype=float)
    if lines.ndim == 2:
        lines = lines[None]
    n_obs, n_points, n_frames = lines.shape

    shift = int(round(cfg.dcc_max_shift / cfg.dcc_spacing))
    if n_points - 2 * shift < 3:
        raise ConfigError(
            f"Lines of {n_points} points are too short for a {shift}-sample search.",
            field="L_window")

    length = cfg.window_length(prf_effective)
    if length - lag < 1:
        raise ConfigError(f"A window of {length} frames holds no pair at lag {lag}.",
                          field="k_window")
    starts = _window_starts(n_frames, length, cfg.hop_length(prf_effective))

    broken = ~np.all(np.isfinite(lines), axis=(1, 2))
    lines = np.where(broken[:, None, None], 0.0, lines)

    reference = lines[:, shift:n_points - shift, :n_frames - lag]
    shifts = np.arange(-shift, shift + 1)
    ncc = np.empty((n_obs, shifts.size, n_frames - lag))
    for i, d in enumerate(shifts):
        moved = lines[:, shift + d:n_points - shift + d, lag:]
        ncc[:, i] = _normalized_correlation(reference, moved)

    mean_ncc = _window_sums(ncc, starts, length - lag) / (length - lag)
    mean_ncc[broken] = np.nan

    usable = np.all(np.isfinite(mean_ncc), axis=1)
    filled = np.where(np.isfinite(mean_ncc), mean_ncc, -np.inf)
    peak = np.argmax(filled, axis=1)
    inner = np.clip(peak, 1, shifts.size - 2)
    take = lambda k: np.take_along_axis(mean_ncc, k[:, None, :], axis=1)[:, 0]
    offset = np.where((peak > 0) & (peak < shifts.size - 1),
                      parabolic_peak(take(inner - 1), take(inner), take(inner + 1)), 0.0)
    displacement = (shifts[peak] + offset) * cfg.dcc_spacing * wavelength
    v = np.where(usable, displacement * prf_effective / lag, np.nan)

    count = usable.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(count > 0, np.nansum(v, axis=0) / np.maximum(count, 1), np.nan)


def dcc_field(rf, x, z, flow_angles, array, acquisition, cfg, beamformer="nlhr",
              mas_mode="product", region=None, threads=1):
    """DCC velocity at a set of pixels.

    Each pixel gets its own directional line along ``flow_angles``, which
    is beamformed into left and right sub-aperture signals for every angle
    (no band-pass) and passed to :func:`dcc_estimate`.

    Parameters
    ----------
    rf: RFFrameSet
        Resampled RF data.
    x, z: numpy.ndarray
        Pixel coordinates (m).
    flow_angles: numpy.ndarray
        Line direction per pixel (degrees from depth).
    array, acquisition, cfg:
        Geometry, acquisition and estimator settings.
    beamformer, mas_mode: str
    region: tuple, optional
        Bounds outside which line points are masked.
    threads: int

    Returns
    -------
    VelocityField
    """

    prf = rf.prf_effective
    validate_estimator(cfg, prf)
    wavelength = acquisition.wavelength
    x = np.atleast_1d(np.asarray(x, dtype=float))
    z = np.atleast_1d(np.asarray(z, dtype=float))
    flow_angles = np.broadcast_to(np.asarray(flow_angles, dtype=float), x.shape)

    length = cfg.window_length(prf)
    starts = _window_starts(rf.num_frames, length, cfg.hop_length(prf))
    speeds = np.full((x.size, starts.size), np.nan)

    for p in range(x.size):
        if not np.isfinite(flow_angles[p]):
            continue
        line = directional_line((x[p], z[p]), flow_angles[p], cfg.L_window, cfg.dcc_spacing,
                                wavelength, region)
        ensemble = beamform_subapertures(rf, line, array, acquisition, beamformer, mas_mode,
                                         threads=threads, bandpass=False)
        lines = np.concatenate([ensemble.left, ensemble.right], axis=0)
        lines[:, ~line.valid, :] = np.nan
        speeds[p] = dcc_estimate(lines, prf, cfg.dcc_lag, cfg, wavelength)

    valid = np.isfinite(speeds)
    theta = np.radians(flow_angles)[:, None]
    vx = speeds * np.sin(theta)
    vz = speeds * np.cos(theta)
    magnitude, angle = velocity_polar(vz, vx)
    times = (starts + (length - 1) / 2) / prf
    logger.info("DCC estimates at %d pixels x %d windows", x.size, starts.size)
    return VelocityField(magnitude, angle, valid, vx, vz, times, x, z, None, "dcc",
                         {"window_frames": int(length)})


# SECTION - TIME-RESOLVED DIAGNOSTICS

def velocity_trace(field, pixel_index):
    """Window times (s), magnitudes (m/s) and angles (degrees) at one pixel."""
    return field.window_times, field.magnitude[pixel_index], field.angle[pixel_index]


def slowtime_spectrogram(series, prf, nperseg=32, noverlap=None):
    """Two-sided short-time power spectrum of a complex slow-time series.

    Returns
    -------
    (frequencies, times, power)
        Frequencies in Hz sorted ascending, times in s, power shaped
        (frequencies, times).
    """
    series = np.asarray(series)
    nperseg = min(nperseg, series.size)
    f, t, power = spectrogram(series, fs=prf, nperseg=nperseg, noverlap=noverlap,
                              return_onesided=False, mode="psd")
    order = np.argsort(f)
    return f[order], t, power[order]
