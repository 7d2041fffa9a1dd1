"""Receive chain: resampling, delay tables, channel directive beams,
sub-apertures, delay-and-sum (DAS) and nonlinear multiply-and-sum (MAS)
beamforming, the 2 f0 band-pass and slow-time demodulation.

The public cube layouts are ``(channels, pixels, frames)`` for channel
signals and ``(angles, pixels, frames)`` for beamformed sub-aperture
signals. Internally pixels are processed in blocks with the channel axis
second, ``(pixels, channels, frames)``, so that batched matrix products
apply the apodization.

Example
--------
>>> rf2 = resample_rf(rf, 2, 2)
>>> ensemble = beamform_subapertures(rf2, grid, array, cfg, beamformer="nlhr")
>>> slowtime = to_slowtime_ensemble(ensemble)
"""

# Standard Library Imports
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from math import radians, tan
import logging
import time

# Third Party Imports
import numpy as np
from scipy.signal import filtfilt, firwin, hilbert, kaiserord, resample, resample_poly

# Local Application Imports
from nlhrflow.data_validation import (
    ConfigError,
    assert_contents,
    assert_integer,
    assert_strictly_positive_number,
)
from nlhrflow.geometry import ImagingGrid, PixelSet

logger = logging.getLogger(__name__)

# FWHM of a Gaussian in units of its standard deviation
FWHM_PER_SIGMA = 2 * np.sqrt(2 * np.log(2))
# Gaussian apodization is cut at this many standard deviations
GAUSSIAN_CUTOFF_SIGMAS = 3.0

BANDPASS_EDGES = (1.5, 2.5)
BANDPASS_TRANSITION = 0.5
BANDPASS_ATTENUATION_DB = 45.0

BEAMFORMERS = ("das", "nlhr")
MAS_MODES = ("product", "signed_sqrt")


# SECTION - DATA TYPES

@dataclass(frozen=True, eq=False)
class DelayTable:
    """Round-trip delays ``tau`` (s) and receive path lengths (m), both
    shaped (channels, pixels)."""

    tau: np.ndarray
    receive_distance: np.ndarray


@dataclass(frozen=True, eq=False)
class ChannelBeamCube:
    """Channel directive beams s_i(p), shaped (channels, pixels, frames)."""

    values: np.ndarray


@dataclass(frozen=True, eq=False)
class SubApertureEnsemble:
    """Beamformed left and right sub-aperture signals.

    Attributes
    ----------
    left, right: numpy.ndarray
        Real arrays shaped (angles, pixels, frames); NaN marks pixels whose
        sub-aperture center falls outside the array.
    alpha_set: tuple of float
        Transmit-receive angles (degrees), one per leading index.
    beamformer_tag: str
        'das' or 'nlhr'.
    center_frequency_out: float
        Carrier of the beamformed signal: f0 for DAS, 2 f0 for NLHR (Hz).
    prf_effective: float
        Frame rate of the (resampled) data (Hz).
    pixel_shape: tuple of int or None
        (n_x, n_z) when the pixels form an :class:`ImagingGrid`.
    mas_mode: str
    """

    left: np.ndarray
    right: np.ndarray
    alpha_set: tuple
    beamformer_tag: str
    center_frequency_out: float
    prf_effective: float
    pixel_shape: tuple = None
    mas_mode: str = "product"

    def __post_init__(self):
        assert_contents(self.beamformer_tag, BEAMFORMERS, "beamformer")
        if self.left.shape != self.right.shape:
            raise ConfigError("Left and right cubes must have the same shape.",
                              field="ensemble")


@dataclass(frozen=True, eq=False)
class SlowTimeEnsemble:
    """Complex slow-time series per (angle, pixel) for each side.

    A scatterer moving away from the array gives a positive slow-time
    frequency. ``f_prime`` is the carrier used by the velocity equations.
    """

    left: np.ndarray
    right: np.ndarray
    alpha_set: tuple
    beamformer_tag: str
    f_prime: float
    prf_effective: float
    pixel_shape: tuple = None

    @property
    def num_frames(self):
        return self.left.shape[-1]

    def side(self, name):
        assert_contents(name, ("left", "right"), "side")
        return self.left if name == "left" else self.right


# SECTION - RESAMPLING

def upsample_slowtime(data, factor, axis=-1):
    """Band-limited integer upsampling along the frame axis (real or
    complex input)."""
    assert_integer(factor, "temporal_factor", minimum=1)
    if factor == 1:
        return np.asarray(data)
    return resample_poly(data, factor, 1, axis=axis)


def resample_rf(rf, axial_factor=2, temporal_factor=2):
    """Upsample RF data in fast time and slow time.

    Fast time uses FFT zero-padding interpolation; slow time uses a
    polyphase band-limited interpolator. The sampling rate, the effective
    PRF and the sample counts scale with the factors.

    Parameters
    ----------
    rf: RFFrameSet
    axial_factor, temporal_factor: int
        Integer factors >= 1. Default 2.

    Returns
    -------
    RFFrameSet
    """
    assert_integer(axial_factor, "axial_factor", minimum=1)
    assert_integer(temporal_factor, "temporal_factor", minimum=1)

    samples = rf.samples
    if axial_factor > 1:
        samples = resample(samples, samples.shape[1] * axial_factor, axis=1)
    if temporal_factor > 1:
        samples = upsample_slowtime(samples, temporal_factor, axis=2)

    return replace(
        rf,
        samples=samples,
        sampling_frequency=rf.sampling_frequency * axial_factor,
        prf_effective=rf.prf_effective * temporal_factor,
    )


# SECTION - DELAYS AND APODIZATION

def compute_delays(array, pixels, c):
    """Round-trip delay from the plane-wave transmit to each pixel and back
    to each element: tau = (z_p + sqrt((x_i - x_p)^2 + z_p^2)) / c.

    Parameters
    ----------
    array: TransducerArray
    pixels: ImagingGrid or PixelSet
    c: float
        Sound speed (m/s).

    Returns
    -------
    DelayTable
    """
    assert_strictly_positive_number(c, "sound_speed")
    x, z = pixels.pixels()
    if np.any(z <= 0):
        raise ConfigError("Pixel depths must be > 0.", field="grid")
    distance = np.sqrt((array.element_x[:, None] - x[None, :]) ** 2
                       + (array.element_z - z[None, :]) ** 2)
    return DelayTable((z[None, :] + distance) / c, distance)


def gaussian_weights(centers, fwhm, num_elements):
    """Gaussian apodization over element indices.

    Parameters
    ----------
    centers: array_like of int
        Center element of each window.
    fwhm: array_like of float
        Full width at half maximum of each window, in elements.
    num_elements: int

    Returns
    -------
    numpy.ndarray
        Shape ``centers.shape + (num_elements,)``. Weights are cut at three
        standard deviations and scaled to unit sum over the elements that
        exist.
    """
    centers = np.asarray(centers)
    sigma = np.maximum(np.asarray(fwhm, dtype=float), 1e-9) / FWHM_PER_SIGMA
    d = np.arange(num_elements) - centers[..., None]
    w = np.exp(-0.5 * (d / sigma[..., None]) ** 2)
    w[np.abs(d) > GAUSSIAN_CUTOFF_SIGMAS * sigma[..., None]] = 0.0
    total = w.sum(axis=-1, keepdims=True)
    return np.divide(w, total, out=np.zeros_like(w), where=total > 0)


def _directive_weights(receive_distance, array, f_number):
    """W[p, i, j]: weight of channel j in the beam centered on element i,
    with FWHM = receive distance of (i, p) / F_n in elements."""
    fwhm = receive_distance / f_number / array.pitch
    centers = np.broadcast_to(np.arange(array.num_elements), fwhm.shape)
    return gaussian_weights(centers, fwhm, array.num_elements)


def subaperture_weights(alpha, pixels, array, f_number):
    """Left and right sub-aperture weights for one angle.

    The left window is centered on the element nearest x_p - z_p tan(alpha)
    and the right one on the element nearest x_p + z_p tan(alpha). Widths
    follow the F-number rule applied to the distance from the center
    element to the pixel.

    Returns
    -------
    w_left, w_right: numpy.ndarray
        (pixels, channels)
    valid_left, valid_right: numpy.ndarray of bool
        False where the center element falls outside the array.
    """
    x, z = pixels.pixels()
    offset = z * tan(radians(alpha))
    out = []
    for sign in (-1.0, 1.0):
        center = array.nearest_element(x + sign * offset)
        valid = (center >= 0) & (center < array.num_elements)
        cx = array.element_x[np.clip(center, 0, array.num_elements - 1)]
        fwhm = np.sqrt((cx - x) ** 2 + z ** 2) / f_number / array.pitch
        w = gaussian_weights(center, fwhm, array.num_elements)
        out.append((w, valid))
    (w_left, valid_left), (w_right, valid_right) = out
    return w_left, w_right, valid_left, valid_right


# SECTION - CHANNEL DIRECTIVE BEAMS

def _delayed_samples(samples, fs, start_time, tau):
    """Samples of every channel at the delays ``tau`` (pixels, channels),
    by linear interpolation; delays outside the record give 0.

    Returns an array shaped (pixels, channels, frames).
    """
    n_c, n_s, _ = samples.shape
    position = (tau - start_time) * fs
    i0 = np.floor(position).astype(np.intp)
    frac = (position - i0)[..., None]
    valid = (i0 >= 0) & (i0 < n_s - 1)
    i0 = np.clip(i0, 0, max(n_s - 2, 0))
    ch = np.arange(n_c)[None, :]
    lo = samples[ch, i0]
    hi = samples[ch, np.minimum(i0 + 1, n_s - 1)]
    out = lo + frac * (hi - lo)
    out[~valid] = 0.0
    return out


def channel_directive_beams(rf, delays, array, f_number):
    """Channel directive beams: for each pixel p and beam center i,
    s_i(p) = sum_j W_ip(j) e_j(tau_jp).

    W_ip is a Gaussian over element j centered on i whose FWHM equals the
    receive distance from element i to pixel p divided by F_n, in
    elements. Channels are fetched by linear interpolation, so ``rf``
    should already be upsampled.

    Returns
    -------
    ChannelBeamCube
        (channels, pixels, frames)
    """
    assert_strictly_positive_number(f_number, "f_number")
    tau = delays.tau.T
    delayed = _delayed_samples(rf.samples, rf.sampling_frequency, rf.start_time, tau)
    weights = _directive_weights(delays.receive_distance.T, array, f_number)
    beams = np.matmul(weights, delayed)
    return ChannelBeamCube(np.moveaxis(beams, 1, 0))


def form_subapertures(cube, alpha, pixels, array, f_number):
    """Apply the left and right sub-aperture weights of one angle.

    Returns
    -------
    (A_left, A_right): numpy.ndarray
        Weighted channel signals (channels, pixels, frames), not summed.
        Channels outside a window are NaN, so they take no part in the
        summation; pixels whose sub-aperture center leaves the array are
        NaN on every channel.
    """
    w_left, w_right, valid_left, valid_right = subaperture_weights(alpha, pixels, array, f_number)
    out = []
    for w, valid in ((w_left, valid_left), (w_right, valid_right)):
        a = w.T[:, :, None] * cube.values
        a[w.T == 0] = np.nan
        a[:, ~valid, :] = np.nan
        out.append(a)
    return tuple(out)


# SECTION - SUMMATION

def das_beamform(A, axis=0):
    """Delay-and-sum over the finite channels: y = sum_i A_i.

    NaN channels are skipped; NaN is returned where none is finite.

    Examples
    --------
    >>> das_beamform([1.0, 1.0, 1.0])
    3.0
    >>> das_beamform([1.0, float("nan"), 2.0])
    3.0
    """
    A = np.asarray(A, dtype=float)
    finite = np.isfinite(A)
    total = np.where(finite, A, 0.0).sum(axis=axis)
    return np.where(finite.any(axis=axis), total, np.nan)[()]


def mas_beamform(A, mode="product", axis=0, channel_mask=None):
    """Multiply-and-sum over all channel pairs, self products excluded.

    Parameters
    ----------
    A: array_like
        Weighted channel signals, channels along ``axis``.
    mode: {'product', 'signed_sqrt'}
        'product' gives sum_{i<j} A_i A_j. 'signed_sqrt' gives
        sum_{i<j} sign(A_i A_j) sqrt(|A_i A_j|).
    axis: int
        Channel axis. Default 0.
    channel_mask: array_like of bool, optional
        Channels taking part (broadcast against ``A``). Non-finite channels
        never take part.

    Returns
    -------
    float or numpy.ndarray
        NaN where fewer than two channels take part.

    Notes
    -----
    Both modes use the identity sum_{i<j} a_i a_j = ((sum a)^2 - sum a^2) / 2,
    with a = sign(A) sqrt(|A|) for 'signed_sqrt'. That is N multiplications
    instead of (N^2 - N) / 2.

    Examples
    --------
    >>> mas_beamform([2.0, 3.0])
    6.0
    >>> mas_beamform([1.0, float("nan"), 2.0])
    2.0
    """
    mode = mode.replace("-", "_")
    assert_contents(mode, MAS_MODES, "mas_mode")
    A = np.asarray(A, dtype=float)
    taking_part = np.isfinite(A)
    if channel_mask is not None:
        taking_part &= np.broadcast_to(np.asarray(channel_mask, bool), A.shape)
    A = np.where(taking_part, A, 0.0)
    if mode == "signed_sqrt":
        A = np.sign(A) * np.sqrt(np.abs(A))

    total = A.sum(axis=axis)
    power = (A * A).sum(axis=axis)
    y = (total * total - power) / 2

    count = taking_part.sum(axis=axis)
    return np.where(count >= 2, y, np.nan)[()]


def multiplication_count(N):
    """Multiplications of a pairwise multiply-and-sum over N channels,
    (N^2 - N) / 2.

    Examples
    --------
    >>> multiplication_count(128)
    8128
    """
    assert_integer(N, "N", minimum=2)
    return (N * N - N) // 2


# SECTION - PIXEL-BLOCK BEAMFORMER

def _beamform_block(rf, delays, pixels, array, cfg, beamformer, mas_mode):
    """Sub-aperture signals (angles, pixels, frames) of one pixel block."""
    cube = channel_directive_beams(rf, delays, array, cfg.f_number)
    n_a = len(cfg.alpha_set)
    left = np.empty((n_a, pixels.num_pixels, rf.num_frames))
    right = np.empty_like(left)
    for a, alpha in enumerate(cfg.alpha_set):
        for out, channels in zip((left, right),
                                 form_subapertures(cube, alpha, pixels, array, cfg.f_number)):
            if beamformer == "das":
                out[a] = das_beamform(channels, axis=0)
            else:
                out[a] = mas_beamform(channels, mas_mode, axis=0)
    return left, right


def beamform_subapertures(rf, pixels, array, cfg, beamformer="nlhr", mas_mode="product",
                          block_size=256, threads=1, bandpass=True):
    """Full receive chain from (resampled) RF to sub-aperture signals.

    Channel directive beams are formed per pixel, weighted into a left and
    a right sub-aperture for every angle of ``cfg.alpha_set`` and summed
    (DAS) or pairwise multiplied and summed (NLHR). NLHR output on an
    imaging grid is then band-passed around 2 f0.

    Parameters
    ----------
    rf: RFFrameSet
        Usually the output of :func:`resample_rf`.
    pixels: ImagingGrid or PixelSet
    array: TransducerArray
    cfg: AcquisitionConfig
    beamformer: {'das', 'nlhr'}
    mas_mode: {'product', 'signed_sqrt'}
    block_size: int
        Pixels per work unit.
    threads: int
        Blocks processed concurrently. Each block writes its own slice, so
        results do not depend on the thread count.
    bandpass: bool
        Apply :func:`bandpass_2f0` to NLHR grid output. Default True.

    Returns
    -------
    SubApertureEnsemble
    """
    assert_contents(beamformer, BEAMFORMERS, "beamformer")
    mas_mode = mas_mode.replace("-", "_")
    assert_contents(mas_mode, MAS_MODES, "mas_mode")
    assert_integer(block_size, "block_size", minimum=1)

    started = time.perf_counter()
    delays = compute_delays(array, pixels, cfg.sound_speed)
    x, z = pixels.pixels()
    n_p = x.size
    n_a = len(cfg.alpha_set)
    left = np.empty((n_a, n_p, rf.num_frames))
    right = np.empty_like(left)

    def work(start):
        stop = min(start + block_size, n_p)
        block = DelayTable(delays.tau[:, start:stop], delays.receive_distance[:, start:stop])
        l, r = _beamform_block(rf, block, PixelSet(x[start:stop], z[start:stop]), array, cfg,
                               beamformer, mas_mode)
        left[:, start:stop] = l
        right[:, start:stop] = r

    starts = range(0, n_p, block_size)
    logger.debug("beamforming %d pixels in %d blocks", n_p, len(starts))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, starts))
    else:
        for start in starts:
            work(start)

    masked = np.all(np.isnan(left) | np.isnan(right), axis=(0, 2))
    if np.any(masked):
        logger.warning("%d pixels are masked for every angle", int(masked.sum()))

    f_out = cfg.center_frequency * (2 if beamformer == "nlhr" else 1)
    pixel_shape = pixels.shape if isinstance(pixels, ImagingGrid) else None
    ensemble = SubApertureEnsemble(left, right, tuple(cfg.alpha_set), beamformer, f_out,
                                   rf.prf_effective, pixel_shape, mas_mode)
    logger.info("%s beamforming of %d pixels x %d frames took %.1f s",
                beamformer, n_p, rf.num_frames, time.perf_counter() - started)

    if beamformer == "nlhr" and bandpass and isinstance(pixels, ImagingGrid):
        ensemble = bandpass_2f0(ensemble, pixels, cfg)
    return ensemble


# SECTION - BAND-PASS AND DEMODULATION

def axial_sampling_rate(dz, c):
    """Fast-time rate equivalent to an axial pixel spacing dz (Hz)."""
    return c / (2 * dz)


def design_bandpass(center_frequency, axial_rate):
    """Linear-phase FIR band-pass with passband [1.5 f0, 2.5 f0].

    A Kaiser window sized for BANDPASS_ATTENUATION_DB of stopband
    attenuation over a 0.5 f0 transition sets the length (always odd).

    Raises
    ------
    ConfigError
        When the axial sampling is too coarse to represent 2.5 f0.
    """
    f0 = center_frequency
    nyquist = axial_rate / 2
    high = BANDPASS_EDGES[1] * f0
    if nyquist <= high:
        raise ConfigError(
            f"The axial pixel spacing gives a Nyquist rate of {nyquist:.4g} Hz, which cannot"
            f" hold the 2f0 band up to {high:.4g} Hz; use a finer axial spacing.",
            field="grid.dz_wavelengths")
    numtaps, beta = kaiserord(BANDPASS_ATTENUATION_DB, BANDPASS_TRANSITION * f0 / nyquist)
    numtaps |= 1
    return firwin(numtaps, [BANDPASS_EDGES[0] * f0, high], window=("kaiser", beta),
                  pass_zero=False, fs=axial_rate)


def _filter_axial(cube, taps, pixel_shape):
    n_x, n_z = pixel_shape
    data = cube.reshape(cube.shape[0], n_x, n_z, cube.shape[-1])
    missing = np.isnan(data)
    filtered = filtfilt(taps, [1.0], np.where(missing, 0.0, data), axis=2,
                        padlen=min(3 * taps.size, n_z - 1))
    filtered[missing] = np.nan
    return filtered.reshape(cube.shape)


def bandpass_2f0(ensemble, grid, cfg):
    """Band-pass NLHR output around 2 f0 along the axial pixel direction.

    The filter from :func:`design_bandpass` runs forward and backward
    (zero phase). Masked pixels are filtered as zeros and stay masked.

    Parameters
    ----------
    ensemble: SubApertureEnsemble
        NLHR output on ``grid``.
    grid: ImagingGrid
    cfg: AcquisitionConfig

    Returns
    -------
    SubApertureEnsemble
    """
    if ensemble.beamformer_tag != "nlhr":
        raise ConfigError("The 2f0 band-pass applies to NLHR output only.", field="beamformer")
    if grid.dz is None:
        raise ConfigError("The band-pass needs at least two axial pixels.", field="grid")

    taps = design_bandpass(cfg.center_frequency, axial_sampling_rate(grid.dz, cfg.sound_speed))
    logger.debug("2f0 band-pass with %d taps", taps.size)
    return replace(
        ensemble,
        left=_filter_axial(ensemble.left, taps, grid.shape),
        right=_filter_axial(ensemble.right, taps, grid.shape),
    )


def _analytic_conjugate(cube, pixel_shape):
    if pixel_shape is None:
        shape = cube.shape
        data = cube
        axis = 1
    else:
        shape = cube.shape
        data = cube.reshape(cube.shape[0], pixel_shape[0], pixel_shape[1], cube.shape[-1])
        axis = 2
    missing = np.isnan(data)
    analytic = np.conj(hilbert(np.where(missing, 0.0, data), axis=axis))
    analytic[missing] = np.nan
    return analytic.reshape(shape)


def to_slowtime_ensemble(ensemble):
    """Complex slow-time series per pixel from beamformed frames.

    The analytic signal is taken along the axial direction of every frame
    (along the points for a pixel list) and conjugated, so that motion away
    from the array gives a positive slow-time frequency. The carrier is
    f0 for DAS and 2 f0 for NLHR.

    Returns
    -------
    SlowTimeEnsemble
    """
    return SlowTimeEnsemble(
        _analytic_conjugate(ensemble.left, ensemble.pixel_shape),
        _analytic_conjugate(ensemble.right, ensemble.pixel_shape),
        ensemble.alpha_set,
        ensemble.beamformer_tag,
        ensemble.center_frequency_out,
        ensemble.prf_effective,
        ensemble.pixel_shape,
    )


# SECTION - B-MODE

def bmode_image(rf, grid, array, cfg, frame=0, dynamic_range=60.0):
    """Log-compressed DAS B-mode image of one frame.

    Each pixel is beamformed with a Gaussian F-number aperture centered on
    its nearest element; the envelope is taken along depth.

    Returns
    -------
    numpy.ndarray
        (n_x, n_z) in dB relative to the image maximum, clipped at
        ``-dynamic_range``.
    """
    delays = compute_delays(array, grid, cfg.sound_speed)
    x, _ = grid.pixels()
    frame_rf = rf.samples[:, :, frame:frame + 1]
    delayed = _delayed_samples(frame_rf, rf.sampling_frequency, rf.start_time, delays.tau.T)[..., 0]
    center = np.clip(array.nearest_element(x), 0, array.num_elements - 1)
    distance = delays.receive_distance[center, np.arange(x.size)]
    w = gaussian_weights(center, distance / cfg.f_number / array.pitch, array.num_elements)
    image = np.sum(w * delayed, axis=1).reshape(grid.shape)

    envelope = np.abs(hilbert(image, axis=1))
    peak = envelope.max()
    if peak == 0:
        return np.full(grid.shape, -float(dynamic_range))
    with np.errstate(divide="ignore"):
        db = 20 * np.log10(envelope / peak)
    return np.clip(db, -dynamic_range, 0.0)
