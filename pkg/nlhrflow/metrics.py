"""Evaluation statistics: velocity and angle bias and spread, vessel
profiles restricted to the inner 90 % of the radius, field summaries for
other phantoms and transient and spectral measures."""

# Third Party Imports
import numpy as np

# Local Application Imports
from nlhrflow.data_validation import ConfigError, assert_strictly_positive_number
from nlhrflow.phantom import ParabolicVessel, flow_velocity_at

INNER_FRACTION = 0.9


def _nonempty(values, name):
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ConfigError(f"'{name}' is empty.", field=name)
    return values


def wrap_angle(degrees):
    """Map angles to (-180, 180]."""
    wrapped = np.mod(np.asarray(degrees, dtype=float) + 180.0, 360.0) - 180.0
    return np.where(wrapped == -180.0, 180.0, wrapped)[()]


def velocity_bias_sd(measured, truth, v_peak):
    """Velocity bias and spread relative to the peak velocity.

    V_Bias% = mean(V_M - V_T) / V_P * 100 and V_SD% = std(V_M) / V_P * 100,
    the standard deviation taken with the population definition. 2-D
    inputs are (repeats, positions) and give one value per position.
    NaN entries are ignored.

    Parameters
    ----------
    measured, truth: array_like
        Same shape (m/s).
    v_peak: float
        V_P (m/s), > 0.

    Returns
    -------
    (bias_percent, sd_percent)

    Examples
    --------
    >>> velocity_bias_sd([0.75, 0.75], [0.5, 0.5], 1.0)
    (25.0, 0.0)
    """
    measured = _nonempty(measured, "measured")
    truth = np.broadcast_to(_nonempty(truth, "truth"), measured.shape)
    assert_strictly_positive_number(v_peak, "v_peak")
    with np.errstate(invalid="ignore"):
        bias = np.nanmean(measured - truth, axis=0) / v_peak * 100
        sd = np.nanstd(measured, axis=0) / v_peak * 100
    return bias[()], sd[()]


def angle_bias_sd(measured, truth):
    """Angle bias and spread (degrees), wrap-aware.

    Differences to the truth are wrapped to (-180, 180] first; the bias is
    their mean and the spread their (population) standard deviation.

    Examples
    --------
    >>> angle_bias_sd([179.0, -179.0], 180.0)
    (0.0, 1.0)
    """
    measured = _nonempty(measured, "measured")
    diff = wrap_angle(measured - np.asarray(truth, dtype=float))
    with np.errstate(invalid="ignore"):
        bias = np.nanmean(diff, axis=0)
        sd = np.nanstd(diff, axis=0)
    return np.asarray(bias)[()], np.asarray(sd)[()]


class ProfileReport:
    """Velocity profile across a vessel with per-position statistics.

    Every array has one entry per profile position that lies within the
    inner 90 % of the vessel radius.
    """

    header = ("r_m", "z_m", "v_measured", "v_true", "theta_measured", "theta_true",
              "v_bias_percent", "v_sd_percent", "a_bias_deg", "a_sd_deg")

    def __init__(self, radial_positions, depths, measured_v, true_v, measured_theta,
                 true_theta, v_bias_percent, v_sd_percent, a_bias, a_sd,
                 peak_velocity, column_x):
        columns = [np.asarray(c, dtype=float) for c in
                   (radial_positions, depths, measured_v, true_v, measured_theta,
                    true_theta, v_bias_percent, v_sd_percent, a_bias, a_sd)]
        if len({c.shape for c in columns}) != 1:
            raise ConfigError("Every profile column needs one entry per position.",
                              field="profile")
        (self.radial_positions, self.depths, self.measured_v, self.true_v,
         self.measured_theta, self.true_theta, self.v_bias_percent,
         self.v_sd_percent, self.a_bias, self.a_sd) = columns
        self.peak_velocity = float(peak_velocity)
        self.column_x = float(column_x)

    def summary(self):
        """Medians over positions of the per-position statistics."""
        def median(values):
            values = values[np.isfinite(values)]
            return float(np.median(values)) if values.size else float("nan")
        return {
            "median_bias": median(self.v_bias_percent),
            "sd": median(self.v_sd_percent),
            "median_angle_bias": median(self.a_bias),
            "angle_sd": median(self.a_sd),
            "n": int(self.radial_positions.size),
        }

    def to_rows(self):
        return list(zip(self.radial_positions, self.depths, self.measured_v, self.true_v,
                        self.measured_theta, self.true_theta, self.v_bias_percent,
                        self.v_sd_percent, self.a_bias, self.a_sd))


def _profile_points(field, vessel, grid):
    """Pixel indices, coordinates and the column x of the profile line."""
    if grid is not None and field.pixel_shape is not None:
        x_min, x_max, _, _ = grid.extent
        half = (grid.dx or 0.0) / 2
        if not x_min - half <= vessel.center_x <= x_max + half:
            raise ConfigError(
                f"The vessel center x = {vessel.center_x} m lies outside the grid.",
                field="phantom.center_x")
        ix = int(np.argmin(np.abs(grid.x_coords - vessel.center_x)))
        n_z = grid.shape[1]
        pixels = grid.pixel_index(ix, np.arange(n_z))
        return pixels, np.full(n_z, grid.x_coords[ix]), grid.z_coords, float(grid.x_coords[ix])
    if field.x is None:
        raise ConfigError("The velocity field carries no pixel coordinates.", field="grid")
    # point fields (DCC) are already sampled on the profile line
    return np.arange(field.x.size), field.x, field.z, float(np.median(field.x))


def extract_profile(field, vessel, grid=None):
    """Profile along the image column through the vessel center.

    Parameters
    ----------
    field: VelocityField
        Estimates on ``grid``, or at arbitrary points (``grid`` None), in
        which case every point of the field is a profile position.
    vessel: ParabolicVessel
        Truth (a pulsatile vessel is evaluated at each window's time).
    grid: ImagingGrid, optional

    Returns
    -------
    ProfileReport
    """
    if not isinstance(vessel, ParabolicVessel):
        raise ConfigError("Profiles are only defined for vessel phantoms.", field="phantom")
    pixels, x, z, column_x = _profile_points(field, vessel, grid)
    r = vessel.radial_position(x, z)
    keep = np.abs(r) <= INNER_FRACTION * vessel.radius
    if not np.any(keep):
        raise ConfigError("The profile line does not cross the vessel.", field="grid")
    pixels, x, z, r = pixels[keep], x[keep], z[keep], r[keep]

    # truth per (window, position)
    times = field.window_times
    true_v = np.array([vessel.speed_at(x, z, t) for t in times])
    true_v = np.abs(true_v)
    true_theta = np.array([np.full(x.size, vessel.flow_angle(t)) for t in times])

    measured_v = np.where(field.valid[pixels], field.magnitude[pixels], np.nan).T
    measured_theta = np.where(field.valid[pixels], field.angle[pixels], np.nan).T

    v_bias, v_sd = velocity_bias_sd(measured_v, true_v, vessel.peak_velocity)
    a_bias, a_sd = angle_bias_sd(measured_theta, true_theta)

    with np.errstate(invalid="ignore"):
        mean_v = np.nanmean(measured_v, axis=0)
        mean_theta = wrap_angle(true_theta[0] + np.nanmean(
            wrap_angle(measured_theta - true_theta), axis=0))

    return ProfileReport(r, z, mean_v, true_v.mean(axis=0), mean_theta, true_theta.mean(axis=0),
                         np.atleast_1d(v_bias), np.atleast_1d(v_sd), np.atleast_1d(a_bias),
                         np.atleast_1d(a_sd), vessel.peak_velocity, column_x)


def field_error_summary(field, flow, time=None):
    """Median speed and angle errors over every valid pixel with moving
    truth, for phantoms without a profile line.

    Speed errors are relative to the largest true speed, in percent.
    """
    if field.x is None:
        raise ConfigError("The velocity field carries no pixel coordinates.", field="grid")
    t = field.window_times if time is None else np.atleast_1d(time)
    speed_errors, angle_errors = [], []
    for w, tw in enumerate(t):
        vx, vz = flow_velocity_at(flow, (field.x, field.z), tw)
        speed = np.hypot(vx, vz)
        moving = (speed > 0) & field.valid[:, w]
        if not np.any(moving):
            continue
        true_angle = np.degrees(np.arctan2(vx, vz))
        scale = speed.max()
        speed_errors.append((field.magnitude[moving, w] - speed[moving]) / scale * 100)
        angle_errors.append(wrap_angle(field.angle[moving, w] - true_angle[moving]))
    if not speed_errors:
        return {"median_speed_error": float("nan"), "median_abs_speed_error": float("nan"),
                "median_angle_error": float("nan"), "n": 0}
    speed_errors = np.concatenate(speed_errors)
    angle_errors = np.atleast_1d(np.concatenate([np.atleast_1d(a) for a in angle_errors]))
    return {
        "median_speed_error": float(np.median(speed_errors)),
        "median_abs_speed_error": float(np.median(np.abs(speed_errors))),
        "median_angle_error": float(np.median(angle_errors)),
        "n": int(speed_errors.size),
    }


def transient_fwhm(trace, dt):
    """Duration (s) of the largest excursion of a trace from its median,
    measured at half of the excursion's height.

    Crossings are located by linear interpolation; an excursion still above
    half height at the ends of the trace is cut there.
    """
    trace = np.asarray(trace, dtype=float)
    excursion = np.abs(trace - np.nanmedian(trace))
    excursion = np.where(np.isfinite(excursion), excursion, 0.0)
    peak = int(np.argmax(excursion))
    height = excursion[peak]
    if height == 0:
        return 0.0
    half = height / 2

    left = float(peak)
    i = peak
    while i > 0 and excursion[i - 1] >= half:
        i -= 1
    if i > 0:
        left = i - (excursion[i] - half) / (excursion[i] - excursion[i - 1])
    else:
        left = 0.0

    j = peak
    n = excursion.size
    while j < n - 1 and excursion[j + 1] >= half:
        j += 1
    if j < n - 1:
        right = j + (excursion[j] - half) / (excursion[j] - excursion[j + 1])
    else:
        right = float(n - 1)
    return (right - left) * dt


def spectral_centroid(signal, fs):
    """Power-weighted mean frequency (Hz) of the positive half of a real
    signal's spectrum, DC excluded."""
    signal = np.asarray(signal, dtype=float)
    signal = np.where(np.isfinite(signal), signal, 0.0)
    power = np.abs(np.fft.rfft(signal)) ** 2
    freqs = np.fft.rfftfreq(signal.size, 1 / fs)
    power, freqs = power[1:], freqs[1:]
    total = power.sum()
    return float(np.sum(freqs * power) / total) if total > 0 else float("nan")


def axial_spectrum_centroid(line, dz, c):
    """Spectral centroid of a beamformed line sampled every dz along depth,
    expressed as a fast-time frequency (Hz)."""
    return spectral_centroid(line, c / (2 * dz))
