"""Experiment runner: configuration document, pipeline stages, full runs
and parameter sweeps.

A run goes simulate -> beamform -> estimate (clutter filter included) ->
evaluate and leaves its artefacts plus a ``manifest.json`` of SHA-256
hashes in one directory. With a fixed seed and a single thread two runs
of the same spec give byte-identical artefacts.

Example
--------
>>> spec = ExperimentSpec.from_dict({"profile": "desk", "beamformer": "nlhr",
...                                  "phantom": {"peak_velocity": 25},
...                                  "units": {"peak_velocity": "cm/s"}})
>>> manifest = run(spec, "out/case1")
"""

# Standard Library Imports
from contextlib import contextmanager
from copy import deepcopy
from dataclasses import dataclass, field, fields
import logging
import os
import time
import warnings

# Third Party Imports
import numpy as np

# Local Application Imports
from nlhrflow.beamforming import (
    BEAMFORMERS,
    MAS_MODES,
    beamform_subapertures,
    bmode_image,
    resample_rf,
    to_slowtime_ensemble,
)
from nlhrflow.clutter import filter_ensemble
from nlhrflow.data_validation import (
    ConfigError,
    PipelineError,
    assert_contents,
    assert_integer,
)
from nlhrflow.geometry import (
    AcquisitionConfig,
    ImagingGrid,
    build_array,
    config_errors,
)
from nlhrflow.metrics import extract_profile, field_error_summary, transient_fwhm
from nlhrflow.phantom import (
    FLOW_TYPES,
    BoxRegion,
    Bubble,
    ParabolicVessel,
    flow_velocity_at,
    scatterer_trajectory,
    seed_scatterers,
    seed_tissue,
    simulate_rf,
    synth_pulse,
)
from nlhrflow.storage import (
    read_json,
    save_ensemble,
    save_rf,
    save_velocity_field,
    write_csv,
    write_cube,
    write_json,
    write_manifest,
    write_pgm,
)
from nlhrflow.units import FIELD_KINDS, apply_units, to_si
from nlhrflow.velocity import (
    EstimatorConfig,
    dcc_field,
    estimator_errors,
    tac_field,
    velocity_trace,
)

logger = logging.getLogger(__name__)

STAGES = ("simulate", "beamform", "estimate", "evaluate")

# config section most closely tied to each stage
STAGE_FIELDS = {
    "simulate": "phantom",
    "beamform": "beamformer",
    "estimate": "estimator",
    "evaluate": "phantom",
    "sv-spectrum": "clutter",
}

SECTIONS = ("array", "acquisition", "simulation", "resample", "grid", "phantom", "tissue",
            "bubble", "clutter", "estimator")
SCALARS = ("beamformer", "mas_mode", "seed", "threads", "deterministic")

PHANTOM_KEYS = {
    "parabolic_vessel": ("type", "density", "center_x", "center_depth", "radius",
                         "peak_velocity", "inclination", "segment_length"),
    "pulsatile_vessel": ("type", "density", "center_x", "center_depth", "radius",
                         "peak_velocity", "inclination", "segment_length", "period",
                         "pulsatility", "reversal_time"),
    "rotating_disk": ("type", "density", "center_x", "center_depth", "radius",
                      "angular_velocity"),
    "uniform_flow": ("type", "density", "speed", "angle"),
}

# filled in when a document switches the phantom type
PHANTOM_DEFAULTS = {
    "parabolic_vessel": dict(center_x=0.0, center_depth=15e-3, radius=5e-3,
                             peak_velocity=0.5, inclination=0.0, segment_length=None),
    "pulsatile_vessel": dict(center_x=0.0, center_depth=15e-3, radius=5e-3,
                             peak_velocity=0.5, inclination=0.0, segment_length=None,
                             period=0.01, pulsatility=0.5, reversal_time=None),
    "rotating_disk": dict(center_x=0.0, center_depth=15e-3, radius=4e-3,
                          angular_velocity=50.0),
    "uniform_flow": dict(speed=0.1, angle=90.0),
}

OPTIONAL_DEFAULTS = {
    "tissue": dict(density=2.0, level_db=20.0, margin=1e-3),
    "bubble": dict(amplitude_factor=20.0, speed_factor=1.5, start_time=0.0),
}

_ESTIMATOR_DEFAULTS = dict(estimator="tac", k_window=0.8e-3, L_window=20.0, dcc_spacing=0.1,
                           f_prime=None, window_hop=None, dcc_lag=1, dcc_max_shift=1.0,
                           dcc_stride=8, use_tac_angle=False)

PROFILES = {
    "desk": {
        "array": dict(num_elements=64, pitch=0.3e-3),
        "acquisition": dict(center_frequency=8e6, sampling_frequency=50e6, prf=10e3,
                            sound_speed=1540.0, num_frames=128, num_tx_cycles=5,
                            f_number=4.0, alpha_set=[6.0, 9.0, 12.0, 15.0]),
        "simulation": dict(spreading="none", impulse_response="hanning"),
        "resample": dict(axial_factor=2, temporal_factor=2),
        "grid": dict(x_min=-1e-3, x_max=1e-3, z_min=10e-3, z_max=20e-3,
                     dx_wavelengths=0.5, dz_wavelengths=1 / 12),
        "phantom": dict(type="parabolic_vessel", density=2.0,
                        **PHANTOM_DEFAULTS["parabolic_vessel"]),
        "tissue": None,
        "bubble": None,
        "clutter": dict(k_remove=0, auto=False, max_rank=10),
        "estimator": dict(_ESTIMATOR_DEFAULTS),
        "beamformer": "nlhr",
        "mas_mode": "product",
        "seed": 0,
        "threads": 1,
        "deterministic": False,
    },
    "probe128": {
        "array": dict(num_elements=128, pitch=0.1925e-3),
        "acquisition": dict(center_frequency=8e6, sampling_frequency=100e6, prf=10e3,
                            sound_speed=1540.0, num_frames=128, num_tx_cycles=5,
                            f_number=1.25, alpha_set=[6.0, 9.0, 12.0, 15.0]),
        "simulation": dict(spreading="none", impulse_response="hanning"),
        "resample": dict(axial_factor=2, temporal_factor=2),
        "grid": dict(x_min=-2e-3, x_max=2e-3, z_min=19e-3, z_max=31e-3,
                     dx_wavelengths=0.5, dz_wavelengths=1 / 12),
        "phantom": dict(type="parabolic_vessel", density=10.0, center_x=0.0,
                        center_depth=25e-3, radius=5e-3, peak_velocity=0.5,
                        inclination=0.0, segment_length=None),
        "tissue": None,
        "bubble": None,
        "clutter": dict(k_remove=0, auto=False, max_rank=10),
        "estimator": dict(_ESTIMATOR_DEFAULTS),
        "beamformer": "nlhr",
        "mas_mode": "product",
        "seed": 0,
        "threads": 1,
        "deterministic": False,
    },
}

# sweepable parameter -> document section (None for top-level keys)
SWEEP_AXES = {
    "k_window": "estimator",
    "L_window": "estimator",
    "peak_velocity": "phantom",
    "inclination": "phantom",
    "k_remove": "clutter",
    "num_frames": "acquisition",
    "f_number": "acquisition",
    "seed": None,
}

# SECTION - CONFIGURATION DOCUMENT


@dataclass
class ExperimentSpec:
    """Complete description of one experiment.

    Each section is a plain dict whose keys mirror the constructor
    arguments of the object it builds; values are in SI units (angles in
    degrees). Build specs with :meth:`from_dict`, :meth:`from_json` or
    :meth:`from_profile` so that profile defaults and key checks apply.
    """

    profile: str = "desk"
    array: dict = field(default_factory=dict)
    acquisition: dict = field(default_factory=dict)
    simulation: dict = field(default_factory=dict)
    resample: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    phantom: dict = field(default_factory=dict)
    tissue: dict = None
    bubble: dict = None
    clutter: dict = field(default_factory=dict)
    estimator: dict = field(default_factory=dict)
    beamformer: str = "nlhr"
    mas_mode: str = "product"
    seed: int = 0
    threads: int = 1
    deterministic: bool = False

    @classmethod
    def from_profile(cls, name="desk"):
        assert_contents(name, list(PROFILES), "profile")
        return cls(profile=name, **deepcopy(PROFILES[name]))

    @classmethod
    def from_dict(cls, doc):
        """Spec from a (possibly partial) document.

        Missing keys take the defaults of the document's ``profile``
        (``desk`` when absent). An optional ``units`` object names the unit
        each field is written in. Every unknown key is reported at once.

        Raises
        ------
        ConfigError
        """
        if not isinstance(doc, dict):
            raise ConfigError("An experiment document should be a JSON object.", field="spec")
        profile = doc.get("profile", "desk")
        assert_contents(profile, list(PROFILES), "profile")
        base = deepcopy(PROFILES[profile])

        units = doc.get("units") or {}
        if not isinstance(units, dict):
            raise ConfigError("'units' should map field names to units.", field="units")

        errors = []
        for key in doc:
            if key not in SECTIONS + SCALARS + ("profile", "units"):
                errors.append(f"unknown key '{key}'")

        for section in SECTIONS:
            if section not in doc:
                continue
            value = doc[section]
            if section in OPTIONAL_DEFAULTS:
                if value is None or value is False:
                    base[section] = None
                    continue
                if value is True:
                    value = {}
                merged = deepcopy(base[section] or OPTIONAL_DEFAULTS[section])
            else:
                merged = base[section]
            if not isinstance(value, dict):
                errors.append(f"'{section}' should be an object, not {value!r}")
                continue

            if section == "phantom":
                kind = value.get("type", merged["type"])
                if kind not in PHANTOM_KEYS:
                    errors.append(
                        f"'phantom.type' should be one of {list(PHANTOM_KEYS)}, not '{kind}'")
                    continue
                if kind != merged["type"]:
                    merged = _switch_phantom(merged, kind)
                allowed = PHANTOM_KEYS[kind]
            else:
                allowed = tuple(merged)

            unknown = [k for k in value if k not in allowed]
            errors.extend(f"unknown key '{section}.{k}'" for k in unknown)
            known = {k: v for k, v in value.items() if k in allowed}
            try:
                merged.update(apply_units(known, units))
            except ConfigError as error:
                errors.extend(error.errors)
            base[section] = merged

        for key in SCALARS:
            if key in doc:
                base[key] = doc[key]

        if errors:
            raise ConfigError("Invalid experiment document: " + "; ".join(errors),
                              field=_first_field(errors), errors=errors)
        return cls(profile=profile, **base)

    @classmethod
    def from_json(cls, path):
        try:
            doc = read_json(path)
        except (OSError, ValueError) as error:
            raise ConfigError(f"Cannot read config '{path}': {error}", field="config")
        return cls.from_dict(doc)

    def to_dict(self):
        return deepcopy({f.name: getattr(self, f.name) for f in fields(self)})

    def with_value(self, key, value, section=None):
        """Copy of the spec with one field replaced.

        ``section`` defaults to the top level for ``seed``, ``beamformer``
        and the other scalar keys, and otherwise to the section that holds
        ``key``.
        """
        doc = self.to_dict()
        if section is None and key not in SCALARS:
            section = SWEEP_AXES.get(key) or _section_of(doc, key)
        if section is None:
            doc[key] = value
        else:
            if doc.get(section) is None:
                doc[section] = {}
            doc[section][key] = value
        return ExperimentSpec.from_dict(doc)

    @property
    def effective_threads(self):
        return 1 if self.deterministic else int(self.threads)


def _switch_phantom(old, kind):
    merged = {"type": kind, "density": old.get("density", 2.0)}
    merged.update(PHANTOM_DEFAULTS[kind])
    merged.update({k: v for k, v in old.items() if k in PHANTOM_KEYS[kind] and k != "type"})
    return merged


def _section_of(doc, key):
    for section in SECTIONS:
        if isinstance(doc.get(section), dict) and key in doc[section]:
            return section
    raise ConfigError(f"No config section holds '{key}'.", field=key)


def _first_field(errors):
    message = errors[0]
    if "'" in message:
        return message.split("'")[1]
    return None


@dataclass(frozen=True, eq=False)
class ExperimentSetup:
    """Objects built from an :class:`ExperimentSpec`."""

    array: object
    acquisition: AcquisitionConfig
    grid: ImagingGrid
    flow: object
    region: object
    estimator: EstimatorConfig
    prf_effective: float


def build(spec):
    """Build and check every object a spec describes.

    Raises
    ------
    ConfigError
        With the complete list of violations in ``errors``.
    """
    errors = []

    def attempt(label, make):
        try:
            return make()
        except ConfigError as error:
            errors.extend(error.errors)
        except TypeError as error:
            errors.append(f"'{label}': {error}")
        return None

    array = attempt("array", lambda: build_array(**spec.array))
    acquisition = attempt("acquisition", lambda: AcquisitionConfig(
        **{**spec.acquisition, "alpha_set": tuple(spec.acquisition["alpha_set"])}))
    if acquisition is not None:
        errors.extend(config_errors(acquisition))

    for key in ("axial_factor", "temporal_factor"):
        attempt(f"resample.{key}", lambda: assert_integer(spec.resample[key], key, minimum=1))
    attempt("simulation.spreading", lambda: assert_contents(
        spec.simulation["spreading"], ("none", "spherical"), "spreading"))
    attempt("simulation.impulse_response", lambda: assert_contents(
        spec.simulation["impulse_response"], ("hanning", "delta"), "impulse_response"))
    attempt("beamformer", lambda: assert_contents(spec.beamformer, BEAMFORMERS, "beamformer"))
    attempt("mas_mode", lambda: assert_contents(
        str(spec.mas_mode).replace("-", "_"), MAS_MODES, "mas_mode"))
    attempt("clutter.k_remove", lambda: assert_integer(
        spec.clutter["k_remove"], "k_remove", minimum=0))
    attempt("seed", lambda: assert_integer(spec.seed, "seed", minimum=0))
    attempt("threads", lambda: assert_integer(spec.threads, "threads", minimum=1))

    grid = None
    if acquisition is not None and not errors:
        wavelength = acquisition.wavelength
        g = spec.grid
        grid = attempt("grid", lambda: ImagingGrid.from_extent(
            g["x_min"], g["x_max"], g["z_min"], g["z_max"],
            g["dx_wavelengths"] * wavelength, g["dz_wavelengths"] * wavelength))

    phantom = dict(spec.phantom)
    kind = phantom.pop("type")
    phantom.pop("density", None)
    segment_length = phantom.pop("segment_length", None)
    flow = attempt("phantom", lambda: FLOW_TYPES[kind](**phantom))

    region = None
    if flow is not None and grid is not None:
        region = attempt("phantom", lambda: _flow_region(flow, grid, segment_length))

    if spec.bubble is not None:
        attempt("bubble", lambda: Bubble(**spec.bubble))

    estimator = attempt("estimator", lambda: EstimatorConfig(**spec.estimator))
    prf_effective = None
    if estimator is not None and acquisition is not None and not errors:
        prf_effective = acquisition.prf * spec.resample["temporal_factor"]
        errors.extend(estimator_errors(estimator, prf_effective))
        if estimator.window_length(prf_effective) > acquisition.num_frames * \
                spec.resample["temporal_factor"]:
            errors.append("'k_window' is longer than the acquisition")

    if errors:
        raise ConfigError("Invalid experiment: " + "; ".join(errors),
                          field=_first_field(errors), errors=errors)
    return ExperimentSetup(array, acquisition, grid, flow, region, estimator, prf_effective)


def _flow_region(flow, grid, segment_length=None):
    x_min, x_max, z_min, z_max = grid.extent
    if isinstance(flow, ParabolicVessel):
        if segment_length is None:
            width = x_max - x_min
            segment_length = max(1.5 * width, width + 4e-3)
        return flow.region(segment_length)
    if flow.kind == "uniform_flow":
        return flow.region(x_min, x_max, z_min, z_max)
    return flow.region()


# SECTION - STAGES

@contextmanager
def pipeline_stage(name):
    """Run a block as a named stage; any failure becomes a PipelineError."""
    started = time.perf_counter()
    logger.info("%s stage started", name)
    try:
        yield
    except PipelineError:
        raise
    except ConfigError as error:
        raise PipelineError(name, error.field or STAGE_FIELDS[name], str(error)) from error
    except Exception as error:
        raise PipelineError(name, STAGE_FIELDS[name], f"{type(error).__name__}: {error}") \
            from error
    logger.info("%s stage finished in %.1f s", name, time.perf_counter() - started)


def write_spec(spec, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    return write_json(os.path.join(out_dir, "spec.json"), spec.to_dict())


def simulate_stage(spec, out_dir, setup=None):
    """Seed the phantom, move it through the acquisition and synthesize RF.

    Writes ``rf.bin/json``, ``phantom.json`` and ``spec.json``.

    Returns
    -------
    (RFFrameSet, list of str)
    """
    setup = setup or build(spec)
    cfg = setup.acquisition
    grid = setup.grid

    blood = seed_scatterers(setup.region, spec.phantom["density"], spec.seed, cfg.wavelength)
    tissue = None
    if spec.tissue is not None:
        margin = spec.tissue["margin"]
        x_min, x_max, z_min, z_max = grid.extent
        box = BoxRegion(x_min - margin, x_max + margin, max(z_min - margin, cfg.wavelength),
                        z_max + margin)
        tissue = seed_tissue(box, setup.region, spec.tissue["density"], spec.seed + 1,
                             cfg.wavelength, spec.tissue["level_db"])
    bubble = None
    if spec.bubble is not None:
        if not isinstance(setup.flow, ParabolicVessel):
            raise ConfigError("A bubble needs a vessel phantom.", field="bubble")
        bubble = Bubble(**spec.bubble)

    trajectory = scatterer_trajectory(blood, setup.flow, cfg, tissue=tissue, bubble=bubble)
    pulse = synth_pulse(cfg, spec.simulation["impulse_response"])

    # record only the echo span of the phantom and the grid
    fs, c = cfg.sampling_frequency, cfg.sound_speed
    shallowest = min(grid.extent[2], min(float(f.z.min()) for f in trajectory))
    deepest = max(grid.extent[3], max(float(f.z.max()) for f in trajectory))
    start_time = max(0.0, 2 * shallowest / c - pulse.size / fs)
    start_time = float(np.floor(start_time * fs) / fs)

    rf = simulate_rf(trajectory, setup.array, cfg, deepest, start_time=start_time,
                     spreading=spec.simulation["spreading"],
                     threads=spec.effective_threads, pulse=pulse, seed=spec.seed)

    files = [write_spec(spec, out_dir)]
    files += save_rf(os.path.join(out_dir, "rf"), rf)
    phantom_doc = dict(setup.flow.to_dict(), scatterers=len(blood),
                       tissue_scatterers=len(tissue) if tissue is not None else 0,
                       bubble=bubble.to_dict() if bubble is not None else None,
                       density=spec.phantom["density"], seed=spec.seed)
    files.append(write_json(os.path.join(out_dir, "phantom.json"), phantom_doc))
    logger.info("simulated %d scatterers, RF shape %s", len(blood), rf.samples.shape)
    return rf, files


def beamform_stage(spec, rf, out_dir, setup=None):
    """Resample the RF and form left and right sub-aperture signals on the
    grid; also writes a B-mode image.

    Returns
    -------
    (SubApertureEnsemble, numpy.ndarray, list of str)
        Ensemble, B-mode image (n_x, n_z) in dB and the written files.
    """
    setup = setup or build(spec)
    resampled = resample_rf(rf, spec.resample["axial_factor"], spec.resample["temporal_factor"])
    ensemble = beamform_subapertures(resampled, setup.grid, setup.array, setup.acquisition,
                                     spec.beamformer, spec.mas_mode,
                                     threads=spec.effective_threads)
    bmode = bmode_image(rf, setup.grid, setup.array, setup.acquisition)

    files = [write_spec(spec, out_dir)]
    files += save_ensemble(out_dir, ensemble)
    files += write_cube(os.path.join(out_dir, "bmode"), bmode, dims=["x", "z"], unit="dB")
    files.append(write_pgm(os.path.join(out_dir, "bmode.pgm"), bmode.T, -60.0, 0.0))
    return ensemble, bmode, files


def sv_spectrum_rows(reports):
    rows = []
    for report in reports:
        tag, alpha, side = report.source
        for k, db, freq in report.to_rows():
            rows.append((tag, alpha, side, k, db, freq))
    return rows


SV_HEADER = ("beamformer", "alpha_deg", "side", "component", "singular_value_db",
             "frequency_hz")


def estimate_stage(spec, ensemble, out_dir, rf=None, setup=None):
    """Clutter-filter the slow-time data and estimate velocities.

    TAC works on the filtered ensemble over the whole grid. DCC beamforms
    its own directional lines from ``rf`` at every ``dcc_stride``-th pixel
    of the profile column.

    Returns
    -------
    (VelocityField, list of SvdReport, list of str)
    """
    setup = setup or build(spec)
    cfg = setup.acquisition
    est = setup.estimator
    threads = spec.effective_threads

    slowtime = to_slowtime_ensemble(ensemble)
    filtered, reports = filter_ensemble(slowtime, spec.clutter["k_remove"],
                                        auto=spec.clutter["auto"],
                                        max_rank=spec.clutter["max_rank"], threads=threads)

    if est.estimator == "tac":
        velocity = tac_field(filtered, est, cfg, setup.grid)
    else:
        if rf is None:
            raise ConfigError("The DCC estimator needs the RF data.", field="estimator")
        resampled = resample_rf(rf, spec.resample["axial_factor"],
                                spec.resample["temporal_factor"])
        x, z = _dcc_pixels(setup, est.dcc_stride)
        if est.use_tac_angle:
            angles = _tac_angles(tac_field(filtered, est, cfg, setup.grid), setup.grid, x, z)
        else:
            angles = _true_angles(setup.flow, x, z)
        array = setup.array
        region = (float(array.element_x[0]), float(array.element_x[-1]), 0.0, np.inf)
        velocity = dcc_field(resampled, x, z, angles, array, cfg, est, spec.beamformer,
                             spec.mas_mode, region=region, threads=threads)

    files = [write_spec(spec, out_dir)]
    files.append(write_csv(os.path.join(out_dir, "sv_spectrum.csv"), SV_HEADER,
                           sv_spectrum_rows(reports)))
    files += _write_velocity(out_dir, velocity, setup)
    return velocity, reports, files


def _dcc_pixels(setup, stride):
    grid = setup.grid
    flow = setup.flow
    center_x = getattr(flow, "center_x", 0.0)
    ix = int(np.argmin(np.abs(grid.x_coords - center_x)))
    z = grid.z_coords
    if isinstance(flow, ParabolicVessel):
        x_col = np.full(z.size, grid.x_coords[ix])
        z = z[np.abs(flow.radial_position(x_col, z)) <= flow.radius]
    z = z[::stride]
    return np.full(z.size, grid.x_coords[ix]), z


def _true_angles(flow, x, z):
    if isinstance(flow, ParabolicVessel):
        return np.full(x.size, flow.flow_angle(0.0))
    vx, vz = flow_velocity_at(flow, (x, z))
    angles = np.degrees(np.arctan2(vx, vz))
    return np.where(np.hypot(vx, vz) > 0, angles, np.nan)


def _tac_angles(tac, grid, x, z):
    """Circular mean over windows of the TAC angle at the nearest pixels."""
    ix = np.argmin(np.abs(grid.x_coords[:, None] - x[None, :]), axis=0)
    iz = np.argmin(np.abs(grid.z_coords[:, None] - z[None, :]), axis=0)
    pixels = grid.pixel_index(ix, iz)
    theta = np.radians(tac.angle[pixels])
    with np.errstate(invalid="ignore"):
        s = np.nanmean(np.sin(theta), axis=1)
        c = np.nanmean(np.cos(theta), axis=1)
    return np.degrees(np.arctan2(s, c))


def _window_mean(values):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", category=RuntimeWarning)
        return np.nanmean(values, axis=1)


def speed_range(flow):
    """Upper end of the speed heatmap scale (m/s)."""
    if isinstance(flow, ParabolicVessel):
        top = flow.peak_velocity * (1 + getattr(flow, "pulsatility", 0.0))
    elif flow.kind == "rotating_disk":
        top = abs(flow.angular_velocity) * flow.radius
    else:
        top = abs(flow.speed)
    return float(top) if top > 0 else 1.0


VELOCITY_HEADER = ("x_m", "z_m", "t_window_s", "v_m_s", "theta_deg", "valid")
VELOCITY_MEAN_HEADER = ("x_m", "z_m", "speed_m_s", "angle_deg", "vx_m_s", "vz_m_s",
                        "valid_fraction")


def velocity_rows(velocity):
    """One row per pixel and estimation window, windows running fastest:
    (x, z, t_window, v, theta, valid)."""
    n_p, n_w = velocity.magnitude.shape
    x = np.repeat(velocity.x, n_w)
    z = np.repeat(velocity.z, n_w)
    t = np.tile(velocity.window_times, n_p)
    return zip(x, z, t, velocity.magnitude.ravel(), velocity.angle.ravel(),
               (int(v) for v in velocity.valid.ravel()))


def _write_velocity(out_dir, velocity, setup):
    files = save_velocity_field(os.path.join(out_dir, "velocity"), velocity)
    files.append(write_csv(os.path.join(out_dir, "velocity.csv"), VELOCITY_HEADER,
                           velocity_rows(velocity)))

    magnitude = _window_mean(velocity.magnitude)
    vx = _window_mean(velocity.vx)
    vz = _window_mean(velocity.vz)
    angle = np.degrees(np.arctan2(vx, vz))
    valid_fraction = velocity.valid.mean(axis=1)
    files.append(write_csv(os.path.join(out_dir, "velocity_mean.csv"), VELOCITY_MEAN_HEADER,
                           zip(velocity.x, velocity.z, magnitude, angle, vx, vz,
                               valid_fraction)))
    ok = np.isfinite(vx) & np.isfinite(vz)
    files.append(write_csv(os.path.join(out_dir, "quiver.csv"), ("x_m", "z_m", "vx_m_s", "vz_m_s"),
                           zip(velocity.x[ok], velocity.z[ok], vx[ok], vz[ok])))

    if velocity.pixel_shape is not None:
        top = speed_range(setup.flow)
        shape = velocity.pixel_shape
        files.append(write_pgm(os.path.join(out_dir, "speed.pgm"),
                               magnitude.reshape(shape).T, 0.0, top))
        files.append(write_pgm(os.path.join(out_dir, "angle.pgm"),
                               angle.reshape(shape).T, -180.0, 180.0))
        files.append(write_json(os.path.join(out_dir, "heatmaps.json"), {
            "speed.pgm": {"vmin": 0.0, "vmax": top, "unit": "m/s"},
            "angle.pgm": {"vmin": -180.0, "vmax": 180.0, "unit": "deg"},
        }))
    return files


PROFILE_HEADER = ("r_m", "z_m", "v_measured_m_s", "v_true_m_s", "theta_measured_deg",
                  "theta_true_deg", "v_bias_percent", "v_sd_percent", "a_bias_deg",
                  "a_sd_deg")


def evaluate_stage(spec, velocity, out_dir, setup=None):
    """Compare estimates with the phantom truth.

    Vessel phantoms get ``profile.csv`` and profile statistics; other
    phantoms a field error summary. With a bubble, the velocity-time trace
    at the vessel center is written to ``trace.csv`` and its transient
    width reported.

    Returns
    -------
    (dict, ProfileReport or None, list of str)
    """
    setup = setup or build(spec)
    flow = setup.flow
    grid = setup.grid if velocity.pixel_shape is not None else None
    metrics = {"beamformer": spec.beamformer, "mas_mode": spec.mas_mode,
               "estimator": velocity.estimator, "phantom": flow.kind,
               "k_remove": spec.clutter["k_remove"], "seed": spec.seed}
    files = [write_spec(spec, out_dir)]

    report = None
    if isinstance(flow, ParabolicVessel):
        report = extract_profile(velocity, flow, grid)
        metrics["profile"] = report.summary()
        metrics["peak_velocity"] = flow.peak_velocity
        files.append(write_csv(os.path.join(out_dir, "profile.csv"), PROFILE_HEADER,
                               report.to_rows()))
    else:
        metrics["field"] = field_error_summary(velocity, flow)

    if spec.bubble is not None and grid is not None and isinstance(flow, ParabolicVessel):
        ix = int(np.argmin(np.abs(grid.x_coords - flow.center_x)))
        iz = int(np.argmin(np.abs(grid.z_coords - flow.center_depth)))
        pixel = int(grid.pixel_index(ix, iz))
        times, magnitude, angle = velocity_trace(velocity, pixel)
        dt = float(times[1] - times[0]) if times.size > 1 else 0.0
        metrics["transient"] = {"pixel": pixel, "fwhm_s": transient_fwhm(magnitude, dt)}
        files.append(write_csv(os.path.join(out_dir, "trace.csv"),
                               ("time_s", "speed_m_s", "angle_deg"),
                               zip(times, magnitude, angle)))

    files.append(write_json(os.path.join(out_dir, "metrics.json"), metrics))
    return metrics, report, files


def sv_spectrum_stage(spec, ensemble, out_dir):
    """Singular-value spectra of every sub-aperture cube, without
    estimating velocities."""
    slowtime = to_slowtime_ensemble(ensemble)
    _, reports = filter_ensemble(slowtime, 0, threads=spec.effective_threads)
    files = [write_csv(os.path.join(out_dir, "sv_spectrum.csv"), SV_HEADER,
                       sv_spectrum_rows(reports))]
    return reports, files


def write_figures(out_dir, setup, velocity=None, report=None, reports=None, bmode=None):
    """Standalone HTML figures in ``<out_dir>/figures`` for whichever
    results are given."""
    # plotly is only loaded when figures are asked for
    from nlhrflow import plotting

    figures = {}
    if reports:
        figures["sv_spectrum"] = plotting.plot_sv_spectrum(reports)
        figures["sv_frequencies"] = plotting.plot_sv_frequencies(reports)
    if report is not None:
        figures["profile"] = plotting.plot_profile(report)
    if velocity is not None and velocity.pixel_shape is not None:
        figures["vector_field"] = plotting.plot_vector_field(velocity, setup.grid, bmode)
        center = int(np.argmax(np.mean(np.where(velocity.valid, velocity.magnitude, 0.0),
                                       axis=1)))
        times, magnitude, angle = velocity_trace(velocity, center)
        figures["trace"] = plotting.plot_velocity_trace(times, magnitude, angle)

    directory = os.path.join(out_dir, "figures")
    os.makedirs(directory, exist_ok=True)
    files = []
    for name, fig in figures.items():
        path = os.path.join(directory, f"{name}.html")
        fig.write_html(path, include_plotlyjs="cdn")
        files.append(path)
    return files


# SECTION - RUNS AND SWEEPS

def run(spec, out_dir, html=False):
    """Run the whole pipeline and write every artefact into ``out_dir``.

    Parameters
    ----------
    spec : ExperimentSpec
    out_dir : str
    html : bool, optional
        Also write plotly figures to ``out_dir/figures``, by default False

    Returns
    -------
    dict
        The manifest, ``{"files": {relative path: sha256}}``.

    Raises
    ------
    ConfigError
        The spec is invalid; nothing has run.
    PipelineError
        A stage failed; carries the stage name and config field.
    """
    setup = build(spec)
    os.makedirs(out_dir, exist_ok=True)
    files = []
    with pipeline_stage("simulate"):
        rf, written = simulate_stage(spec, out_dir, setup)
        files += written
    with pipeline_stage("beamform"):
        ensemble, bmode, written = beamform_stage(spec, rf, out_dir, setup)
        files += written
    with pipeline_stage("estimate"):
        velocity, reports, written = estimate_stage(spec, ensemble, out_dir, rf, setup)
        files += written
    with pipeline_stage("evaluate"):
        _, report, written = evaluate_stage(spec, velocity, out_dir, setup)
        files += written
        if html:
            files += write_figures(out_dir, setup, velocity, report, reports, bmode)
    return write_manifest(out_dir, sorted(set(files)))


def _label(value):
    return f"{value:g}" if isinstance(value, float) else str(value)


def sweep(spec, axis, values, out_dir, unit=None, html=False):
    """One run per value of a parameter plus ``comparison.csv``.

    Parameters
    ----------
    spec : ExperimentSpec
        Template; every run changes only ``axis``.
    axis : str
        One of SWEEP_AXES.
    values : list
        Values in ``unit`` (SI when None).
    out_dir : str
        Runs go to ``<out_dir>/<axis>=<value>``.
    unit : str, optional

    Returns
    -------
    dict
        Run directory name -> manifest.
    """
    assert_contents(axis, list(SWEEP_AXES), "axis")
    if len(values) == 0:
        raise ConfigError("A sweep needs at least one value.", field="values")
    os.makedirs(out_dir, exist_ok=True)

    manifests = {}
    rows = []
    header = None
    for value in values:
        si = to_si(value, FIELD_KINDS[axis], unit) if unit is not None else value
        if axis in ("k_remove", "num_frames", "seed"):
            si = int(round(si))
        name = f"{axis}={_label(value)}"
        run_dir = os.path.join(out_dir, name)
        logger.info("sweep %s", name)
        manifests[name] = run(spec.with_value(axis, si), run_dir, html=html)

        metrics = read_json(os.path.join(run_dir, "metrics.json"))
        summary = metrics.get("profile") or metrics.get("field") or {}
        if header is None:
            header = ("axis", "value", "run") + tuple(sorted(summary))
        rows.append((axis, si, name) + tuple(summary.get(k) for k in header[3:]))

    comparison = write_csv(os.path.join(out_dir, "comparison.csv"), header, rows)
    logger.info("wrote %s", comparison)
    return manifests
