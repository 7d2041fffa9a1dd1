"""Module to contain conversion from units to the SI units used internally.

The number stored against each unit is the multiplier that turns a value
written in that unit into the internal unit of its kind. Angles are kept
in degrees internally, so the angle table converts to degrees.
"""

# Standard Library Imports
from math import pi

# Local Application Imports
from nlhrflow.data_validation import ConfigError, assert_contents

Hz = 1
kHz = 1e3
MHz = 1e6

m = 1
cm = 0.01
mm = 0.001
um = 1e-6

s = 1
ms = 1e-3
us = 1e-6

deg = 1
rad = 180 / pi

SI_UNITS = {
    'frequency': {'Hz': Hz, 'kHz': kHz, 'MHz': MHz},
    'length': {'m': m, 'cm': cm, 'mm': mm, 'um': um},
    'time': {'s': s, 'ms': ms, 'us': us},
    'velocity': {'m/s': m / s, 'cm/s': cm / s, 'mm/s': mm / s},
    'angle': {'deg': deg, 'rad': rad},
    'angular_velocity': {'rad/s': 1, 'deg/s': pi / 180, 'rev/s': 2 * pi},
    'count': {'1': 1},
    'ratio': {'1': 1, '%': 0.01},
    'wavelengths': {'lambda': 1},
    'level': {'dB': 1},
}

default_units = {
    'frequency': 'Hz',
    'length': 'm',
    'time': 's',
    'velocity': 'm/s',
    'angle': 'deg',
    'angular_velocity': 'rad/s',
    'count': '1',
    'ratio': '1',
    'wavelengths': 'lambda',
    'level': 'dB',
}

UNIT_KEYS = list(SI_UNITS.keys())
UNIT_VALUES = {key: list(table.keys()) for key, table in SI_UNITS.items()}

# kind of every numeric field that can appear in an experiment document
FIELD_KINDS = {
    # array
    'num_elements': 'count',
    'pitch': 'length',
    # acquisition
    'center_frequency': 'frequency',
    'sampling_frequency': 'frequency',
    'prf': 'frequency',
    'sound_speed': 'velocity',
    'num_frames': 'count',
    'num_tx_cycles': 'count',
    'f_number': 'ratio',
    'alpha_set': 'angle',
    # grid
    'x_min': 'length',
    'x_max': 'length',
    'z_min': 'length',
    'z_max': 'length',
    'dx_wavelengths': 'wavelengths',
    'dz_wavelengths': 'wavelengths',
    # phantom
    'center_x': 'length',
    'center_depth': 'length',
    'radius': 'length',
    'peak_velocity': 'velocity',
    'inclination': 'angle',
    'segment_length': 'length',
    'density': 'count',
    'angular_velocity': 'angular_velocity',
    'speed': 'velocity',
    'angle': 'angle',
    'period': 'time',
    'pulsatility': 'ratio',
    'reversal_time': 'time',
    'margin': 'length',
    # tissue and bubble
    'level_db': 'level',
    'amplitude_factor': 'ratio',
    'speed_factor': 'ratio',
    'start_time': 'time',
    # estimator and clutter
    'k_window': 'time',
    'L_window': 'wavelengths',
    'dcc_spacing': 'wavelengths',
    'window_hop': 'time',
    'dcc_lag': 'count',
    'dcc_max_shift': 'wavelengths',
    'dcc_stride': 'count',
    'k_remove': 'count',
    'max_rank': 'count',
    'seed': 'count',
}


def to_si(value, kind, unit):
    """Convert a value (or list of values) written in ``unit`` to the
    internal unit of ``kind``.

    Parameters
    ----------
    value: float or list of float
        Value(s) to convert.
    kind: str
        One of UNIT_KEYS, e.g. 'frequency'.
    unit: str
        One of UNIT_VALUES[kind], e.g. 'MHz'.

    Returns
    -------
    float or list of float

    Examples
    --------
    >>> to_si(8, 'frequency', 'MHz')
    8000000.0
    >>> to_si([5, 10], 'velocity', 'cm/s')
    [0.05, 0.1]
    """
    assert_contents(kind, UNIT_KEYS, "kind")
    assert_contents(unit, UNIT_VALUES[kind], "unit")
    factor = SI_UNITS[kind][unit]
    if factor == 1:
        return list(value) if isinstance(value, (list, tuple)) else value
    if isinstance(value, (list, tuple)):
        return [float(v) * factor for v in value]
    return float(value) * factor


def apply_units(section, units):
    """Return a copy of a document section with every field listed in
    ``units`` converted to internal units.

    Only keys present in the section are touched, so one ``units`` map can
    be applied to every section of a document.
    """
    converted = dict(section)
    for field, unit in units.items():
        if field not in converted or converted[field] is None:
            continue
        if field not in FIELD_KINDS:
            raise ConfigError(
                f"No unit kind is known for field '{field}'.", field=field)
        converted[field] = to_si(converted[field], FIELD_KINDS[field], unit)
    return converted
