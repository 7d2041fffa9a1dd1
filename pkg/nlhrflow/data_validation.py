"""Module to aid with data validation and the package's error types."""

# Standard Library Imports
from numbers import Integral, Real


class ConfigError(ValueError):
    """Raised when a configuration value breaks one of its rules.

    Attributes
    ----------
    field: str or None
        Name of the offending configuration field (None when several
        fields are reported at once).
    errors: list of str
        Every violation found. A single-field error holds one entry.
    """

    def __init__(self, message, field=None, errors=None):
        if errors is None:
            errors = [message]
        super().__init__(message)
        self.field = field
        self.errors = list(errors)


class PipelineError(RuntimeError):
    """Raised when an experiment stage fails.

    Attributes
    ----------
    stage: str
        Pipeline stage that failed (simulate, beamform, estimate, evaluate).
    field: str
        Configuration field most closely tied to the failing stage.
    """

    def __init__(self, stage, field, message):
        super().__init__(f"{stage} stage failed ({field}): {message}")
        self.stage = stage
        self.field = field


def _is_number(n):
    return isinstance(n, Real) and not isinstance(n, bool)


def assert_number(n, name):
    """Assert that an input is a number."""
    if not _is_number(n):
        raise ConfigError(
            f"The value for '{name}' should be an integer or a float, not a {type(n)}.",
            field=name)


def assert_positive_number(n, name):
    """Assert that an input is a positive number."""
    assert_number(n, name)
    if n < 0:
        raise ConfigError(
            f"The value for '{name}' should be >= 0, not {n}", field=name)


def assert_strictly_positive_number(n, name):
    """Assert that an input is a strictly positive number."""
    assert_number(n, name)
    if n <= 0:
        raise ConfigError(
            f"The value for '{name}' should be > 0, not {n}", field=name)


def assert_integer(n, name, minimum=None):
    """Assert that an input is an integer, optionally no smaller than
    minimum."""
    if not isinstance(n, Integral) or isinstance(n, bool):
        raise ConfigError(
            f"The value for '{name}' should be an integer, not a {type(n)}.",
            field=name)
    if minimum is not None and n < minimum:
        raise ConfigError(
            f"The value for '{name}' should be >= {minimum}, not {n}",
            field=name)


def assert_strictly_increasing(values, name):
    """Assert that a sequence of numbers is strictly increasing."""
    for a, b in zip(values[:-1], values[1:]):
        if not b > a:
            raise ConfigError(
                f"The values of '{name}' should be strictly increasing"
                f" ({a} is followed by {b}).", field=name)


def assert_contents(var, content, name):
    """Assert that a variable is within a specific subset of available values"""
    if var not in content:
        raise ConfigError(
            f"The variable '{name}', must only have a"
            f" value that is specified in {content} not '{var}'.",
            field=name)
