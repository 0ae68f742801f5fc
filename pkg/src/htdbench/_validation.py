import math

import numpy as np

from .exceptions import InputDomainError, NumericInputError


def check_finite(value, name="value"):
    if isinstance(value, (int, float)):
        ok = math.isfinite(value)
    else:
        ok = np.isfinite(np.asarray(value, dtype=float)).all()
    if not ok:
        raise NumericInputError(f"{name} must be finite, got {value!r}")
    return value


def check_positive(value, name):
    check_finite(value, name)
    if not value > 0:
        raise InputDomainError(f"{name} must be > 0, got {value!r}")
    return value


def check_nonnegative(value, name):
    check_finite(value, name)
    if value < 0:
        raise InputDomainError(f"{name} must be >= 0, got {value!r}")
    return value


def check_unit_interval(value, name, *, open_left=False):
    check_finite(value, name)
    low_ok = value > 0 if open_left else value >= 0
    if not (low_ok and value <= 1):
        bracket = "(0, 1]" if open_left else "[0, 1]"
        raise InputDomainError(f"{name} must lie in {bracket}, got {value!r}")
    return value


def check_window_values(window, name="window"):
    """Return ``window`` as a 2-D float array with every entry in [0, 1]."""
    arr = np.asarray(window, dtype=float)
    if arr.ndim == 1:
        arr = arr[np.newaxis, :]
    if arr.ndim != 2:
        raise InputDomainError(f"{name} must be 2-D (channels x samples), got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NumericInputError(f"{name} contains non-finite values")
    if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        raise InputDomainError(f"{name} values must be normalized to [0, 1]")
    return arr


def check_int_range(value, name, low, high):
    if isinstance(value, bool) or int(value) != value:
        raise InputDomainError(f"{name} must be an integer, got {value!r}")
    if not low <= value <= high:
        raise InputDomainError(f"{name} must lie in [{low}, {high}], got {value!r}")
    return int(value)


def isclose(a, b, tol=1e-12):
    return math.isclose(a, b, rel_tol=0.0, abs_tol=tol)
