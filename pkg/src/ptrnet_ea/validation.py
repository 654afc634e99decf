"""Input validation helpers used by the estimators and the functional API."""
from __future__ import annotations

import numbers

import numpy as np

from .exceptions import ConfigError, InvalidDimensionError


def check_coordinates(X, *, name: str = "X") -> np.ndarray:
    """Coerce ``X`` to a float64 array of shape ``(m, n, 2)``.

    Accepts a single instance of shape ``(n, 2)``, an array-like batch, a
    :class:`~ptrnet_ea.tsp.Dataset` or a sequence of
    :class:`~ptrnet_ea.tsp.Instance`. All instances must share ``n >= 2`` and
    every coordinate must be finite and lie in ``[0, 1]``.
    """
    from .tsp import Dataset, Instance

    if isinstance(X, Dataset):
        X = X.instances
    if isinstance(X, Instance):
        X = [X]
    if isinstance(X, (list, tuple)) and X and isinstance(X[0], Instance):
        sizes = {inst.n for inst in X}
        if len(sizes) != 1:
            raise InvalidDimensionError(f"{name}: instances have mixed node counts {sorted(sizes)}")
        X = np.stack([inst.nodes for inst in X])
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise InvalidDimensionError(f"{name}: expected shape (m, n, 2), got {arr.shape}")
    if arr.shape[0] == 0:
        raise InvalidDimensionError(f"{name}: no instances")
    if arr.shape[1] < 2:
        raise InvalidDimensionError(f"{name}: instances need n >= 2 nodes, got {arr.shape[1]}")
    if not np.isfinite(arr).all():
        raise InvalidDimensionError(f"{name}: non-finite coordinates")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise InvalidDimensionError(f"{name}: coordinates must lie in [0, 1]")
    return arr


def check_seed(seed, name: str = "random_state") -> int:
    if isinstance(seed, bool) or not isinstance(seed, numbers.Integral) or seed < 0:
        raise ConfigError(f"{name} must be a non-negative integer, got {seed!r}")
    return int(seed)


def check_positive_int(value, name: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < minimum:
        raise ConfigError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def check_positive_float(value, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise ConfigError(f"{name} must be a real number, got {value!r}")
    value = float(value)
    if not (np.isfinite(value) and value > 0):
        raise ConfigError(f"{name} must be finite and > 0, got {value!r}")
    return value
