"""Input validation helpers shared across the package."""

import numpy as np

__all__ = ["as_finite_1d", "check_xy", "check_epsilon"]


def as_finite_1d(values, name="values", min_len=1):
    """Coerce to a 1-D float64 array and reject NaN/infinity.

    Accepts shape ``(n,)`` or ``(n, 1)`` input.
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 2 and arr.shape[1] == 1:
        arr = arr[:, 0]
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-dimensional, got shape {arr.shape}")
    if arr.size < min_len:
        raise ValueError(f"{name} needs at least {min_len} values, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        bad = int(np.flatnonzero(~np.isfinite(arr))[0])
        raise ValueError(f"{name} contains a non-finite value at position {bad}")
    return arr


def check_xy(X, y):
    """Validate a covariate/response pair, returning aligned float arrays."""
    x = as_finite_1d(X, name="X")
    yv = as_finite_1d(y, name="y")
    if x.size != yv.size:
        raise ValueError(f"X and y have different lengths: {x.size} != {yv.size}")
    return x, yv


def check_epsilon(epsilon):
    """Validate a miscoverage level, strictly inside (0, 1)."""
    eps = float(epsilon)
    if not 0.0 < eps < 1.0:
        raise ValueError(f"epsilon must lie strictly between 0 and 1, got {epsilon}")
    return eps
