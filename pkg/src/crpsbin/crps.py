"""Scalar CRPS kernels for finite-atom empirical CDFs.

The continuous ranked probability score of an m-atom empirical CDF at an
outcome y has the closed form

    CRPS = (1/m) * sum_i |y_i - y|  -  W / m**2,

where ``W = sum_{l<r} |y_l - y_r|`` is the pairwise dispersion of the atoms.
Everything in this module reduces to W and the per-atom absolute-deviation
sums ``d_k = sum_{l != k} |y_l - y_k|``, which sort-and-prefix-sum tricks
deliver in O(m log m).
"""

from dataclasses import dataclass

import numpy as np

from ._validation import as_finite_1d

__all__ = [
    "DispersionStats",
    "crps_ecdf",
    "dispersion",
    "loo_crps_obs",
    "bin_cost",
    "cramer_distance",
]


@dataclass(frozen=True)
class DispersionStats:
    """Pairwise-dispersion summary of a response sample.

    Attributes
    ----------
    m : int
        Sample size.
    w : float
        Sum of |y_l - y_r| over unordered pairs l < r.
    d : numpy.ndarray
        Per-element sums d_k = sum_{l != k} |y_l - y_k|, in input order.
        These satisfy sum_k d_k = 2 * w.
    """

    m: int
    w: float
    d: np.ndarray


def _abs_dev_sums(sorted_vals):
    """d_k for an ascending array, via prefix sums. Returns (d, w)."""
    m = sorted_vals.size
    prefix = np.concatenate(([0.0], np.cumsum(sorted_vals)))
    idx = np.arange(m)
    # sum over smaller-or-equal-rank values + sum over larger-rank values
    d = (idx * sorted_vals - prefix[:-1]) + (prefix[-1] - prefix[1:] - (m - 1 - idx) * sorted_vals)
    w = 0.5 * float(np.sum(d))
    return d, w


def dispersion(ys):
    """Compute :class:`DispersionStats` for a sample (O(m log m)).

    Works for m >= 1; a singleton has w = 0 and d = [0].
    """
    vals = as_finite_1d(ys, name="ys")
    order = np.argsort(vals, kind="stable")
    d_sorted, w = _abs_dev_sums(vals[order])
    d = np.empty_like(d_sorted)
    d[order] = d_sorted
    return DispersionStats(m=vals.size, w=w, d=d)


def crps_ecdf(atoms, y):
    """CRPS of the empirical CDF with the given atoms, at outcome y.

    Nonnegative; zero exactly when every atom equals y.
    """
    vals = as_finite_1d(atoms, name="atoms")
    y = float(y)
    m = vals.size
    _, w = _abs_dev_sums(np.sort(vals))
    return float(np.abs(vals - y).sum()) / m - w / (m * m)


def crps_ecdf_many(sorted_atoms, prefix, w, ys):
    """Vectorized CRPS of one ECDF at many outcomes.

    Fast path shared by model selection and coverage evaluation:
    ``sorted_atoms`` ascending, ``prefix`` its 0-prefixed cumulative sum,
    ``w`` its pairwise dispersion. Returns an array aligned with ``ys``.
    """
    m = sorted_atoms.size
    ys = np.asarray(ys, dtype=np.float64)
    r = np.searchsorted(sorted_atoms, ys, side="right")
    total = prefix[-1]
    abs_sum = ys * r - prefix[r] + (total - prefix[r]) - ys * (m - r)
    return abs_sum / m - w / (m * m)


def loo_crps_obs(stats, k):
    """CRPS of observation k against the ECDF of its m-1 companions.

    Uses the identity d_k/(m-1) - (D - 2 d_k) / (2 (m-1)^2) with D = 2w.
    Requires m >= 2.
    """
    if stats.m < 2:
        raise ValueError(f"leave-one-out needs at least 2 observations, got m={stats.m}")
    dk = float(stats.d[k])
    mm1 = stats.m - 1
    big_d = 2.0 * stats.w
    return dk / mm1 - (big_d - 2.0 * dk) / (2.0 * mm1 * mm1)


def bin_cost(m, w):
    """Total leave-one-out CRPS of a size-m bin with pairwise dispersion w.

    Equals m * w / (m-1)^2. A singleton bin has no leave-one-out
    distribution, so m == 1 yields +inf by convention.
    """
    if m < 1:
        raise ValueError(f"bin size must be positive, got {m}")
    if w < 0:
        raise ValueError(f"pairwise dispersion cannot be negative, got {w}")
    if m == 1:
        return float("inf")
    return m * w / float((m - 1) * (m - 1))


def cramer_distance(f_atoms, g_atoms):
    """Integrated squared difference between two empirical CDFs.

    Computed exactly by sweeping the merged atom breakpoints (both CDFs are
    step functions, so the integrand is constant between breakpoints).
    When ``g_atoms`` is a single value y this equals ``crps_ecdf(f_atoms, y)``.
    """
    f = np.sort(as_finite_1d(f_atoms, name="f_atoms"))
    g = np.sort(as_finite_1d(g_atoms, name="g_atoms"))
    grid = np.unique(np.concatenate([f, g]))
    if grid.size == 1:
        return 0.0
    ff = np.searchsorted(f, grid[:-1], side="right") / f.size
    gg = np.searchsorted(g, grid[:-1], side="right") / g.size
    return float(np.sum((ff - gg) ** 2 * np.diff(grid)))
