"""Conformal machinery on top of a bin's response sample.

For a bin holding m training responses and a candidate response y_h, every
element of the augmented multiset {y_1, ..., y_m, y_h} is scored by the
same leave-one-out rule (CRPS against the ECDF of the other m values, or
the nearest-neighbour distance within the augmented set). The conformal
p-value is the fraction of scores at least as large as the candidate's,
and the prediction set collects the candidates that survive at level
epsilon. Scores being symmetric functions of the augmented set is what
makes the p-value super-uniform under exchangeability.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import as_finite_1d, check_epsilon
from .crps import DispersionStats, crps_ecdf_many, dispersion

__all__ = [
    "BinReference",
    "SearchConfig",
    "PredictionSet",
    "VennBand",
    "crps_score",
    "knn_score",
    "p_value",
    "prediction_set",
    "venn_band",
    "augmented_cost_identity",
    "x_cut_points",
    "locate_bins",
]

_CHUNK_ELEMS = 4_000_000  # cap on candidate-by-atom scratch matrices


@dataclass(frozen=True)
class BinReference:
    """A bin's sorted response sample with cached dispersion summaries."""

    atoms: np.ndarray
    prefix: np.ndarray
    stats: DispersionStats
    nn: np.ndarray

    @classmethod
    def from_values(cls, values):
        atoms = np.sort(as_finite_1d(values, name="bin values"))
        atoms.flags.writeable = False
        prefix = np.concatenate(([0.0], np.cumsum(atoms)))
        stats = dispersion(atoms)
        nn = _nearest_neighbor_dists(atoms)
        return cls(atoms=atoms, prefix=prefix, stats=stats, nn=nn)

    @property
    def m(self):
        return self.atoms.size


def _nearest_neighbor_dists(sorted_vals):
    """Distance from each value to its nearest other value (0 under ties)."""
    m = sorted_vals.size
    if m == 1:
        return np.array([np.inf])
    gaps = np.diff(sorted_vals)
    left = np.concatenate(([np.inf], gaps))
    right = np.concatenate((gaps, [np.inf]))
    return np.minimum(left, right)


def _as_bin(bin_or_values):
    if isinstance(bin_or_values, BinReference):
        return bin_or_values
    return BinReference.from_values(bin_or_values)


def crps_score(bin_ref, y_h):
    """Nonconformity of a candidate: CRPS of the bin ECDF at y_h.

    Convex and piecewise linear in y_h with breakpoints at the atoms,
    minimized at the bin's empirical median.
    """
    ref = _as_bin(bin_ref)
    if ref.m < 2:
        raise ValueError(f"bin too small for conformal scoring: m={ref.m} < 2")
    return float(crps_ecdf_many(ref.atoms, ref.prefix, ref.stats.w, np.array([float(y_h)]))[0])


def knn_score(bin_ref, y_h, k=1):
    """k-th smallest |y_h - y_i| over the bin's atoms."""
    ref = _as_bin(bin_ref)
    if not 1 <= k <= ref.m:
        raise ValueError(f"k must be in [1, {ref.m}], got {k}")
    dists = np.abs(ref.atoms - float(y_h))
    return float(np.partition(dists, k - 1)[k - 1])


def _crps_pvalues(ref, ys):
    """Conformal p-values under the CRPS score, vectorized over candidates.

    Scoring the j-th element of the augmented multiset (size m+1) against
    the ECDF of the other m reduces to thresholding the augmented
    absolute-deviation sums d_j + |a_j - y|, so no per-candidate sort is
    needed.
    """
    m = ref.m
    atoms, prefix, d, w = ref.atoms, ref.prefix, ref.stats.d, ref.stats.w
    ys = np.asarray(ys, dtype=np.float64)
    r = np.searchsorted(atoms, ys, side="right")
    total = prefix[-1]
    s = ys * r - prefix[r] + (total - prefix[r]) - ys * (m - r)
    alpha_test = s / m - w / (m * m)
    d_aug_total = 2.0 * w + 2.0 * s
    # alpha_j >= alpha_test  <=>  d_j + |a_j - y| >= tau(y)
    tau = (alpha_test + d_aug_total / (2.0 * m * m)) * (m * m) / (m + 1.0)
    counts = np.empty(ys.size, dtype=np.int64)
    step = max(1, _CHUNK_ELEMS // max(m, 1))
    for lo in range(0, ys.size, step):
        hi = min(lo + step, ys.size)
        d_aug = d[:, None] + np.abs(atoms[:, None] - ys[None, lo:hi])
        counts[lo:hi] = np.sum(d_aug >= tau[None, lo:hi], axis=0)
    return (counts + 1.0) / (m + 1.0)


def _knn_pvalues(ref, ys):
    """Conformal p-values under the 1-NN score, vectorized over candidates.

    Within the augmented set, atom j scores min(nn_j, |a_j - y|) and the
    candidate scores its distance to the nearest atom.
    """
    m = ref.m
    atoms, nn = ref.atoms, ref.nn
    ys = np.asarray(ys, dtype=np.float64)
    idx = np.searchsorted(atoms, ys)
    left = np.abs(ys - atoms[np.maximum(idx - 1, 0)])
    right = np.abs(atoms[np.minimum(idx, m - 1)] - ys)
    alpha_test = np.minimum(left, right)
    counts = np.empty(ys.size, dtype=np.int64)
    step = max(1, _CHUNK_ELEMS // max(m, 1))
    for lo in range(0, ys.size, step):
        hi = min(lo + step, ys.size)
        cand = np.abs(atoms[:, None] - ys[None, lo:hi])
        alpha_train = np.minimum(nn[:, None], cand)
        counts[lo:hi] = np.sum(alpha_train >= alpha_test[None, lo:hi], axis=0)
    return (counts + 1.0) / (m + 1.0)


def _pvalues(ref, ys, score, knn_k=1):
    if score == "crps":
        return _crps_pvalues(ref, ys)
    if score == "knn":
        if knn_k != 1:
            raise ValueError(
                "the leave-one-out k-NN score is defined for k=1 only; "
                f"got k={knn_k} (general k is available through knn_score)"
            )
        return _knn_pvalues(ref, ys)
    raise ValueError(f"unknown score kind {score!r}; use 'crps' or 'knn'")


def p_value(bin_ref, y_h, score="crps", knn_k=1):
    """Conformal p-value of a candidate response against a bin.

    Every element j of the augmented multiset {y_1..y_m, y_h} receives the
    leave-one-out score of the chosen kind; the p-value is

        p(y_h) = #{j : score_j >= score of y_h} / (m + 1),

    with non-strict comparisons (ties count toward the numerator) and the
    candidate always counting itself, so p >= 1/(m+1). Requires m >= 2.
    """
    ref = _as_bin(bin_ref)
    if ref.m < 2:
        raise ValueError(f"bin too small for a conformal p-value: m={ref.m} < 2")
    return float(_pvalues(ref, np.array([float(y_h)]), score, knn_k)[0])


@dataclass(frozen=True)
class SearchConfig:
    """Candidate-grid settings for prediction-set construction."""

    grid_points: int = 4096
    range_mult: float = 1.0
    tol: float | None = None
    max_expand: int = 60


@dataclass(frozen=True)
class PredictionSet:
    """Disjoint closed intervals of candidate responses with p > epsilon.

    ``whole_line`` marks the granularity-floor case where no candidate can
    be rejected at the requested level; the interval list is then empty and
    the measure infinite.
    """

    intervals: tuple
    epsilon: float
    score: str
    knn_k: int = 1
    whole_line: bool = False
    grid_info: dict = field(default_factory=dict)

    @property
    def n_intervals(self):
        return len(self.intervals)

    @property
    def measure(self):
        """Total Lebesgue measure of the interval list."""
        if self.whole_line:
            return math.inf
        return float(sum(hi - lo for lo, hi in self.intervals))

    def contains(self, y):
        if self.whole_line:
            return True
        y = float(y)
        return any(lo <= y <= hi for lo, hi in self.intervals)


def _refine_edge(ref, score, knn_k, epsilon, a, b, tol, left_edge):
    """Bisect the p > epsilon crossing inside (a, b); returns the midpoint.

    For a left edge, a is outside the set and b inside; mirrored otherwise.
    """
    while b - a > tol:
        mid = 0.5 * (a + b)
        inside = _pvalues(ref, np.array([mid]), score, knn_k)[0] > epsilon
        if inside == left_edge:
            b = mid
        else:
            a = mid
    return 0.5 * (a + b)


def prediction_set(bin_ref, epsilon, score="crps", knn_k=1, search=None):
    """Candidate responses whose conformal p-value exceeds epsilon.

    Evaluates p on a grid spanning the atom range padded by
    ``range_mult`` times its width on each side (extended outward until the
    edges are rejected), augmented with the atoms and their midpoints, then
    refines every threshold crossing by bisection to ``tol``. Contiguous
    super-threshold runs merge into closed intervals.

    When m + 1 < 1/epsilon no candidate can ever be rejected and the result
    is flagged ``whole_line`` instead of carrying fake infinite endpoints.
    """
    ref = _as_bin(bin_ref)
    eps = check_epsilon(epsilon)
    if ref.m < 2:
        raise ValueError(f"bin too small for a prediction set: m={ref.m} < 2")
    cfg = search or SearchConfig()
    atoms = ref.atoms
    lo_atom, hi_atom = float(atoms[0]), float(atoms[-1])
    span = hi_atom - lo_atom
    span_eff = span if span > 0 else max(1.0, abs(hi_atom))
    grid_info = {
        "grid_points": cfg.grid_points,
        "range_mult": cfg.range_mult,
        "lo": lo_atom - cfg.range_mult * span_eff,
        "hi": hi_atom + cfg.range_mult * span_eff,
    }

    if (ref.m + 1) * eps < 1.0:
        return PredictionSet(
            intervals=(), epsilon=eps, score=score, knn_k=knn_k,
            whole_line=True, grid_info=grid_info,
        )

    lo = lo_atom - cfg.range_mult * span_eff
    hi = hi_atom + cfg.range_mult * span_eff
    pad = span_eff
    for _ in range(cfg.max_expand):
        if _pvalues(ref, np.array([lo]), score, knn_k)[0] <= eps:
            break
        pad *= 2.0
        lo -= pad
    else:
        raise RuntimeError("prediction-set search did not find a rejected left edge")
    pad = span_eff
    for _ in range(cfg.max_expand):
        if _pvalues(ref, np.array([hi]), score, knn_k)[0] <= eps:
            break
        pad *= 2.0
        hi += pad
    else:
        raise RuntimeError("prediction-set search did not find a rejected right edge")

    mids = 0.5 * (atoms[:-1] + atoms[1:]) if ref.m > 1 else np.empty(0)
    grid = np.unique(np.concatenate([
        np.linspace(lo, hi, cfg.grid_points), atoms, mids,
    ]))
    inset = _pvalues(ref, grid, score, knn_k) > eps
    tol = cfg.tol if cfg.tol is not None else 1e-9 * span_eff
    grid_info.update({"lo": lo, "hi": hi, "tol": tol})

    if not inset.any():
        return PredictionSet(
            intervals=(), epsilon=eps, score=score, knn_k=knn_k,
            whole_line=False, grid_info=grid_info,
        )

    flags = np.concatenate(([False], inset, [False])).astype(np.int8)
    starts = np.flatnonzero(np.diff(flags) == 1)
    stops = np.flatnonzero(np.diff(flags) == -1) - 1
    intervals = []
    for gi, gj in zip(starts, stops):
        left = _refine_edge(ref, score, knn_k, eps, grid[gi - 1], grid[gi], tol, left_edge=True)
        right = _refine_edge(ref, score, knn_k, eps, grid[gj], grid[gj + 1], tol, left_edge=False)
        intervals.append((float(left), float(right)))
    return PredictionSet(
        intervals=tuple(intervals), epsilon=eps, score=score, knn_k=knn_k,
        whole_line=False, grid_info=grid_info,
    )


@dataclass(frozen=True)
class VennBand:
    """Constant-width band of augmented ECDFs over a bin's atoms.

    Adding one hypothetical observation to an m-atom ECDF moves it between
    lower(t) = count(atoms <= t)/(m+1) and upper(t) = lower(t) + 1/(m+1),
    whatever the hypothetical label is.
    """

    atoms: np.ndarray

    @property
    def m(self):
        return self.atoms.size

    @property
    def width(self):
        return 1.0 / (self.m + 1)

    def lower(self, t):
        t = np.asarray(t, dtype=np.float64)
        return np.searchsorted(self.atoms, t, side="right") / (self.m + 1)

    def upper(self, t):
        return self.lower(t) + self.width


def venn_band(values):
    """Venn prediction band of a bin (width exactly 1/(m+1))."""
    atoms = np.sort(as_finite_1d(values, name="bin values"))
    atoms.flags.writeable = False
    return VennBand(atoms=atoms)


def augmented_cost_identity(bin_ref, y_h):
    """Both sides of the augmented-set score-sum identity, for testing.

    The m+1 leave-one-out CRPS scores of the augmented multiset sum to its
    total leave-one-out cost (m+1)/m^2 * W(augmented). Returns (lhs, rhs).
    """
    ref = _as_bin(bin_ref)
    if ref.m < 2:
        raise ValueError(f"bin too small: m={ref.m} < 2")
    augmented = np.concatenate([ref.atoms, [float(y_h)]])
    stats = dispersion(augmented)
    m = ref.m
    big_d = 2.0 * stats.w
    alphas = stats.d / m - (big_d - 2.0 * stats.d) / (2.0 * m * m)
    lhs = float(np.sum(alphas))
    rhs = (m + 1) / (m * m) * stats.w
    return lhs, rhs


def x_cut_points(x_sorted, boundaries):
    """Covariate-space cut points: midpoints across each interior boundary."""
    interior = boundaries[1:-1]
    x = np.asarray(x_sorted, dtype=np.float64)
    return np.array([0.5 * (x[b - 1] + x[b]) for b in interior])


def locate_bins(cuts, xs):
    """Bin index for each query covariate; values on a cut go to the left bin.

    Queries beyond the fitted range clamp to the first/last bin.
    """
    return np.searchsorted(np.asarray(cuts), np.asarray(xs, dtype=np.float64), side="left")
