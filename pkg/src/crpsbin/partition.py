"""Exact optimal K-partition over contiguous bins by dynamic programming.

States are (bin count k, right endpoint j); the additive window cost gives
the problem optimal substructure, so the DP is exact in O(n^2 K). A
brute-force enumerator over all feasible boundary placements serves as the
oracle at small n. Both use the same deterministic tie-break: among optimal
partitions, the smallest last boundary wins, applied recursively leftward.
"""

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from . import _kernels

__all__ = [
    "Partition",
    "InfeasiblePartitionError",
    "optimal_partition",
    "dp_curve",
    "brute_force_partition",
    "brute_force_optima",
    "partition_cost",
    "feasible_boundaries",
    "tie_safe_mask",
]


class InfeasiblePartitionError(ValueError):
    """No valid placement exists for the requested bin count."""


@dataclass(frozen=True)
class Partition:
    """Bin boundaries 0 = b_0 < b_1 < ... < b_K = n over sorted positions.

    Bin k covers the half-open slice [b_{k-1}, b_k) of the sorted data.
    """

    boundaries: tuple
    total_cost: float

    @property
    def k(self):
        return len(self.boundaries) - 1

    @property
    def n(self):
        return self.boundaries[-1]

    def bin_slices(self):
        """Half-open (start, stop) pairs, one per bin."""
        b = self.boundaries
        return [(b[i], b[i + 1]) for i in range(self.k)]

    def bin_sizes(self):
        return [stop - start for start, stop in self.bin_slices()]


def tie_safe_mask(x_sorted):
    """Interior-boundary mask that never separates tied covariate values.

    A boundary at position b sits between sorted observations b-1 and b;
    it is allowed only where those two x values differ, so the covariate
    midpoint defining the bin edge is never degenerate.
    """
    x = np.asarray(x_sorted, dtype=np.float64)
    n = x.size
    mask = np.ones(n + 1, dtype=np.uint8)
    mask[1:n] = (np.diff(x) > 0).astype(np.uint8)
    return mask


def _allowed_array(n, allowed):
    """Normalize the interior-boundary mask to uint8 of length n+1.

    ``allowed[b]`` says a boundary may sit at position b (between sorted
    observations b-1 and b, 0-based). Endpoints 0 and n are always legal.
    """
    if allowed is None:
        arr = np.ones(n + 1, dtype=np.uint8)
    else:
        arr = np.asarray(allowed, dtype=np.uint8)
        if arr.shape != (n + 1,):
            raise ValueError(f"allowed mask must have length n+1={n + 1}")
        arr = arr.copy()
    arr[0] = 1
    arr[n] = 1
    return arr


def _check_k(cm, k, m_min):
    if k < 1:
        raise ValueError(f"bin count must be at least 1, got {k}")
    if m_min < 1:
        raise ValueError(f"minimum bin size must be at least 1, got {m_min}")
    if k * m_min > cm.n:
        raise InfeasiblePartitionError(
            f"cannot place {k} bins of size >= {m_min} over n={cm.n} observations"
        )


def _run_dp(cm, k_max, m_min, allowed):
    n = cm.n
    dp = np.empty((k_max + 1, n + 1), dtype=np.float64)
    split = np.empty((k_max + 1, n + 1), dtype=np.int32)
    totals = np.empty(k_max + 1, dtype=np.float64)
    _kernels.dp_fill(cm.costs, n, k_max, m_min, _allowed_array(n, allowed), dp, split, totals)
    return dp, split, totals


def _backtrack(split, k, n):
    bounds = [0] * (k + 1)
    bounds[k] = n
    j = n
    for layer in range(k, 0, -1):
        j = int(split[layer, j])
        if j < 0:
            return None
        bounds[layer - 1] = j
    return tuple(bounds)


def optimal_partition(cm, k, m_min=2, allowed=None):
    """Globally optimal K-partition with bins of at least m_min observations.

    Ties keep the smallest split index at every DP cell (strict '<' during
    the candidate scan), which backtracks to the recursively smallest
    boundary tuple from the right.
    """
    _check_k(cm, k, m_min)
    _, split, totals = _run_dp(cm, k, m_min, allowed)
    total = float(totals[k])
    if not np.isfinite(total):
        raise InfeasiblePartitionError(
            f"no feasible {k}-partition (m_min={m_min}, boundary constraints) for n={cm.n}"
        )
    bounds = _backtrack(split, k, cm.n)
    return Partition(boundaries=bounds, total_cost=total)


def dp_curve(cm, k_max, m_min=2, allowed=None):
    """DP optima for every bin count 1..k_max in one pass.

    Returns (totals, partitions): totals[k-1] is the optimal cost at k bins
    (+inf when infeasible) and partitions[k-1] the matching
    :class:`Partition` or None.
    """
    if k_max < 1:
        raise ValueError(f"k_max must be at least 1, got {k_max}")
    _, split, totals = _run_dp(cm, k_max, m_min, allowed)
    parts = []
    for k in range(1, k_max + 1):
        if np.isfinite(totals[k]):
            parts.append(Partition(boundaries=_backtrack(split, k, cm.n), total_cost=float(totals[k])))
        else:
            parts.append(None)
    return totals[1:].copy(), parts


def feasible_boundaries(n, k, m_min=2, allowed=None):
    """Yield every boundary tuple honoring the size floor and the mask."""
    mask = _allowed_array(n, allowed)
    interior = [b for b in range(1, n) if mask[b]]
    if k == 1:
        if n >= m_min:
            yield (0, n)
        return
    for cuts in combinations(interior, k - 1):
        bounds = (0, *cuts, n)
        if all(bounds[t + 1] - bounds[t] >= m_min for t in range(k)):
            yield bounds


def brute_force_partition(cm, k, m_min=2, allowed=None, n_limit=20):
    """Exhaustive-search oracle over all feasible boundary placements.

    Guarded to small n. Applies the same tie-break as the DP: among
    cost-minimal partitions, the lexicographically smallest boundary tuple
    read from the right.
    """
    if cm.n > n_limit:
        raise ValueError(f"brute force is guarded to n <= {n_limit}, got n={cm.n}")
    _check_k(cm, k, m_min)
    best = None
    best_key = None
    found = False
    for bounds in feasible_boundaries(cm.n, k, m_min, allowed):
        cost = 0.0
        for start, stop in zip(bounds[:-1], bounds[1:]):
            cost += cm.window_cost(start, stop)
        key = (cost, tuple(reversed(bounds)))
        if best_key is None or key < best_key:
            best_key = key
            best = Partition(boundaries=bounds, total_cost=cost)
            found = True
    if not found or not np.isfinite(best.total_cost):
        raise InfeasiblePartitionError(
            f"no feasible {k}-partition (m_min={m_min}) for n={cm.n}"
        )
    return best


def brute_force_optima(cm, k, m_min=2, allowed=None, rel_tol=1e-9, n_limit=20):
    """All boundary tuples whose cost is within rel_tol of the optimum.

    Lets tests certify whether the optimum is unique before comparing
    boundaries against the DP.
    """
    if cm.n > n_limit:
        raise ValueError(f"brute force is guarded to n <= {n_limit}, got n={cm.n}")
    _check_k(cm, k, m_min)
    scored = []
    for bounds in feasible_boundaries(cm.n, k, m_min, allowed):
        cost = 0.0
        for start, stop in zip(bounds[:-1], bounds[1:]):
            cost += cm.window_cost(start, stop)
        if np.isfinite(cost):
            scored.append((cost, bounds))
    if not scored:
        raise InfeasiblePartitionError(
            f"no feasible {k}-partition (m_min={m_min}) for n={cm.n}"
        )
    best = min(cost for cost, _ in scored)
    slack = rel_tol * max(1.0, abs(best))
    return [bounds for cost, bounds in sorted(scored) if cost <= best + slack]


def partition_cost(cm, partition, m_min=2):
    """Recompute a partition's total cost from the table, validating it."""
    bounds = partition.boundaries
    if bounds[0] != 0 or bounds[-1] != cm.n:
        raise ValueError(f"boundaries must run from 0 to n={cm.n}, got {bounds}")
    if any(b2 <= b1 for b1, b2 in zip(bounds[:-1], bounds[1:])):
        raise ValueError(f"boundaries must be strictly increasing, got {bounds}")
    if any(b2 - b1 < m_min for b1, b2 in zip(bounds[:-1], bounds[1:])):
        raise ValueError(f"every bin needs at least {m_min} observations, got {bounds}")
    total = 0.0
    for start, stop in zip(bounds[:-1], bounds[1:]):
        total += cm.window_cost(start, stop)
    return total
