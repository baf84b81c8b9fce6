"""Precompute of leave-one-out CRPS costs for every contiguous window.

For observations sorted by covariate, the cost of the window spanning
sorted positions i..j (size m = j - i + 1) is m * W(i,j) / (m-1)^2 with
W(i,j) the pairwise dispersion of the window's responses. Sweeping j for
fixed i and maintaining dual Fenwick trees updates W in O(log n) per step,
giving the full table in O(n^2 log n) time and O(n^2) memory.
"""

import struct
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction

import numpy as np

from . import _kernels
from ._validation import as_finite_1d
from .crps import bin_cost
from .fenwick import DualFenwick, RankIndex

__all__ = ["CostMatrix", "CapacityError", "precompute", "naive_w", "check_quadrangle"]

_MAGIC = b"CRPSCM01"
DEFAULT_MEM_CAP = 2 * 1024**3


class CapacityError(MemoryError):
    """Requested table exceeds the configured memory cap."""


def _tri_len(n):
    return n * (n + 1) // 2


def _flat_index(n, i, j):
    """Flat upper-triangular position of 0-based window start i, end j (inclusive)."""
    return i * n - (i * (i - 1)) // 2 + (j - i)


class CostMatrix:
    """Upper-triangular table of window costs, flat row-major storage.

    ``window_cost(start, stop)`` uses 0-based half-open ranges over sorted
    positions; size-1 windows cost +inf. ``w`` optionally holds the matching
    pairwise dispersions for diagnostics.
    """

    def __init__(self, n, costs, w=None):
        if costs.shape != (_tri_len(n),):
            raise ValueError(f"flat cost table has wrong length for n={n}")
        self.n = n
        self.costs = costs
        self.w = w

    def window_cost(self, start, stop):
        """Cost of the window covering sorted positions [start, stop)."""
        self._check_window(start, stop)
        return float(self.costs[_flat_index(self.n, start, stop - 1)])

    def window_w(self, start, stop):
        """Pairwise dispersion of [start, stop); needs keep_w at precompute."""
        if self.w is None:
            raise ValueError("dispersion table not kept; precompute with keep_w=True")
        self._check_window(start, stop)
        return float(self.w[_flat_index(self.n, start, stop - 1)])

    def _check_window(self, start, stop):
        if not (0 <= start < stop <= self.n):
            raise IndexError(f"window [{start}, {stop}) out of range for n={self.n}")

    def to_square(self):
        """Dense (n, n) view with +inf below the diagonal, for tests."""
        sq = np.full((self.n, self.n), np.inf)
        for i in range(self.n):
            row = slice(_flat_index(self.n, i, i), _flat_index(self.n, i, self.n - 1) + 1)
            sq[i, i:] = self.costs[row]
        return sq

    def dump(self, path):
        """Write the binary dump format: magic 'CRPSCM01', u64 LE n, f64 LE triangle."""
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<Q", self.n))
            fh.write(self.costs.astype("<f8", copy=False).tobytes())

    @classmethod
    def load(cls, path):
        """Read a matrix written by :meth:`dump`."""
        with open(path, "rb") as fh:
            magic = fh.read(8)
            if magic != _MAGIC:
                raise ValueError(f"{path}: bad magic {magic!r}, expected {_MAGIC!r}")
            (n,) = struct.unpack("<Q", fh.read(8))
            data = np.frombuffer(fh.read(), dtype="<f8").astype(np.float64)
        return cls(int(n), data)


def _mem_guard(n, keep_w, mem_cap_bytes):
    per_entry = 8 * (2 if keep_w else 1)
    need = _tri_len(n) * per_entry
    if need > mem_cap_bytes:
        max_n = int((2 * mem_cap_bytes / per_entry) ** 0.5)
        raise CapacityError(
            f"cost table for n={n} needs {need / 1024**2:.0f} MiB, over the "
            f"{mem_cap_bytes / 1024**2:.0f} MiB cap (max n under this cap: ~{max_n}); "
            "raise the cap to proceed"
        )


def _balanced_row_chunks(n, n_chunks):
    """Split rows into chunks of near-equal total work (row i costs ~n-i)."""
    order = np.empty(n, dtype=np.int64)
    order[0::2] = np.arange((n + 1) // 2)
    order[1::2] = n - 1 - np.arange(n // 2)
    return np.array_split(order, n_chunks)


def precompute(ds, exact_mode=False, keep_w=False, threads=1, mem_cap_bytes=DEFAULT_MEM_CAP):
    """Build the full window-cost table for a sorted dataset.

    Parameters
    ----------
    ds : SortedDataset or array-like
        Sorted dataset, or directly the responses in covariate order.
    exact_mode : bool
        Run the sweep in exact rational arithmetic (slow; intended for
        ruling out float accumulation on ill-conditioned inputs, exact for
        any binary-float responses including integer-valued ones).
    keep_w : bool
        Also keep the per-window dispersion table for diagnostics.
    threads : int
        Worker threads for the row sweep; rows write disjoint slices.
    mem_cap_bytes : int
        Guard for the O(n^2) allocation; raises :class:`CapacityError`
        with the admissible n when exceeded.
    """
    y = np.asarray(getattr(ds, "y", ds), dtype=np.float64)
    y = as_finite_1d(y, name="y", min_len=2)
    n = y.size
    _mem_guard(n, keep_w, mem_cap_bytes)
    if exact_mode:
        return _precompute_exact(y, keep_w)

    uniques = np.unique(y)
    rank = (np.searchsorted(uniques, y) + 1).astype(np.int64)
    u = uniques.size
    costs = np.empty(_tri_len(n), dtype=np.float64)
    w_tab = np.empty_like(costs) if keep_w else np.empty(0, dtype=np.float64)
    all_offsets = np.concatenate(([0], np.cumsum(np.arange(n, 0, -1)))).astype(np.int64)

    threads = max(1, int(threads))
    if threads == 1:
        rows = np.arange(n, dtype=np.int64)
        _kernels.sweep_rows(y, rank, u, rows, all_offsets[rows], costs, w_tab, keep_w)
    else:
        chunks = _balanced_row_chunks(n, min(4 * threads, n))
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [
                pool.submit(
                    _kernels.sweep_rows, y, rank, u, ch, all_offsets[ch], costs, w_tab, keep_w
                )
                for ch in chunks
                if ch.size
            ]
            for fut in futures:
                fut.result()
    return CostMatrix(n, costs, w_tab if keep_w else None)


def _precompute_exact(y, keep_w):
    """Reference sweep in Fraction arithmetic through the instrumented trees."""
    n = y.size
    exact = [Fraction(v) for v in y]
    index = RankIndex(exact)
    costs = np.empty(_tri_len(n), dtype=np.float64)
    w_tab = np.empty_like(costs) if keep_w else None
    pos = 0
    for i in range(n):
        tree = DualFenwick(index)
        w = Fraction(0)
        for j in range(i, n):
            v = exact[j]
            tree.insert(v)
            r, s_le, s_gt = tree.rank_and_sums(v)
            m = j - i + 1
            w += v * r - s_le + s_gt - v * (m - r)
            if keep_w:
                w_tab[pos] = float(w)
            costs[pos] = bin_cost(m, float(w)) if m >= 2 else np.inf
            pos += 1
    return CostMatrix(n, costs, w_tab)


def naive_w(ys, start, stop):
    """Double-loop pairwise dispersion of positions [start, stop) (test oracle)."""
    vals = np.asarray(ys, dtype=np.float64)
    if not (0 <= start <= stop <= vals.size):
        raise IndexError(f"window [{start}, {stop}) out of range for n={vals.size}")
    window = vals[start:stop]
    total = 0.0
    for a in range(window.size):
        for b in range(a + 1, window.size):
            total += abs(window[a] - window[b])
    return total


def check_quadrangle(cm, max_reports=100, exhaustive_limit=60, samples=200_000, seed=0):
    """Probe the quadrangle inequality cost(a,c)+cost(b,d) <= cost(a,d)+cost(b,c).

    Whether the window cost satisfies it is an open question; this is a
    diagnostic only and nothing in the DP relies on it. Enumerates all
    1-based quadruples a <= b <= c <= d with finite entries when
    n <= exhaustive_limit, otherwise samples them. Violations beyond
    1e-9 * (largest finite cost) are reported as (a, b, c, d, gap) tuples,
    capped at ``max_reports``.
    """
    n = cm.n
    sq = cm.to_square()
    finite = sq[np.isfinite(sq)]
    tol = 1e-9 * (float(finite.max()) if finite.size else 1.0)
    violations = []

    def _gap(a, b, c, d):
        # 1-based windows -> 0-based square indices
        lhs = sq[a - 1, c - 1] + sq[b - 1, d - 1]
        rhs = sq[a - 1, d - 1] + sq[b - 1, c - 1]
        if np.isfinite(lhs) and np.isfinite(rhs):
            return lhs - rhs
        return -np.inf

    if n <= exhaustive_limit:
        for a in range(1, n + 1):
            for b in range(a, n + 1):
                for c in range(b, n + 1):
                    for d in range(c, n + 1):
                        gap = _gap(a, b, c, d)
                        if gap > tol:
                            violations.append((a, b, c, d, float(gap)))
                            if len(violations) >= max_reports:
                                return violations
    else:
        rng = np.random.default_rng(seed)
        quads = np.sort(rng.integers(1, n + 1, size=(samples, 4)), axis=1)
        for a, b, c, d in quads:
            gap = _gap(int(a), int(b), int(c), int(d))
            if gap > tol:
                violations.append((int(a), int(b), int(c), int(d), float(gap)))
                if len(violations) >= max_reports:
                    return violations
    return violations
