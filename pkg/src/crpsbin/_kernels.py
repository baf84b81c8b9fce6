"""Compiled inner loops for the cost precompute and the partition DP.

Kernels release the GIL so the row sweep can be spread over a thread pool;
each call touches a disjoint slice of the output, so no locking is needed.
"""

import numpy as np
from numba import njit

__all__ = ["sweep_rows", "dp_fill"]


@njit(cache=True, nogil=True)
def sweep_rows(y, rank, u, rows, row_offsets, cost_out, w_out, keep_w):
    """Fill cost-matrix rows for the given left endpoints.

    For each left endpoint i, scan j = i..n-1 keeping dual Fenwick trees
    (counts and sums, indexed by rank) over the window values. Each
    insertion updates the window's pairwise dispersion w via

        delta = y_j * r - s_le + s_gt - y_j * (m - r)

    where r counts window values <= y_j and s_le/s_gt split their sum.
    Costs m*w/(m-1)^2 land in ``cost_out`` at ``row_offsets[t] + (j - i)``;
    the size-1 prefix gets +inf.
    """
    n = y.shape[0]
    cnt = np.zeros(u + 1, dtype=np.int64)
    sm = np.zeros(u + 1, dtype=np.float64)
    for t in range(rows.shape[0]):
        i0 = rows[t]
        base = row_offsets[t]
        cnt[:] = 0
        sm[:] = 0.0
        total = 0.0
        w = 0.0
        for j in range(i0, n):
            v = y[j]
            r0 = rank[j]
            k = r0
            while k <= u:
                cnt[k] += 1
                sm[k] += v
                k += k & (-k)
            total += v
            c_le = 0
            s_le = 0.0
            k = r0
            while k > 0:
                c_le += cnt[k]
                s_le += sm[k]
                k -= k & (-k)
            m = j - i0 + 1
            w += v * c_le - s_le + (total - s_le) - v * (m - c_le)
            pos = base + j - i0
            if keep_w:
                w_out[pos] = w
            if m >= 2:
                cost_out[pos] = m * w / ((m - 1.0) * (m - 1.0))
            else:
                cost_out[pos] = np.inf


@njit(cache=True, nogil=True)
def dp_fill(c_flat, n, k_max, m_min, allowed, dp, split, totals):
    """Segment-neighbourhood DP over a flat upper-triangular cost table.

    dp[k][j] = min over i of dp[k-1][i] + cost(i+1..j), scanning candidate
    split points i in ascending order with a strict '<' comparison, so ties
    keep the smallest i. Interior split points must be flagged in
    ``allowed``; bins are forced to hold at least ``m_min`` observations.

    ``c_flat`` holds cost(i+1..j) (1-based inclusive windows) at
    ``(i)*n - i*(i-1)//2 + (j-1-i)`` for 0-based start i, end j-1.
    Writes dp (k_max+1, n+1), split (k_max+1, n+1) and per-k optima
    ``totals[k] = dp[k][n]``.
    """
    inf = np.inf
    for k in range(k_max + 1):
        for j in range(n + 1):
            dp[k, j] = inf
            split[k, j] = -1
    dp[0, 0] = 0.0
    # layer 1: a single bin over 1..j
    for j in range(m_min, n + 1):
        dp[1, j] = c_flat[j - 1]
        split[1, j] = 0
    for k in range(2, k_max + 1):
        j_lo = k * m_min
        for j in range(j_lo, n + 1):
            best = inf
            arg = -1
            i_lo = (k - 1) * m_min
            i_hi = j - m_min
            for i in range(i_lo, i_hi + 1):
                if allowed[i] == 0:
                    continue
                prev = dp[k - 1, i]
                if prev == inf:
                    continue
                # cost of window (i+1..j) 1-based == rows i..j-1 0-based
                v = prev + c_flat[i * n - (i * (i - 1)) // 2 + (j - 1 - i)]
                if v < best:
                    best = v
                    arg = i
            dp[k, j] = best
            split[k, j] = arg
    for k in range(k_max + 1):
        totals[k] = dp[k, n]
