"""Dual Fenwick (binary indexed) trees over rank-compressed values.

One tree accumulates counts, the other value sums, so a single O(log U)
pass answers the three queries the cost precompute needs after each
insertion: the rank of the new value, the sum of values at or below it,
and the sum of values above it.

This is the instrumented reference implementation (it counts array-cell
touches so tests can pin the O(log U) bound, and it accepts any ordered
numeric type, including ``fractions.Fraction`` for exact arithmetic).
The production sweep in :mod:`crpsbin.cost_matrix` runs the same logic
through a compiled kernel.
"""

from bisect import bisect_left

__all__ = ["RankIndex", "DualFenwick", "build_index"]


class RankIndex:
    """Maps values to 1-based ranks among the distinct values of a universe."""

    def __init__(self, values):
        vals = sorted(set(values))
        if not vals:
            raise ValueError("cannot build a rank index from an empty sequence")
        self.sorted_uniques = vals
        self.size = len(vals)

    def rank_of(self, value):
        """1-based rank of an indexed value; raises KeyError if absent."""
        pos = bisect_left(self.sorted_uniques, value)
        if pos == self.size or self.sorted_uniques[pos] != value:
            raise KeyError(f"value {value!r} is not in the rank index")
        return pos + 1


def build_index(ys):
    """Rank-compress a value universe (sort + dedupe)."""
    return RankIndex(ys)


class DualFenwick:
    """Paired count/sum Fenwick trees over a fixed :class:`RankIndex`.

    Single-writer; distinct instances are independent. ``cell_touches``
    counts array-cell reads+writes across both trees, for complexity tests.
    """

    def __init__(self, index):
        self.index = index
        u = index.size
        self._cnt = [0] * (u + 1)
        self._sum = [0] * (u + 1)
        self.total_count = 0
        self.total_sum = 0
        self.cell_touches = 0

    def insert(self, value):
        """Add one occurrence of an indexed value. O(log U)."""
        u = self.index.size
        k = self.index.rank_of(value)
        touches = 0
        while k <= u:
            self._cnt[k] += 1
            self._sum[k] += value
            touches += 2
            k += k & (-k)
        self.total_count += 1
        self.total_sum += value
        self.cell_touches += touches

    def rank_and_sums(self, value):
        """Return (r, s_le, s_gt) for an indexed query value.

        r is the number of inserted values <= value, s_le their sum, and
        s_gt the sum of inserted values above it. O(log U).
        """
        k = self.index.rank_of(value)
        r = 0
        s_le = 0
        touches = 0
        while k > 0:
            r += self._cnt[k]
            s_le += self._sum[k]
            touches += 2
            k -= k & (-k)
        self.cell_touches += touches
        return r, s_le, self.total_sum - s_le
