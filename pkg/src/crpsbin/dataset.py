"""Datasets: loading, sorting, splitting, and synthetic generators.

All randomness in the package flows through ``numpy.random.default_rng``
(the PCG64 generator), seeded explicitly. Same seed, same draws.
"""

import csv
from dataclasses import dataclass
from importlib import resources

import numpy as np

from ._validation import check_xy

__all__ = [
    "SortedDataset",
    "SplitPair",
    "load_csv",
    "alternating_split",
    "gen_heteroscedastic",
    "gen_bimodal",
    "bundled_path",
]

_BUNDLED = {
    "faithful": ("faithful.csv", "waiting", "eruptions"),
    "mcycle": ("mcycle.csv", "times", "accel"),
}


@dataclass(frozen=True)
class SortedDataset:
    """Covariate-sorted observation pairs.

    ``x`` is non-decreasing and both arrays are finite, aligned, and
    read-only after construction, so instances are safe to share.
    """

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x, y = check_xy(self.x, self.y)
        if x.size < 2:
            raise ValueError(f"dataset needs at least 2 observations, got {x.size}")
        if np.any(np.diff(x) < 0):
            raise ValueError("x values are not sorted; use SortedDataset.from_unsorted")
        x.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @classmethod
    def from_unsorted(cls, x, y):
        """Build from unordered pairs via a stable sort on x (ties keep input order)."""
        xv, yv = check_xy(x, y)
        order = np.argsort(xv, kind="stable")
        return cls(xv[order], yv[order])

    @property
    def n(self):
        return self.x.size

    def __len__(self):
        return self.x.size

    def take(self, indices):
        """Subset by ascending positional indices (keeps x-order)."""
        idx = np.asarray(indices, dtype=np.intp)
        return SortedDataset(self.x[idx], self.y[idx])


@dataclass(frozen=True)
class SplitPair:
    """Alternating train/test halves of a sorted dataset."""

    train: SortedDataset
    test: SortedDataset


def load_csv(path, x_col, y_col):
    """Load a two-column dataset from CSV, sorted by the covariate.

    Expects comma separation, one header row, '.' decimals, UTF-8. The sort
    is stable: rows with tied x keep their file order.

    Parameters
    ----------
    path : str or pathlib.Path
        CSV file location.
    x_col, y_col : str
        Header names of the covariate and response columns.

    Raises
    ------
    FileNotFoundError
        If ``path`` does not exist.
    ValueError
        On a missing column, an unparseable cell (the data row number is
        reported, 1-based), or fewer than 2 data rows.
    """
    xs, ys = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in (x_col, y_col):
            if col not in header:
                raise ValueError(
                    f"column {col!r} not found in {path} (columns: {', '.join(header)})"
                )
        for rownum, row in enumerate(reader, start=1):
            try:
                xv = float(row[x_col])
                yv = float(row[y_col])
            except (TypeError, ValueError):
                raise ValueError(
                    f"row {rownum} of {path}: could not parse "
                    f"({x_col}={row.get(x_col)!r}, {y_col}={row.get(y_col)!r})"
                ) from None
            if not (np.isfinite(xv) and np.isfinite(yv)):
                raise ValueError(f"row {rownum} of {path}: non-finite value")
            xs.append(xv)
            ys.append(yv)
    if len(xs) < 2:
        raise ValueError(f"{path}: needs at least 2 data rows, got {len(xs)}")
    return SortedDataset.from_unsorted(np.array(xs), np.array(ys))


def bundled_path(name):
    """Filesystem path of a bundled dataset ('faithful' or 'mcycle')."""
    if name not in _BUNDLED:
        raise ValueError(f"no bundled dataset named {name!r}; have {sorted(_BUNDLED)}")
    fname = _BUNDLED[name][0]
    return str(resources.files("crpsbin").joinpath("data", fname))


def load_bundled(name):
    """Load a bundled dataset by name with its canonical column mapping."""
    path = bundled_path(name)
    _, x_col, y_col = _BUNDLED[name]
    return load_csv(path, x_col, y_col)


def alternating_split(ds):
    """Split into train (sorted ranks 1, 3, 5, ...) and test (ranks 2, 4, ...).

    Both halves preserve x-order; together they partition the input.
    Requires n >= 4.
    """
    if ds.n < 4:
        raise ValueError(f"dataset too small to split: n={ds.n} < 4")
    return SplitPair(
        train=SortedDataset(ds.x[0::2], ds.y[0::2]),
        test=SortedDataset(ds.x[1::2], ds.y[1::2]),
    )


def gen_heteroscedastic(n, seed):
    """Synthetic sample with variance growing in x.

    X ~ Uniform(0, 3); Y | X = x ~ Normal(3x, (1 + x)^2). The output is
    sorted by x. Deterministic in (n, seed); draw order is fixed (all x
    first, then all noise).
    """
    if n < 2:
        raise ValueError(f"n must be at least 2, got {n}")
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.0, 3.0, size=n)
    y = 3.0 * x + (1.0 + x) * rng.standard_normal(n)
    return SortedDataset.from_unsorted(x, y)


def gen_bimodal(m, seed):
    """I.i.d. draws from 0.5*N(-3, 0.5^2) + 0.5*N(3, 0.5^2).

    Returns a plain float array (not x-paired); deterministic in (m, seed).
    """
    if m < 1:
        raise ValueError(f"m must be at least 1, got {m}")
    rng = np.random.default_rng(seed)
    centers = np.where(rng.random(m) < 0.5, -3.0, 3.0)
    return centers + 0.5 * rng.standard_normal(m)
