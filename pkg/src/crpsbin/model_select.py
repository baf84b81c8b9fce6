"""Cross-validated selection of the bin count.

The within-sample DP objective keeps improving as bins multiply (small
bins are cheap under the m/(m-1)^2 prefactor), so the bin count is chosen
on a held-out criterion instead: fit partitions on the odd-ranked half,
score the even-ranked half by its CRPS against the fitted bin ECDFs, and
take the argmin over K. The within-sample curve is still computed and
exported as a diagnostic.
"""

import csv
import json
from dataclasses import dataclass

import numpy as np

from .conformal import locate_bins, x_cut_points
from .cost_matrix import precompute
from .crps import crps_ecdf_many
from .dataset import alternating_split
from .partition import dp_curve, tie_safe_mask

__all__ = ["KCurve", "LooCurve", "test_crps", "select_k", "write_kcurve_csv"]


@dataclass(frozen=True)
class KCurve:
    """Held-out CRPS per candidate bin count, with the selected optimum."""

    ks: np.ndarray
    test_crps: np.ndarray
    feasible: np.ndarray
    k_star: int
    k_max: int


@dataclass(frozen=True)
class LooCurve:
    """Within-sample DP optima per bin count (diagnostic only)."""

    ks: np.ndarray
    dp_total: np.ndarray


def _bin_tables(train, partition):
    """Per-bin (sorted atoms, prefix, w) triples for fast CRPS evaluation."""
    tables = []
    for start, stop in partition.bin_slices():
        atoms = np.sort(train.y[start:stop])
        prefix = np.concatenate(([0.0], np.cumsum(atoms)))
        m = atoms.size
        idx = np.arange(m)
        d = (idx * atoms - prefix[:-1]) + (prefix[-1] - prefix[1:] - (m - 1 - idx) * atoms)
        tables.append((atoms, prefix, 0.5 * float(d.sum())))
    return tables


def _test_crps_values(train, test, partition):
    """Per-held-out-point CRPS against the containing train-bin ECDF."""
    cuts = x_cut_points(train.x, partition.boundaries)
    which = locate_bins(cuts, test.x)
    tables = _bin_tables(train, partition)
    values = np.empty(test.n)
    for b in range(partition.k):
        sel = which == b
        if not np.any(sel):
            continue
        atoms, prefix, w = tables[b]
        values[sel] = crps_ecdf_many(atoms, prefix, w, test.y[sel])
    return values


def test_crps(train, test, partition):
    """Mean CRPS of held-out points against their train-bin ECDFs.

    Each held-out covariate is assigned by the fitted covariate cuts
    (midpoints across bin borders), clamping to the first/last bin outside
    the fitted range.
    """
    if test.n < 1:
        raise ValueError("held-out half is empty")
    return float(_test_crps_values(train, test, partition).mean())


def select_k(ds, k_max_override=None, m_min=2, threads=1, tie_safe_boundaries=False,
             rule="argmin", mem_cap_bytes=None):
    """Pick the bin count by alternating-split held-out CRPS.

    Fits the DP per K on the odd-ranked half, scores the even-ranked half,
    and returns the held-out curve together with the full-data
    within-sample curve. K ranges over 1..K_max with K_max = floor(n/10)
    by default, additionally capped by what the training half can
    feasibly hold. Requires n >= 20.

    ``rule`` picks the optimum off the curve: "argmin" (default; exact
    ties broken toward smaller K) or "one_se" (smallest K whose score is
    within one standard error of the minimum, the usual parsimony
    convention; the SE is that of the mean per-point CRPS at the argmin).

    ``tie_safe_boundaries`` restricts DP split points to positions where
    adjacent x values differ, so no training tie group is ever divided;
    off by default (queries at a degenerate cut already resolve to the
    left bin, and the unconstrained optimum matches the reference results
    on the bundled datasets).
    """
    if ds.n < 20:
        raise ValueError(f"select_k needs n >= 20, got n={ds.n}")
    if rule not in ("argmin", "one_se"):
        raise ValueError(f"unknown selection rule {rule!r}; use 'argmin' or 'one_se'")
    pair = alternating_split(ds)
    train = pair.train

    k_max = k_max_override if k_max_override is not None else ds.n // 10
    if k_max < 1:
        raise ValueError(f"k_max must be at least 1, got {k_max}")
    train_mask = tie_safe_mask(train.x) if tie_safe_boundaries else None
    k_cap = train.n // m_min
    if train_mask is not None:
        k_cap = min(k_cap, int(train_mask[1:-1].sum()) + 1)
    k_eff = min(k_max, k_cap)

    cap = {} if mem_cap_bytes is None else {"mem_cap_bytes": mem_cap_bytes}
    cm_train = precompute(train, threads=threads, **cap)
    totals, parts = dp_curve(cm_train, k_eff, m_min=m_min, allowed=train_mask)

    ks = np.arange(1, k_max + 1)
    scores = np.full(k_max, np.inf)
    feasible = np.zeros(k_max, dtype=bool)
    per_point = {}
    for k in range(1, k_max + 1):
        part = parts[k - 1] if k <= k_eff else None
        if part is None:
            continue
        feasible[k - 1] = True
        vals = _test_crps_values(train, pair.test, part)
        per_point[k] = vals
        scores[k - 1] = float(vals.mean())
    if not feasible.any():
        raise ValueError("no feasible bin count on the training half")
    best = int(np.argmin(scores))  # argmin keeps the smallest K on ties
    k_star = int(ks[best])
    if rule == "one_se":
        se = float(per_point[k_star].std(ddof=1) / np.sqrt(pair.test.n))
        k_star = int(ks[int(np.flatnonzero(scores <= scores[best] + se)[0])])

    full_mask = tie_safe_mask(ds.x) if tie_safe_boundaries else None
    full_cap = min(k_max, ds.n // m_min)
    if full_mask is not None:
        full_cap = min(full_cap, int(full_mask[1:-1].sum()) + 1)
    cm_full = precompute(ds, threads=threads, **cap)
    loo_totals, _ = dp_curve(cm_full, full_cap, m_min=m_min, allowed=full_mask)
    loo = np.full(k_max, np.inf)
    loo[:full_cap] = loo_totals

    return (
        KCurve(ks=ks, test_crps=scores, feasible=feasible, k_star=k_star, k_max=k_max),
        LooCurve(ks=ks, dp_total=loo),
    )


def write_kcurve_csv(path, kcurve, loocurve, config=None):
    """Export the paired curves as CSV: K, loo_total, test_crps, feasible."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if config is not None:
            fh.write("# " + json.dumps(config, sort_keys=True) + "\n")
        writer = csv.writer(fh)
        writer.writerow(["K", "loo_total", "test_crps", "feasible"])
        for i, k in enumerate(kcurve.ks):
            writer.writerow([
                int(k),
                repr(float(loocurve.dp_total[i])),
                repr(float(kcurve.test_crps[i])),
                int(kcurve.feasible[i]),
            ])
