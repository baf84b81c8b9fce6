import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crpsbin.conformal import (
    BinReference,
    SearchConfig,
    augmented_cost_identity,
    crps_score,
    knn_score,
    locate_bins,
    p_value,
    prediction_set,
    venn_band,
    x_cut_points,
)
from conftest import random_values


def loo_pvalue_oracle_bounds(atoms, y_h, kind="crps"):
    """Exact-rational oracle: score every element of the augmented multiset
    by explicitly building the deleted sample.

    Exact ties between a train score and the test score are structural for
    some configurations (e.g. the two interior points of a 4-element
    augmented set always tie); float arithmetic may break them either way,
    so the oracle returns (p_strict, p_with_ties) bounds.
    """
    from fractions import Fraction

    aug = [Fraction(float(v)) for v in atoms] + [Fraction(float(y_h))]
    mp1 = len(aug)

    def score(j):
        rest = [aug[i] for i in range(mp1) if i != j]
        target = aug[j]
        if kind == "crps":
            m = len(rest)
            first = sum(abs(v - target) for v in rest)
            w = sum(
                abs(rest[a] - rest[b])
                for a in range(m)
                for b in range(a + 1, m)
            )
            return Fraction(first, m) - Fraction(w, m * m)
        return min(abs(v - target) for v in rest)

    scores = [score(j) for j in range(mp1)]
    test = scores[-1]
    with_ties = sum(1 for s in scores if s >= test)
    strict = sum(1 for s in scores[:-1] if s > test) + 1  # test counts itself
    return Fraction(strict, mp1), Fraction(with_ties, mp1)


def test_crps_score_values():
    assert crps_score([0.0, 1.0], 0.5) == pytest.approx(0.25)
    assert crps_score([0.0, 1.0], 10.0) == pytest.approx(9.25)


def test_crps_score_minimized_at_median(rng):
    vals = random_values(rng, 31, kind=0)
    med = float(np.median(vals))
    ref = BinReference.from_values(vals)
    base = crps_score(ref, med)
    for delta in (0.05, 0.3, 2.0):
        assert crps_score(ref, med + delta) >= base - 1e-12
        assert crps_score(ref, med - delta) >= base - 1e-12


def test_knn_score_values():
    assert knn_score([0.0, 10.0], 4.0, k=1) == pytest.approx(4.0)
    assert knn_score([0.0, 1.0, 10.0], 0.0, k=1) == 0.0
    assert knn_score([0.0, 1.0, 10.0], 2.0, k=2) == pytest.approx(2.0)


def test_knn_score_k_out_of_range():
    with pytest.raises(ValueError, match="k must be"):
        knn_score([0.0, 1.0], 1.0, k=3)


def test_p_value_hand_oracle():
    assert p_value([0.0, 1.0], 0.5) == pytest.approx(1.0)
    assert p_value([0.0, 1.0], 10.0) == pytest.approx(1.0 / 3.0)


def test_p_value_matches_explicit_loo_oracle(rng):
    for _ in range(120):
        m = int(rng.integers(2, 25))
        atoms = random_values(rng, m)
        y_h = float(rng.normal(scale=3))
        for kind in ("crps", "knn"):
            got = p_value(atoms, y_h, score=kind)
            lo, hi = loo_pvalue_oracle_bounds(atoms, y_h, kind)
            assert float(lo) - 1e-12 <= got <= float(hi) + 1e-12, (kind, atoms, y_h)
            if lo == hi:
                assert got == pytest.approx(float(hi), abs=1e-12)


def test_p_value_on_grid_and_floor(rng):
    for _ in range(60):
        m = int(rng.integers(2, 15))
        atoms = random_values(rng, m)
        p = p_value(atoms, float(rng.normal(scale=4)))
        assert p >= 1.0 / (m + 1) - 1e-12
        assert round(p * (m + 1)) == pytest.approx(p * (m + 1), abs=1e-9)


def test_p_value_permutation_invariant(rng):
    atoms = random_values(rng, 12, kind=0)
    y_h = 0.7
    base = p_value(atoms, y_h)
    for _ in range(5):
        assert p_value(rng.permutation(atoms), y_h) == base


def test_p_value_knn_k_restricted():
    with pytest.raises(ValueError, match="k=1 only"):
        p_value([0.0, 1.0, 2.0], 0.5, score="knn", knn_k=2)


def test_p_value_unknown_score():
    with pytest.raises(ValueError, match="unknown score"):
        p_value([0.0, 1.0], 0.5, score="mahalanobis")


def test_p_value_bin_too_small():
    with pytest.raises(ValueError, match="m=1"):
        p_value([1.0], 0.5)


def test_augmented_cost_identity_hand_values():
    lhs, rhs = augmented_cost_identity([0.0, 1.0], 0.5)
    assert lhs == pytest.approx(1.5) and rhs == pytest.approx(1.5)
    lhs, rhs = augmented_cost_identity([0.0, 1.0], 10.0)
    assert lhs == pytest.approx(15.0) and rhs == pytest.approx(15.0)
    lhs, rhs = augmented_cost_identity([2.0, 2.0], 2.0)
    assert lhs == 0.0 and rhs == 0.0


def test_augmented_cost_identity_random(rng):
    for _ in range(1000):
        m = int(rng.integers(2, 40))
        atoms = random_values(rng, m)
        y_h = float(rng.normal(scale=3))
        lhs, rhs = augmented_cost_identity(atoms, y_h)
        assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-12)


def test_prediction_set_crps_single_interval(rng):
    for seed in range(20):
        vals = np.random.default_rng(seed).normal(size=25)
        ps = prediction_set(vals, 0.1)
        assert not ps.whole_line
        assert ps.n_intervals == 1
        lo, hi = ps.intervals[0]
        assert lo < np.median(vals) < hi


def test_prediction_set_contains_and_measure():
    vals = np.random.default_rng(0).normal(size=40)
    ps = prediction_set(vals, 0.1)
    lo, hi = ps.intervals[0]
    assert ps.measure == pytest.approx(hi - lo)
    assert ps.contains(0.5 * (lo + hi))
    assert not ps.contains(hi + 1.0)


def test_prediction_set_matches_dense_pvalue_scan(rng):
    from crpsbin.conformal import _pvalues

    for seed in (0, 1, 2):
        vals = np.random.default_rng(seed).normal(size=30)
        for kind in ("crps", "knn"):
            ps = prediction_set(vals, 0.15, score=kind)
            ref = BinReference.from_values(vals)
            grid = np.linspace(vals.min() - 4, vals.max() + 4, 100_001)
            inset = _pvalues(ref, grid, kind) > 0.15
            scan_measure = inset.mean() * (grid[-1] - grid[0])
            assert ps.measure == pytest.approx(scan_measure, rel=2e-3, abs=2e-3)
            # every dense in-point lies in an interval, up to edge tolerance
            pts = grid[inset][:: max(1, inset.sum() // 200)]
            for y in pts:
                assert any(lo - 1e-3 <= y <= hi + 1e-3 for lo, hi in ps.intervals)


def test_whole_line_exact_floor():
    # floor binds iff m + 1 < 1/eps
    cases = [(5, 0.10, True), (9, 0.10, False), (8, 0.10, True),
             (3, 0.25, False), (2, 0.25, True), (19, 0.05, False), (18, 0.05, True)]
    for m, eps, whole in cases:
        vals = np.random.default_rng(1).normal(size=m)
        ps = prediction_set(vals, eps)
        assert ps.whole_line is whole, (m, eps)
        assert ps.contains(123.0) is whole or ps.contains(123.0) in (True, False)
        if whole:
            assert ps.intervals == ()
            assert ps.measure == np.inf
            assert ps.contains(1e9)


def test_prediction_set_translation_equivariance(rng):
    vals = random_values(rng, 30, kind=0)
    ps = prediction_set(vals, 0.1)
    ps_shifted = prediction_set(vals + 100.0, 0.1)
    assert ps_shifted.n_intervals == ps.n_intervals
    for (lo, hi), (lo2, hi2) in zip(ps.intervals, ps_shifted.intervals):
        assert lo2 == pytest.approx(lo + 100.0, abs=1e-5)
        assert hi2 == pytest.approx(hi + 100.0, abs=1e-5)


def test_prediction_set_small_epsilon_extends_range(rng):
    # near the granularity floor the set reaches past the default padding;
    # the search must extend until both edges are rejected
    vals = rng.standard_normal(60)
    ps = prediction_set(vals, 0.02)
    assert not ps.whole_line
    assert ps.n_intervals == 1
    lo, hi = ps.intervals[0]
    assert lo < vals.min() and hi > vals.max()
    assert np.isfinite(ps.measure)
    from crpsbin.conformal import _pvalues

    ref = BinReference.from_values(vals)
    assert _pvalues(ref, np.array([lo - 1e-3]), "crps")[0] <= 0.02
    assert _pvalues(ref, np.array([hi + 1e-3]), "crps")[0] <= 0.02


def test_prediction_set_constant_bin():
    ps = prediction_set(np.full(30, 4.0), 0.1)
    assert ps.n_intervals == 1
    lo, hi = ps.intervals[0]
    assert lo <= 4.0 <= hi
    assert ps.measure < 1e-6


def test_prediction_set_epsilon_validation():
    with pytest.raises(ValueError, match="epsilon"):
        prediction_set([0.0, 1.0], 1.5)
    with pytest.raises(ValueError, match="m=1"):
        prediction_set([0.0], 0.5)


def test_prediction_set_nested_in_epsilon(rng):
    # larger epsilon rejects more: sets shrink (up to refinement tolerance)
    vals = random_values(rng, 35, kind=0)
    m1 = prediction_set(vals, 0.05).measure
    m2 = prediction_set(vals, 0.10).measure
    m3 = prediction_set(vals, 0.30).measure
    assert m1 >= m2 - 1e-9 >= m3 - 2e-9


def test_bimodal_knn_splits_crps_does_not():
    from crpsbin.dataset import gen_bimodal

    vals = gen_bimodal(50, 4)
    ps_crps = prediction_set(vals, 0.1, score="crps")
    ps_knn = prediction_set(vals, 0.1, score="knn")
    assert ps_crps.n_intervals == 1
    assert ps_knn.n_intervals >= 2
    # the inter-modal gap is excluded by the knn score but spanned by crps
    assert ps_crps.contains(0.0)
    assert not ps_knn.contains(0.0)
    assert ps_knn.measure < ps_crps.measure


def test_pvalues_chunked_path_identical(rng, monkeypatch):
    import crpsbin.conformal as conf

    vals = random_values(rng, 60, kind=0)
    ref = BinReference.from_values(vals)
    ys = rng.normal(scale=3, size=500)
    base = {kind: conf._pvalues(ref, ys, kind) for kind in ("crps", "knn")}
    monkeypatch.setattr(conf, "_CHUNK_ELEMS", 64)
    for kind in ("crps", "knn"):
        np.testing.assert_array_equal(conf._pvalues(ref, ys, kind), base[kind])


def test_search_config_tolerance_controls_edges():
    vals = np.random.default_rng(3).normal(size=25)
    coarse = prediction_set(vals, 0.1, search=SearchConfig(tol=1e-2))
    fine = prediction_set(vals, 0.1, search=SearchConfig(tol=1e-10))
    assert coarse.n_intervals == fine.n_intervals == 1
    assert coarse.intervals[0][0] == pytest.approx(fine.intervals[0][0], abs=2e-2)


def test_venn_band_hand_values():
    band = venn_band([1.0, 2.0, 3.0, 4.0])
    # at t with ECDF 0.5 (two atoms at or below): lower 0.4, upper 0.6
    assert band.lower(2.5) == pytest.approx(0.4)
    assert band.upper(2.5) == pytest.approx(0.6)
    assert band.lower(0.0) == 0.0
    assert band.upper(0.0) == pytest.approx(1.0 / 5.0)
    assert band.width == pytest.approx(0.2)


def test_venn_band_width_exact(rng):
    vals = random_values(rng, 252)
    band = venn_band(vals)
    assert band.width == pytest.approx(1.0 / 253.0, rel=1e-15)
    assert band.width == pytest.approx(0.00395, abs=5e-5)
    ts = rng.uniform(vals.min() - 1, vals.max() + 1, size=1000)
    # upper is lower + width by construction: exact float equality
    np.testing.assert_array_equal(band.upper(ts), band.lower(ts) + band.width)
    # and the realized gap is the width to the last ulp
    gap = band.upper(ts) - band.lower(ts)
    np.testing.assert_allclose(gap, band.width, rtol=1e-12)


def test_venn_band_brackets_ecdf(rng):
    vals = random_values(rng, 37, kind=0)
    band = venn_band(vals)
    sorted_vals = np.sort(vals)
    ts = rng.uniform(vals.min() - 1, vals.max() + 1, size=200)
    ecdf = np.searchsorted(sorted_vals, ts, side="right") / vals.size
    lower = band.lower(ts)
    assert np.all(lower <= ecdf + 1e-12)
    assert np.all(ecdf <= lower * (vals.size + 1) / vals.size + 1e-12)


def test_venn_band_empty():
    with pytest.raises(ValueError):
        venn_band([])


def test_x_cut_points_and_locate():
    x_sorted = np.array([0.0, 1.0, 2.0, 3.0, 4.0, 5.0])
    cuts = x_cut_points(x_sorted, (0, 2, 4, 6))
    assert cuts.tolist() == [1.5, 3.5]
    assert locate_bins(cuts, [-99.0]).tolist() == [0]
    assert locate_bins(cuts, [99.0]).tolist() == [2]
    assert locate_bins(cuts, [1.5]).tolist() == [0]  # boundary goes left
    assert locate_bins(cuts, [1.6]).tolist() == [1]


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=2, max_size=30), st.floats(-150, 150))
def test_pvalue_grid_membership_property(atoms, y_h):
    p = p_value(np.asarray(atoms), y_h)
    m = len(atoms)
    assert 1.0 / (m + 1) - 1e-12 <= p <= 1.0 + 1e-12
