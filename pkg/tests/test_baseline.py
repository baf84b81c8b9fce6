import math

import numpy as np
import pytest

from crpsbin.baseline import calibrate, ols_fit, predict_interval
from crpsbin.dataset import SortedDataset, gen_heteroscedastic


def make_ds(x, y):
    return SortedDataset(np.asarray(x, float), np.asarray(y, float))


def test_ols_exact_line():
    m = ols_fit(make_ds([0.0, 1.0], [0.0, 1.0]))
    assert m.intercept == pytest.approx(0.0, abs=1e-12)
    assert m.slope == pytest.approx(1.0)


def test_ols_flat_line():
    m = ols_fit(make_ds([0.0, 1.0], [1.0, 1.0]))
    assert m.slope == pytest.approx(0.0, abs=1e-12)
    assert m.intercept == pytest.approx(1.0)


def test_ols_degenerate_x():
    with pytest.raises(ValueError, match="degenerate"):
        ols_fit(make_ds([2.0, 2.0], [0.0, 1.0]))


def test_ols_recovers_slope_within_sampling_error():
    rng = np.random.default_rng(5)
    x = np.sort(rng.uniform(0, 1, 100))
    y = 2.0 * x + 3.0 + rng.standard_normal(100) * 0.5
    m = ols_fit(make_ds(x, y))
    # standard OLS slope standard error
    se = 0.5 / np.sqrt(np.sum((x - x.mean()) ** 2))
    assert abs(m.slope - 2.0) <= 3 * se


def test_calibrate_rank_arithmetic():
    ols = ols_fit(make_ds([0.0, 1.0], [0.0, 0.0]))
    # residuals are |y|: 1..9
    calib = make_ds(np.linspace(0, 1, 9), [1, -2, 3, -4, 5, -6, 7, -8, 9])
    model = calibrate(ols, calib, 0.1)
    assert math.ceil(0.9 * 10) == 9
    assert model.halfwidth == pytest.approx(9.0)
    assert not model.whole_line


def test_calibrate_zero_residuals():
    ols = ols_fit(make_ds([0.0, 1.0], [0.0, 1.0]))
    pts = np.linspace(0.1, 0.9, 9)
    calib = make_ds(pts, pts)  # all residuals zero; rank ceil(0.8*10)=8
    assert calibrate(ols, calib, 0.2).halfwidth == pytest.approx(0.0, abs=1e-12)


def test_calibrate_whole_line_floor():
    ols = ols_fit(make_ds([0.0, 1.0], [0.0, 1.0]))
    calib = make_ds(np.linspace(0, 1, 5), np.zeros(5))
    model = calibrate(ols, calib, 0.1)  # rank 6 > 5
    assert model.whole_line
    assert model.halfwidth == math.inf


def test_calibrate_epsilon_validation():
    ols = ols_fit(make_ds([0.0, 1.0], [0.0, 1.0]))
    with pytest.raises(ValueError, match="epsilon"):
        calibrate(ols, make_ds([0.0, 1.0], [0.0, 1.0]), 0.0)


def test_predict_interval_hand_values():
    from crpsbin.baseline import OlsModel, SplitConformalModel

    m = SplitConformalModel(ols=OlsModel(0.0, 1.0), halfwidth=2.0, epsilon=0.1)
    assert predict_interval(m, 3.0) == (1.0, 5.0)
    degenerate = SplitConformalModel(ols=OlsModel(0.0, 1.0), halfwidth=0.0, epsilon=0.1)
    lo, hi = predict_interval(degenerate, 3.0)
    assert lo == hi == 3.0


def test_interval_width_constant_in_x():
    rng = np.random.default_rng(7)
    ds = gen_heteroscedastic(200, 7)
    ols = ols_fit(ds)
    model = calibrate(ols, gen_heteroscedastic(100, 8), 0.1)
    widths = {predict_interval(model, xq)[1] - predict_interval(model, xq)[0]
              for xq in rng.uniform(0, 3, 25)}
    assert all(w == pytest.approx(2 * model.halfwidth) for w in widths)


def test_split_conformal_marginal_coverage():
    # fresh i.i.d. calibration and test: coverage >= 1 - eps - MC slack
    rng = np.random.default_rng(42)
    hits = []
    for rep in range(60):
        train = gen_heteroscedastic(80, 1000 + rep)
        calib = gen_heteroscedastic(80, 2000 + rep)
        test = gen_heteroscedastic(80, 3000 + rep)
        model = calibrate(ols_fit(train), calib, 0.2)
        resid = np.abs(test.y - model.ols.predict(test.x))
        hits.append(float(np.mean(resid <= model.halfwidth)))
    cov = np.mean(hits)
    se = np.std(hits, ddof=1) / np.sqrt(len(hits))
    assert cov >= 0.8 - 3 * se
