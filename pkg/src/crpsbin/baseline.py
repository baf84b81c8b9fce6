"""Gaussian split-conformal baseline: OLS mean plus constant-width band.

The benchmark competitor fits a least-squares line on one half, takes the
ceil((1-eps)(n_cal+1))-th smallest absolute residual on the calibration
half as the interval half-width, and predicts constant-width intervals.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_epsilon

__all__ = ["OlsModel", "SplitConformalModel", "ols_fit", "calibrate", "predict_interval"]


@dataclass(frozen=True)
class OlsModel:
    """Least-squares line y = intercept + slope * x."""

    intercept: float
    slope: float

    def predict(self, x):
        return self.intercept + self.slope * np.asarray(x, dtype=np.float64)


@dataclass(frozen=True)
class SplitConformalModel:
    """Calibrated constant-width interval predictor.

    ``whole_line`` marks calibration sets too small for the requested
    level (the conformal rank exceeds n_cal), where no finite width is valid.
    """

    ols: OlsModel
    halfwidth: float
    epsilon: float
    whole_line: bool = False


def ols_fit(train):
    """Fit the least-squares line on a dataset (needs >= 2 distinct x)."""
    x, y = train.x, train.y
    if np.all(x == x[0]):
        raise ValueError("degenerate covariate: all x values are equal")
    slope, intercept = np.polyfit(x, y, 1)
    return OlsModel(intercept=float(intercept), slope=float(slope))


def calibrate(ols, calib, epsilon):
    """Half-width from the order statistic of calibration absolute residuals.

    Uses the finite-sample-valid rank ceil((1-eps)(n_cal+1)); when that
    exceeds n_cal the model is flagged whole-line instead of faking a width.
    """
    eps = check_epsilon(epsilon)
    resid = np.abs(calib.y - ols.predict(calib.x))
    n_cal = resid.size
    rank = math.ceil((1.0 - eps) * (n_cal + 1))
    if rank > n_cal:
        return SplitConformalModel(ols=ols, halfwidth=math.inf, epsilon=eps, whole_line=True)
    halfwidth = float(np.sort(resid)[rank - 1])
    return SplitConformalModel(ols=ols, halfwidth=halfwidth, epsilon=eps)


def predict_interval(model, x_star):
    """Constant-width interval centered on the OLS line at x_star."""
    center = float(model.ols.predict(x_star))
    return (center - model.halfwidth, center + model.halfwidth)
