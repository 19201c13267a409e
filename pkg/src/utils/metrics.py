"""

*** Metrics.py ***

Contains:
Forecast error metrics (MSE, MAE, MAPE, MASE), per-window evaluation bundles and
outlier trimming for histogram export

MASE variant:
    The scale is the mean absolute first difference of the actuals over the forecast
    output window itself (no seasonal naive baseline):
        MASE = mean|y - y_hat| / ((1/(n-1)) * sum_{t=2..n} |y_t - y_{t-1}|)

External dependencies:
numpy       -Numpy Python extension. http://numpy.org/

Changelog:
Date          Name              Change
__ _          __ _              ____ _
05/09/2024    Workbench team    Initial release
14/10/2024    Workbench team    Outlier trimming on inverted-CDF quantiles

References:
Short       Author,Year             Title
___ _       _________ _             ___ _
[Hynd06]    Hyndman/Koehler,2006    Another look at measures of forecast accuracy

"""
# Imports
import math
from dataclasses import asdict, dataclass

import numpy as np

from src.utils.errors import UndefinedMAPE, UndefinedMASE

MAPE_TOL = 1e-8
MASE_TOL = 1e-12
METRIC_NAMES = ("mse", "mae", "mape", "mase")


def _pair(y, y_hat, min_len=1):
    y = np.asarray(y, dtype=np.float64).ravel()
    y_hat = np.asarray(y_hat, dtype=np.float64).ravel()
    if y.shape != y_hat.shape:
        raise ValueError(f"length mismatch: {y.shape} vs {y_hat.shape}")
    if y.size < min_len:
        raise ValueError(f"need at least {min_len} values, got {y.size}")
    return y, y_hat


def mse(y, y_hat):
    """Mean of squared errors."""
    y, y_hat = _pair(y, y_hat)
    return float(np.mean((y - y_hat) ** 2))


def mae(y, y_hat):
    """Mean of absolute errors."""
    y, y_hat = _pair(y, y_hat)
    return float(np.mean(np.abs(y - y_hat)))


def mape(y, y_hat):
    """Mean absolute percentage error, as a fraction (0.15 = 15 %)."""
    y, y_hat = _pair(y, y_hat)
    if np.any(np.abs(y) <= MAPE_TOL):
        raise UndefinedMAPE(f"actual values within {MAPE_TOL} of zero")
    return float(np.mean(np.abs((y - y_hat) / y)))


def mase(y, y_hat):
    y, y_hat = _pair(y, y_hat, min_len=2)
    steps = np.abs(np.diff(y))
    if steps.sum() <= MASE_TOL:
        raise UndefinedMASE("actual values are constant over the window")
    return float(np.mean(np.abs(y - y_hat)) / steps.mean())


@dataclass(frozen=True)
class MetricBundle:
    mse: float
    mae: float
    mape: float
    mase: float
    mape_defined: bool = True
    mase_defined: bool = True

    def to_dict(self):
        return asdict(self)


def evaluate_windows(targets, predictions):
    """
    Metrics of a set of forecast windows: each metric is computed per window and
    averaged. MAPE/MASE are nan with their flag cleared when any window is undefined.
    """
    targets = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    predictions = np.atleast_2d(np.asarray(predictions, dtype=np.float64))
    if targets.shape != predictions.shape or targets.shape[0] == 0:
        raise ValueError(f"bad window arrays: {targets.shape} vs {predictions.shape}")
    values = {"mse": [], "mae": [], "mape": [], "mase": []}
    mape_ok, mase_ok = True, True
    for y, y_hat in zip(targets, predictions):
        values["mse"].append(mse(y, y_hat))
        values["mae"].append(mae(y, y_hat))
        if mape_ok:
            try:
                values["mape"].append(mape(y, y_hat))
            except UndefinedMAPE:
                mape_ok = False
        if mase_ok:
            try:
                values["mase"].append(mase(y, y_hat))
            except UndefinedMASE:
                mase_ok = False
    return MetricBundle(mse=float(np.mean(values["mse"])), mae=float(np.mean(values["mae"])),
                        mape=float(np.mean(values["mape"])) if mape_ok else math.nan,
                        mase=float(np.mean(values["mase"])) if mase_ok else math.nan,
                        mape_defined=mape_ok, mase_defined=mase_ok)


def trim_outliers(values, fraction=0.05):
    """
    Drops values outside the [fraction/2, 1 - fraction/2] empirical quantiles
    (two-tailed, inverted-CDF order statistics, so at most floor(n * fraction / 2)
    values leave each tail). Order is preserved.
    """
    if not 0.0 <= fraction < 1.0:
        raise ValueError(f"fraction must be in [0, 1), got {fraction}")
    x = np.asarray(values, dtype=np.float64)
    if fraction == 0.0 or x.size == 0:
        return x.tolist()
    lo, hi = np.quantile(x, [fraction / 2.0, 1.0 - fraction / 2.0], method="inverted_cdf")
    return x[(x >= lo) & (x <= hi)].tolist()
