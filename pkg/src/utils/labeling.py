"""

*** Labeling.py ***

Contains:
Trend classes and the rule-based labeling of series

Procedure:
    1. Keep the first 3 hours (180 samples); the last hour is usually a stable regime.
    2. Smooth with a 5-wide moving average, edge-repetition padding.
    3. First differences of the smoothed segment (dt = 1 min), net = last - first.
    4. Monotonic positive if min(d) >= -eps_slope and net > eps_net,
       monotonic negative if max(d) <= eps_slope and net < -eps_net,
       non-monotonic otherwise (flat series included).

External dependencies:
numpy       -Numpy Python extension. http://numpy.org/

Changelog:
Date          Name              Change
__ _          __ _              ____ _
03/09/2024    Workbench team    Initial release

"""
# Imports
import logging
from collections import Counter
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from src.utils.errors import InvalidConfig, UnknownClass
from src.utils.seriestools import SeriesTools

logger = logging.getLogger(__name__)

LABEL_HORIZON = 180     # [min]


class TrendClass(IntEnum):
    MonotonicPositive = 0
    MonotonicNegative = 1
    NonMonotonic = 2


N_CLASSES = len(TrendClass)


def as_trend_class(value):
    try:
        return TrendClass(int(value))
    except (ValueError, TypeError):
        raise UnknownClass(f"unknown trend class: {value!r}") from None


@dataclass(frozen=True)
class LabelConfig:
    eps_slope: float = 0.01     # [°C/min]
    eps_net: float = 0.2        # [°C]
    window: int = 5

    def __post_init__(self):
        if self.eps_slope < 0 or self.eps_net < 0:
            raise InvalidConfig("eps_slope and eps_net must be non-negative")


def smooth_ma(x, window=5):
    return SeriesTools.smooth_ma(x, window)


def label_values(values, eps_slope=0.01, eps_net=0.2, window=5):
    """Trend class of a raw value vector (only the first 180 samples are read)."""
    if eps_slope < 0 or eps_net < 0:
        raise InvalidConfig("eps_slope and eps_net must be non-negative")
    segment = np.asarray(values, dtype=np.float64)[:LABEL_HORIZON]
    smoothed = smooth_ma(segment, window)
    d = SeriesTools.first_diff(smoothed)
    net = smoothed[-1] - smoothed[0]
    if d.min() >= -eps_slope and net > eps_net:
        return TrendClass.MonotonicPositive
    if d.max() <= eps_slope and net < -eps_net:
        return TrendClass.MonotonicNegative
    return TrendClass.NonMonotonic


def label_series(series, eps_slope=0.01, eps_net=0.2):
    """Trend class of a SeriesRecord (or any object exposing ``values``)."""
    values = getattr(series, "values", series)
    return label_values(values, eps_slope, eps_net)


def label_records(records, cfg=LabelConfig()):
    """Returns copies of the records carrying their trend class."""
    labeled = [r.with_label(label_values(r.values, cfg.eps_slope, cfg.eps_net, cfg.window)) for r in records]
    logger.info(f"Label distribution: {class_histogram(labeled)}")
    return labeled


def class_histogram(records):
    """Counts per trend class (all three classes always present as keys)."""
    counts = Counter(int(r.label) for r in records if r.label is not None)
    return {int(c): counts.get(int(c), 0) for c in TrendClass}
