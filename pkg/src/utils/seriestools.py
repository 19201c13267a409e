"""

*** SeriesTools.py ***

Contains:
Vector operations on acquisition series (sub-sampling, smoothing, differences)

External dependencies:
numpy       -Numpy Python extension. http://numpy.org/

Internal dependencies:
errors      -Workbench exception hierarchy

Changelog:
Date          Name              Change
__ _          __ _              ____ _
02/09/2024    Workbench team    Initial release
19/09/2024    Workbench team    Adds mean-pooling sub-sampling

"""
# Imports
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from src.utils.errors import BadWindow, NonDivisibleFactor

SERIES_LENGTH = 240     # [min]  # 4 h at 1 sample/min


class SeriesTools:
    """Utilidades vectoriales para series de temperatura."""

    @staticmethod
    def subsample(series, factor=10, mode="stride"):
        """
        Reduces a series by an integer factor.

        Args:
            series (array-like): series whose length is a multiple of factor
            factor (int): reduction factor
            mode (str): "stride" keeps samples 0, f, 2f...; "mean" averages each block

        Returns:
            np.ndarray: series of length len(series)/factor
        """
        x = np.asarray(series, dtype=np.float64)
        factor = int(factor)
        if factor < 1 or x.shape[-1] % factor != 0:
            raise NonDivisibleFactor(f"factor {factor} does not divide series length {x.shape[-1]}")
        if mode == "stride":
            return x[..., ::factor].copy()
        if mode == "mean":
            return x.reshape(x.shape[:-1] + (x.shape[-1] // factor, factor)).mean(axis=-1)
        raise ValueError(f"Unknown subsample mode: {mode}")

    @staticmethod
    def smooth_ma(x, window=5):
        """Centered moving average with edge-repetition padding (same length)."""
        x = np.asarray(x, dtype=np.float64)
        if window < 1 or window % 2 == 0 or window > x.shape[-1]:
            raise BadWindow(f"window must be odd and in [1, {x.shape[-1]}], got {window}")
        if window == 1:
            return x.copy()
        half = (window - 1) // 2
        padded = np.pad(x, (half, half), mode="edge")
        return sliding_window_view(padded, window).mean(axis=-1)

    @staticmethod
    def first_diff(x):
        """First differences d_t = x_{t+1} - x_t (dt = 1 sample)."""
        return np.diff(np.asarray(x, dtype=np.float64))
