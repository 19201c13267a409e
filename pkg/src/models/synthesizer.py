"""

*** Synthesizer.py ***

Contains:
Common interface of the class-conditional series synthesizers and their factory

Internal dependencies:
vqsynth     -VQSynth (vector-quantized autoencoder with token prior)
baselines   -BaselineSynth (bootstrap resampling, jitter-and-scale)

Changelog:
Date          Name              Change
__ _          __ _              ____ _
08/09/2024    Workbench team    Initial release

"""
# Imports
from abc import ABC, abstractmethod

import numpy as np

from src.utils.errors import InvalidConfig, NonFiniteValue, RaggedSeries
from src.utils.labeling import as_trend_class
from src.utils.seriestools import SERIES_LENGTH

SYNTH_KINDS = ("vq", "bootstrap", "jitter")


class SynthInterface(ABC):
    """Fits on scaled (n, 240) series with optional trend labels; samples scaled series."""
    kind = None

    @abstractmethod
    def fit(self, series, labels=None, seed=0):
        ...

    @abstractmethod
    def sample(self, n, cls=None, seed=0):
        ...

    @property
    @abstractmethod
    def fitted(self):
        ...

    def save(self, path, scaler=None):
        """Checkpoint of the fitted model; ``scaler`` (dict) is stored for export in °C."""
        raise NotImplementedError(f"{type(self).__name__} has no checkpoint format")


def check_training_set(series, labels=None):
    series = np.atleast_2d(np.asarray(series, dtype=np.float64))
    if series.shape[1] != SERIES_LENGTH:
        raise RaggedSeries(f"synthesizers take ({SERIES_LENGTH},) series, got shape {series.shape}")
    if not np.all(np.isfinite(series)):
        raise NonFiniteValue("training series contain non-finite values")
    if labels is not None:
        labels = np.array([int(as_trend_class(c)) for c in labels], dtype=np.int64)
        if len(labels) != len(series):
            raise InvalidConfig(f"{len(labels)} labels for {len(series)} series")
    return series, labels


def sample(model, n, cls=None, seed=0):
    """n scaled series of length 240 from a fitted synthesizer (n = 0 gives an empty set)."""
    if n < 0:
        raise InvalidConfig(f"sample count cannot be negative, got {n}")
    if cls is not None:
        cls = as_trend_class(cls)
    if n == 0:
        return np.zeros((0, SERIES_LENGTH))
    out = model.sample(n, cls, seed)
    if out.shape != (n, SERIES_LENGTH) or not np.all(np.isfinite(out)):
        raise NonFiniteValue(f"{type(model).__name__} emitted invalid series {out.shape}")
    return out


def build_synth(kind, cfg=None):
    """Unfitted synthesizer of the given kind ("vq", "bootstrap", "jitter")."""
    if kind == "vq":
        from src.models.vqsynth import VQConfig, VQSynth
        return VQSynth(cfg or VQConfig())
    if kind in ("bootstrap", "jitter"):
        from src.models.baselines import BaselineConfig, BaselineSynth
        return BaselineSynth(cfg or BaselineConfig(kind=kind))
    raise InvalidConfig(f"unknown synthesizer kind '{kind}', expected one of {SYNTH_KINDS}")


def load_synth(path):
    """Loads a synthesizer checkpoint of any kind."""
    from src.models.baselines import BaselineSynth
    from src.models.vqsynth import VQSynth
    from src.utils.checkpoint import peek_kind
    kind = peek_kind(path)
    if kind == "baseline":
        return BaselineSynth.load(path)
    return VQSynth.load(path)
