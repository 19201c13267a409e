"""

*** Baselines.py ***

Contains:
Classical synthesizers kept as reference points for the learned one:
    bootstrap   -draws series with replacement from the class pool
    jitter      -same draw, then a random amplitude scaling and additive Gaussian jitter

External dependencies:
numpy       -Numpy Python extension. http://numpy.org/

Changelog:
Date          Name              Change
__ _          __ _              ____ _
10/09/2024    Workbench team    Initial release

References:
Short       Author,Year             Title
___ _       _________ _             ___ _
[Um17]      Um,2017                 Data augmentation of wearable sensor data using CNNs

"""
# Imports
import logging
from collections import OrderedDict
from dataclasses import asdict, dataclass

import numpy as np

from src.models.synthesizer import SynthInterface, check_training_set
from src.utils.checkpoint import read_checkpoint, write_checkpoint
from src.utils.errors import ClassTooSmall, InvalidConfig, UnfittedModel
from src.utils.seeding import derive_seed, numpy_rng

logger = logging.getLogger(__name__)

CHECKPOINT_KIND = "baseline"


@dataclass(frozen=True)
class BaselineConfig:
    kind: str = "bootstrap"     # "bootstrap" | "jitter"
    jitter_std: float = 0.03    # scaled units
    scale_std: float = 0.1

    def __post_init__(self):
        if self.kind not in ("bootstrap", "jitter"):
            raise InvalidConfig(f"unknown baseline kind: {self.kind}")
        if self.jitter_std < 0 or self.scale_std < 0:
            raise InvalidConfig("jitter_std and scale_std must be non-negative")

    def to_dict(self):
        return asdict(self)


class BaselineSynth(SynthInterface):
    def __init__(self, cfg=BaselineConfig()):
        self.cfg = cfg
        self.kind = cfg.kind
        self.pools = None
        self.scaler = None

    @property
    def fitted(self):
        return self.pools is not None

    def fit(self, series, labels=None, seed=0):
        series, labels = check_training_set(series, labels)
        if len(series) == 0:
            raise ClassTooSmall("cannot fit a baseline on an empty series set")
        self.pools = {None: series}
        if labels is not None:
            for c in np.unique(labels):
                self.pools[int(c)] = series[labels == c]
        logger.debug(f"{self.kind} baseline pools: { {k: len(v) for k, v in self.pools.items()} }")
        return self

    def sample(self, n, cls=None, seed=0):
        if not self.fitted:
            raise UnfittedModel("baseline synthesizer sampled before fit")
        key = None if cls is None else int(cls)
        if key not in self.pools:
            raise ClassTooSmall(f"no training series of class {key} to draw from")
        pool = self.pools[key]
        rng = numpy_rng(derive_seed(seed, "baseline", self.kind, key))
        out = pool[rng.integers(0, len(pool), size=n)].copy()
        if self.kind == "jitter":
            out *= 1.0 + rng.normal(0.0, self.cfg.scale_std, size=(n, 1))
            out += rng.normal(0.0, self.cfg.jitter_std, size=out.shape)
        return out

    def save(self, path, scaler=None):
        if not self.fitted:
            raise UnfittedModel("only fitted synthesizers can be saved")
        params = OrderedDict((f"pool.{'all' if k is None else k}", v) for k, v in self.pools.items())
        write_checkpoint(path, CHECKPOINT_KIND, {"config": self.cfg.to_dict(), "scaler": scaler}, params)

    @classmethod
    def load(cls, path):
        _, meta, params = read_checkpoint(path, expected_kind=CHECKPOINT_KIND)
        model = cls(BaselineConfig(**meta["config"]))
        model.pools = {None if k == "pool.all" else int(k.split(".")[1]): v for k, v in params.items()}
        model.scaler = meta.get("scaler")
        return model
