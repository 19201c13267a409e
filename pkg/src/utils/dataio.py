"""

*** DataIO.py ***

Contains:
Series records in the RICO tabular schema, CSV ingestion/export, standard scaling
and the per-phase train/test partition

CSV layout (UTF-8, header row, one row per minute):
    phase, step, flag, sp_ec3, sp_sb43, sp_b46, sp_sb47, minute, target[, label]
    "off" set points are empty cells. Rows of a series are contiguous and ordered by
    minute 0..239.

External dependencies:
numpy       -Numpy Python extension. http://numpy.org/
pandas      -Pandas. https://pandas.pydata.org/

Internal dependencies:
seriestools -Sub-sampling helpers
seeding     -Per-phase seed derivation

Changelog:
Date          Name              Change
__ _          __ _              ____ _
02/09/2024    Workbench team    Initial release
19/09/2024    Workbench team    Adds chronological split and split manifest

"""
# Imports
import json
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import pandas as pd

from src.utils.errors import (DegenerateData, DuplicateKey, EmptyDataset, InvalidConfig,
                              MissingColumn, NonFiniteValue, RaggedSeries)
from src.utils.seeding import derive_seed, numpy_rng
from src.utils.seriestools import SERIES_LENGTH, SeriesTools

logger = logging.getLogger(__name__)

SETPOINT_COLUMNS = ("sp_ec3", "sp_sb43", "sp_b46", "sp_sb47")
CSV_COLUMNS = ("phase", "step", "flag") + SETPOINT_COLUMNS + ("minute", "target")
DEFAULT_SCHEMA = {name: name for name in CSV_COLUMNS + ("label",)}


@dataclass(frozen=True, eq=False)
class SeriesRecord:
    """One 4-hour acquisition of the target channel (room-center temperature, °C)."""
    phase: int
    step: int
    flag: int
    setpoints: tuple          # [°C] EC3, SB43, B46, SB47; nan = off
    values: np.ndarray = field(repr=False)
    label: Optional[int] = None

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.shape != (SERIES_LENGTH,):
            raise RaggedSeries(f"series ({self.phase}, {self.step}) has shape {values.shape}, expected ({SERIES_LENGTH},)")
        if not np.all(np.isfinite(values)):
            raise NonFiniteValue(f"series ({self.phase}, {self.step}) contains non-finite values")
        if self.flag not in (0, 1):
            raise InvalidConfig(f"flag must be 0 or 1, got {self.flag}")
        if self.phase not in (0, 1, 2, 3, 4):
            raise InvalidConfig(f"phase must be in 1..4 (0 for synthetic), got {self.phase}")
        if self.step < 0:
            raise InvalidConfig(f"step must be non-negative, got {self.step}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "setpoints", tuple(float(s) for s in self.setpoints))

    @property
    def key(self):
        return (self.phase, self.step)

    @property
    def included(self):
        return self.flag == 1

    def with_label(self, label):
        return replace(self, label=None if label is None else int(label))


@dataclass(frozen=True)
class StandardScaler:
    mean: float
    std: float

    def __post_init__(self):
        if not (np.isfinite(self.mean) and np.isfinite(self.std)) or self.std <= 0:
            raise DegenerateData(f"scaler needs finite mean and positive std, got mean={self.mean}, std={self.std}")

    def apply(self, x):
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.std

    def invert(self, x):
        return np.asarray(x, dtype=np.float64) * self.std + self.mean

    def to_dict(self):
        return {"mean": float(self.mean), "std": float(self.std),
                "mean_hex": float(self.mean).hex(), "std_hex": float(self.std).hex()}

    @classmethod
    def from_dict(cls, data):
        if "mean_hex" in data:
            return cls(float.fromhex(data["mean_hex"]), float.fromhex(data["std_hex"]))
        return cls(float(data["mean"]), float(data["std"]))


@dataclass(frozen=True)
class SplitConfig:
    fraction: float = 0.2
    shuffle: bool = True
    rounding: str = "ceil"      # "ceil" | "half_up"

    def __post_init__(self):
        if not 0.0 < self.fraction < 1.0:
            raise InvalidConfig(f"split fraction must be in (0, 1), got {self.fraction}")
        if self.rounding not in ("ceil", "half_up"):
            raise InvalidConfig(f"unknown rounding rule: {self.rounding}")


@dataclass(frozen=True)
class DatasetSplit:
    train: tuple
    test: tuple
    scaler: StandardScaler
    split_seed: int
    config: SplitConfig = SplitConfig()

    def train_keys(self):
        return {r.key for r in self.train}

    def test_keys(self):
        return {r.key for r in self.test}

    def per_phase_counts(self):
        counts = {}
        for name, records in (("train", self.train), ("test", self.test)):
            for r in records:
                counts.setdefault(r.phase, {"train": 0, "test": 0})[name] += 1
        return dict(sorted(counts.items()))

    def with_train(self, train):
        """Same test set and scaler, different train records (harness ablations)."""
        return replace(self, train=tuple(train))

    def to_manifest(self):
        return {
            "split_seed": int(self.split_seed),
            "fraction": self.config.fraction,
            "shuffle": self.config.shuffle,
            "rounding": self.config.rounding,
            "n_train": len(self.train),
            "n_test": len(self.test),
            "per_phase": {str(p): c for p, c in self.per_phase_counts().items()},
            "train_keys": sorted([list(k) for k in self.train_keys()]),
            "test_keys": sorted([list(k) for k in self.test_keys()]),
            "scaler": self.scaler.to_dict(),
        }


def values_matrix(records):
    """Stacks record values into an (n, 240) array."""
    if len(records) == 0:
        return np.zeros((0, SERIES_LENGTH))
    return np.stack([r.values for r in records])


def included(records):
    return [r for r in records if r.included]


def n_test_series(n, fraction, rounding="ceil"):
    """Number of test series reserved from a phase holding n included series."""
    if n <= 0:
        return 0
    # 1e-9 absorbs binary representation error of fraction*n (0.2*60 -> 12.000000000000002)
    if rounding == "ceil":
        k = math.ceil(fraction * n - 1e-9)
    else:
        k = math.floor(fraction * n + 0.5 + 1e-9)
    return min(n, max(1, k))


def subsample(series, factor=10, mode="stride"):
    return SeriesTools.subsample(series, factor, mode)


def fit_scaler(train):
    """Standard scaler over every sample value of the train series (population std)."""
    if len(train) == 0:
        raise EmptyDataset("cannot fit a scaler on an empty train set")
    flat = values_matrix(train).ravel()
    if np.ptp(flat) == 0.0:
        raise DegenerateData("train values have zero variance")
    std = float(flat.std())
    if std <= 0.0:
        raise DegenerateData("train values have zero variance")
    return StandardScaler(mean=float(flat.mean()), std=std)


def split_by_phase(records, fraction=0.2, seed=0, shuffle=True, rounding="ceil"):
    """
    Per-phase train/test partition of the included series.

    Each phase is ordered by step, optionally permuted with a phase-derived seed, and
    its last n_test_series(n_p) series are reserved for test. The scaler is fitted on the
    train series only.
    """
    cfg = SplitConfig(fraction=fraction, shuffle=shuffle, rounding=rounding)
    kept = included(records)
    if not kept:
        raise EmptyDataset("no included (flag=1) series to split")

    by_phase = {}
    for r in kept:
        by_phase.setdefault(r.phase, []).append(r)

    train, test = [], []
    for phase in sorted(by_phase):
        group = sorted(by_phase[phase], key=lambda r: r.step)
        if shuffle:
            perm = numpy_rng(derive_seed(seed, "split", phase)).permutation(len(group))
            group = [group[i] for i in perm]
        n_test = n_test_series(len(group), cfg.fraction, cfg.rounding)
        cut = len(group) - n_test
        train.extend(group[:cut])
        test.extend(group[cut:])
        logger.info(f"Phase {phase}: {len(group)} included series -> {cut} train / {n_test} test")

    if not shuffle:
        logger.warning("Chronological split: test series are the last steps of every phase")

    scaler = fit_scaler(train)
    return DatasetSplit(train=tuple(train), test=tuple(test), scaler=scaler,
                        split_seed=int(seed), config=cfg)


def records_to_frame(records):
    """Long-format DataFrame (one row per minute) in the CSV column order."""
    n = len(records)
    minutes = np.tile(np.arange(SERIES_LENGTH), n)
    frame = pd.DataFrame({
        "phase": np.repeat([r.phase for r in records], SERIES_LENGTH).astype(np.int64),
        "step": np.repeat([r.step for r in records], SERIES_LENGTH).astype(np.int64),
        "flag": np.repeat([r.flag for r in records], SERIES_LENGTH).astype(np.int64),
    })
    setpoints = np.array([r.setpoints for r in records], dtype=np.float64).reshape(n, 4)
    for j, col in enumerate(SETPOINT_COLUMNS):
        frame[col] = np.repeat(setpoints[:, j], SERIES_LENGTH)
    frame["minute"] = minutes.astype(np.int64)
    frame["target"] = values_matrix(records).ravel()
    if any(r.label is not None for r in records):
        labels = [pd.NA if r.label is None else int(r.label) for r in records]
        frame["label"] = pd.array(np.repeat(np.array(labels, dtype=object), SERIES_LENGTH), dtype="Int64")
    return frame


def write_csv(records, path):
    records_to_frame(records).to_csv(path, index=False, encoding="utf-8")
    logger.info(f"Wrote {len(records)} series to {path}")


def ingest_csv(path, schema=None):
    """
    Reads a series CSV into SeriesRecords (flag=0 series are kept, marked excluded).

    Args:
        path (str | Path): CSV file
        schema (dict): canonical column name -> column name in the file

    Returns:
        list[SeriesRecord]: one record per (phase, step), in file order
    """
    mapping = dict(DEFAULT_SCHEMA)
    if schema:
        mapping.update(schema)
    frame = pd.read_csv(path, float_precision="round_trip", encoding="utf-8")

    missing = [mapping[c] for c in CSV_COLUMNS if mapping[c] not in frame.columns]
    if missing:
        raise MissingColumn(f"{path}: missing column(s) {missing}")
    rename = {mapping[c]: c for c in CSV_COLUMNS}
    has_label = mapping["label"] in frame.columns
    if has_label:
        rename[mapping["label"]] = "label"
    frame = frame.rename(columns=rename)

    target = frame["target"].to_numpy(dtype=np.float64)
    if not np.all(np.isfinite(target)):
        bad = frame.loc[~np.isfinite(target), ["phase", "step", "minute"]].iloc[0].tolist()
        raise NonFiniteValue(f"{path}: non-finite target at (phase, step, minute) = {bad}")
    if frame.duplicated(subset=["phase", "step", "minute"]).any():
        bad = frame.loc[frame.duplicated(subset=["phase", "step", "minute"]), ["phase", "step", "minute"]].iloc[0].tolist()
        raise DuplicateKey(f"{path}: duplicated row (phase, step, minute) = {bad}")

    records = []
    for (phase, step), group in frame.groupby(["phase", "step"], sort=False):
        if len(group) != SERIES_LENGTH:
            raise RaggedSeries(f"{path}: series ({phase}, {step}) has {len(group)} rows, expected {SERIES_LENGTH}")
        group = group.sort_values("minute", kind="stable")
        if not np.array_equal(group["minute"].to_numpy(), np.arange(SERIES_LENGTH)):
            raise RaggedSeries(f"{path}: series ({phase}, {step}) minutes are not 0..{SERIES_LENGTH - 1}")
        flags = group["flag"].unique()
        if len(flags) != 1:
            raise InvalidConfig(f"{path}: series ({phase}, {step}) has mixed flags {flags.tolist()}")
        label = None
        if has_label:
            raw = group["label"].iloc[0]
            label = None if pd.isna(raw) else int(raw)
        setpoints = tuple(float(group[c].iloc[0]) for c in SETPOINT_COLUMNS)
        records.append(SeriesRecord(phase=int(phase), step=int(step), flag=int(flags[0]),
                                    setpoints=setpoints, values=group["target"].to_numpy(dtype=np.float64),
                                    label=label))

    logger.info(f"Ingested {len(records)} series from {path} ({len(included(records))} included)")
    return records


def write_split_manifest(split, path):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(split.to_manifest(), f, indent=2, sort_keys=True)
