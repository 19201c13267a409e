"""

*** Harness.py ***

Contains:
Utility experiments on the forecaster:
    exp1    TRTR / TSTR / TRSTR train-set strategies, evaluated on the real test set
    exp2    class-imbalance ablation: one synthesizer per (class, ratio) scenario, baseline
            forecasters on the ablated set and augmented forecasters on the ablated set
            plus the missing series re-sampled from the synthesizer
Seeded repetition, failure accounting, aggregation and output writers.

Seeds:
    Every forecaster run, synthetic draw and ablation choice takes
    derive_seed(base, experiment, arm, ..., run), so runs are independent of execution
    order and of the number of worker processes.

External dependencies:
numpy       -Numpy Python extension. http://numpy.org/
pandas      -Pandas. https://pandas.pydata.org/
torch       -PyTorch. https://pytorch.org/

Internal dependencies:
forecaster  -Windowing, training and evaluation
synthesizer -SynthInterface, build_synth, sample
metrics     -MetricBundle, trim_outliers

Changelog:
Date          Name              Change
__ _          __ _              ____ _
14/09/2024    Workbench team    Initial release
27/09/2024    Workbench team    Process pool execution, per-ratio aggregates
14/10/2024    Workbench team    Lazy train sets per task, ablation keeps one series per class

"""
# Imports
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd
import torch

from src.models.forecaster import (ForecastConfig, WindowSet, evaluate_forecaster, train_forecaster,
                                   windows_from_scaled)
from src.models.synthesizer import build_synth, sample
from src.utils.dataio import values_matrix
from src.utils.errors import (ClassTooSmall, DataLeakage, EmptyArm, InvalidConfig, NonFiniteLoss,
                              OutputExists, UnfittedModel)
from src.utils.labeling import as_trend_class, class_histogram
from src.utils.metrics import METRIC_NAMES, trim_outliers
from src.utils.seeding import derive_seed, numpy_rng

logger = logging.getLogger(__name__)


class Strategy(str, Enum):
    TRTR = "trtr"       # real only
    TSTR = "tstr"       # synthetic only
    TRSTR = "trstr"     # real + synthetic


EXP2_ARMS = ("baseline", "augmented")


@dataclass(frozen=True)
class Exp1Config:
    runs: int = 100
    synth_n: int = 256
    strategies: tuple = ("trtr", "tstr", "trstr")

    def __post_init__(self):
        object.__setattr__(self, "strategies", tuple(Strategy(s).value for s in self.strategies))
        if self.runs < 1 or self.synth_n < 1:
            raise InvalidConfig("exp1 needs runs >= 1 and synth_n >= 1")


@dataclass(frozen=True)
class Exp2Config:
    ratios: tuple = (0.25, 0.5, 0.75, 1.0)
    runs: int = 100
    classes: tuple = (0, 1, 2)

    def __post_init__(self):
        object.__setattr__(self, "ratios", tuple(float(r) for r in self.ratios))
        object.__setattr__(self, "classes", tuple(int(as_trend_class(c)) for c in self.classes))
        if self.runs < 1:
            raise InvalidConfig("exp2 needs runs >= 1")
        for r in self.ratios:
            if not 0.0 < r <= 1.0:
                raise InvalidConfig(f"ablation ratios must be in (0, 1], got {r}")


@dataclass(frozen=True)
class AblationSpec:
    class_index: int
    ratio: float
    n_init: int

    def __post_init__(self):
        if not 0.0 < self.ratio <= 1.0:
            raise InvalidConfig(f"ablation ratio must be in (0, 1], got {self.ratio}")
        if self.n_init < 0:
            raise InvalidConfig("n_init cannot be negative")

    @property
    def n_ablated(self):
        # never below one series while the class is present
        kept = int(math.floor(self.ratio * self.n_init + 0.5))
        return max(1, kept) if self.n_init else 0

    @property
    def n_missing(self):
        return self.n_init - self.n_ablated


@dataclass(frozen=True, eq=False)
class ForecastTask:
    """
    One forecaster training: a pure function of its fields.

    The train set is real ++ synthetic, assembled only when the task runs; ``real`` is
    shared between the tasks of a scenario.
    """
    arm: str
    run: int
    seed: int
    real: Optional[np.ndarray]      # scaled (n, 240)
    synthetic: Optional[np.ndarray]
    test_inputs: np.ndarray
    test_targets: np.ndarray
    config: ForecastConfig
    class_index: int = -1
    ratio: float = math.nan

    def train_set(self):
        parts = [p for p in (self.real, self.synthetic) if p is not None]
        return parts[0] if len(parts) == 1 else np.concatenate(parts)

    @property
    def train_size(self):
        return sum(len(p) for p in (self.real, self.synthetic) if p is not None)


@dataclass
class ExperimentManifest:
    experiment: str
    base_seed: int
    runs: int
    config: dict
    rows: list = field(default_factory=list)
    aggregates: list = field(default_factory=list)
    failures: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def arms(self):
        return sorted({r["arm"] for r in self.rows})

    def to_dict(self):
        return _json_safe(asdict(self))


def _json_safe(value):
    if isinstance(value, float):
        return None if math.isnan(value) or math.isinf(value) else value
    if isinstance(value, dict):
        return {str(k): _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, np.generic):
        return _json_safe(value.item())
    return value


#_______Runs_________#
def run_task(task):
    """Trains and scores one forecaster. Diverged trainings come back as failed rows."""
    row = {"arm": task.arm, "class_index": task.class_index, "ratio": task.ratio, "run": task.run,
           "seed": str(task.seed), "train_size": int(task.train_size), "status": "ok", "error": ""}
    try:
        windows = windows_from_scaled(task.train_set(), task.config)
        model, _ = train_forecaster(windows, task.config, task.seed)
        bundle = evaluate_forecaster(model, WindowSet(task.test_inputs, task.test_targets))
        row.update(bundle.to_dict())
    except NonFiniteLoss as err:
        logger.warning(f"{task.arm} run {task.run} failed: {err}")
        row.update({"status": "failed", "error": f"NonFiniteLoss: {err}"})
        row.update({m: math.nan for m in METRIC_NAMES})
        row.update({"mape_defined": False, "mase_defined": False})
    return row


def _worker_init():
    torch.set_num_threads(1)


def execute(tasks, jobs=1):
    """Runs tasks sequentially or on a process pool; rows ordered by (class, ratio, arm, run)."""
    if jobs <= 1:
        # same single-thread kernels as the pool workers, results identical for any jobs
        threads = torch.get_num_threads()
        _worker_init()
        try:
            rows = [run_task(t) for t in tasks]
        finally:
            torch.set_num_threads(threads)
    else:
        with ProcessPoolExecutor(max_workers=jobs, initializer=_worker_init) as pool:
            rows = list(pool.map(run_task, tasks))
    return sorted(rows, key=lambda r: (r["class_index"], -1.0 if math.isnan(r["ratio"]) else r["ratio"],
                                       r["arm"], r["run"]))


def assert_no_leakage(train_records, test_keys):
    overlap = {r.key for r in train_records} & set(test_keys)
    if overlap:
        raise DataLeakage(f"{len(overlap)} test series entered a training set, e.g. {sorted(overlap)[0]}")


def _scaled(split, records):
    return split.scaler.apply(values_matrix(records))


def run_exp1(split, synth, runs=100, synth_n=256, seed=0, forecast_cfg=ForecastConfig(), jobs=1,
             strategies=("trtr", "tstr", "trstr")):
    """
    Experiment 1: for every run and strategy, train one forecaster and score it on the
    real test set. TSTR and TRSTR draw a fresh synth_n-sample set per (strategy, run).
    """
    cfg = Exp1Config(runs=runs, synth_n=synth_n, strategies=strategies)
    if cfg.strategies != ("trtr",) and not synth.fitted:
        raise UnfittedModel("exp1 needs a synthesizer fitted on the train split")
    assert_no_leakage(split.train, split.test_keys())
    real = _scaled(split, split.train)
    test_windows = windows_from_scaled(_scaled(split, split.test), forecast_cfg)

    tasks = []
    for run in range(cfg.runs):
        for strategy in cfg.strategies:
            synthetic = None
            if strategy != Strategy.TRTR.value:
                synthetic = sample(synth, cfg.synth_n, None, derive_seed(seed, "exp1-sample", strategy, run))
            tasks.append(ForecastTask(arm=strategy, run=run, seed=derive_seed(seed, "exp1", strategy, run),
                                      real=None if strategy == Strategy.TSTR.value else real,
                                      synthetic=synthetic, test_inputs=test_windows.inputs,
                                      test_targets=test_windows.targets, config=forecast_cfg))
    logger.info(f"Experiment 1: {len(tasks)} forecasters ({cfg.runs} runs x {len(cfg.strategies)} strategies)")
    rows = execute(tasks, jobs)

    manifest = ExperimentManifest(
        experiment="exp1", base_seed=int(seed), runs=cfg.runs,
        config={"exp1": asdict(cfg), "forecaster": forecast_cfg.to_dict(), "synth_kind": synth.kind},
        rows=rows, failures=sum(r["status"] != "ok" for r in rows),
        extra={"split": _split_summary(split), "train_size": len(split.train)})
    manifest.aggregates = aggregate(manifest)
    return manifest


def ablate(train_records, spec, seed):
    """Set_{i,r}: the train records minus n_missing class-i series chosen uniformly at random."""
    members = [k for k, r in enumerate(train_records) if r.label == spec.class_index]
    rng = numpy_rng(derive_seed(seed, "exp2-remove", spec.class_index, spec.ratio))
    removed = set(rng.choice(members, size=spec.n_missing, replace=False).tolist()) if spec.n_missing else set()
    kept = [r for k, r in enumerate(train_records) if k not in removed]
    return kept, sorted(train_records[k].key for k in removed)


def run_exp2(split, ratios=(0.25, 0.5, 0.75, 1.0), runs=100, seed=0, synth_factory=None,
             forecast_cfg=ForecastConfig(), jobs=1, classes=(0, 1, 2)):
    """
    Experiment 2: class-imbalance ablation and synthetic re-augmentation.

    Args:
        split (DatasetSplit): labeled train split
        synth_factory (callable): (class_index, ratio) -> unfitted SynthInterface
    """
    cfg = Exp2Config(ratios=ratios, runs=runs, classes=classes)
    if any(r.label is None for r in split.train):
        raise InvalidConfig("exp2 needs a labeled train split")
    synth_factory = synth_factory or (lambda i, r: build_synth("vq"))
    assert_no_leakage(split.train, split.test_keys())
    histogram = class_histogram(split.train)
    test_windows = windows_from_scaled(_scaled(split, split.test), forecast_cfg)

    tasks, scenarios, synth_kind = [], [], None
    for i in cfg.classes:
        if histogram[i] == 0:
            raise ClassTooSmall(f"class {i} has no train series to ablate")
        for r in cfg.ratios:
            spec = AblationSpec(class_index=i, ratio=r, n_init=histogram[i])
            kept, removed_keys = ablate(list(split.train), spec, seed)
            assert_no_leakage(kept, split.test_keys())
            ablated = _scaled(split, kept)
            labels = [rec.label for rec in kept]

            synth = synth_factory(i, r)
            synth.fit(ablated, labels, seed=derive_seed(seed, "exp2-synth", i, r))
            synth_kind = synth.kind
            logger.info(f"Scenario class {i}, ratio {r}: {spec.n_ablated}/{spec.n_init} kept, "
                        f"{spec.n_missing} to re-sample")

            baseline_hist = class_histogram(kept)
            augmented_hist = dict(baseline_hist)
            augmented_hist[i] += spec.n_missing
            scenarios.append({"class_index": i, "ratio": r, "n_init": spec.n_init, "n_ablated": spec.n_ablated,
                              "n_missing": spec.n_missing, "removed_keys": [list(k) for k in removed_keys],
                              "baseline_histogram": baseline_hist, "augmented_histogram": augmented_hist})

            for run in range(cfg.runs):
                synthetic = sample(synth, spec.n_missing, i, derive_seed(seed, "exp2-sample", i, r, run))
                for arm, extra in zip(EXP2_ARMS, (None, synthetic)):
                    tasks.append(ForecastTask(arm=arm, run=run, seed=derive_seed(seed, "exp2", arm, i, r, run),
                                              real=ablated, synthetic=extra, test_inputs=test_windows.inputs,
                                              test_targets=test_windows.targets, config=forecast_cfg,
                                              class_index=i, ratio=r))
    logger.info(f"Experiment 2: {len(scenarios)} synthesizers fitted, {len(tasks)} forecasters to train")
    rows = execute(tasks, jobs)

    manifest = ExperimentManifest(
        experiment="exp2", base_seed=int(seed), runs=cfg.runs,
        config={"exp2": asdict(cfg), "forecaster": forecast_cfg.to_dict(), "synth_kind": synth_kind},
        rows=rows, failures=sum(r["status"] != "ok" for r in rows),
        extra={"split": _split_summary(split), "train_histogram": histogram,
               "n_synthesizers": len(scenarios), "scenarios": scenarios})
    manifest.aggregates = aggregate(manifest, group_by=("arm", "class_index", "ratio"))
    manifest.extra["aggregates_by_ratio"] = aggregate(manifest, group_by=("arm", "ratio"))
    return manifest


def _split_summary(split):
    return {"split_seed": split.split_seed, "n_train": len(split.train), "n_test": len(split.test),
            "test_keys": sorted([list(k) for k in split.test_keys()]), "scaler": split.scaler.to_dict()}


#_______Aggregation_________#
def _mean_std(values):
    n = len(values)
    mean = math.fsum(values) / n
    if n == 1:
        return mean, 0.0, True
    return mean, math.sqrt(math.fsum((v - mean) ** 2 for v in values) / (n - 1)), False


def _rows(source):
    return source.rows if isinstance(source, ExperimentManifest) else list(source)


def aggregate(source, group_by=("arm",)):
    """
    Sample mean and standard deviation (n - 1 denominator) per metric and group, over
    successful rows. A group with a single row reports std 0 and ``degenerate`` True.

    Args:
        source (ExperimentManifest | iterable of row dicts)
        group_by (tuple): row fields defining a group

    Returns:
        list[dict]: one entry per (group, metric), sorted by group
    """
    rows = _rows(source)
    groups = {}
    for row in rows:
        groups.setdefault(tuple(row[k] for k in group_by), []).append(row)

    table = []
    for key in sorted(groups, key=lambda k: tuple(str(v) for v in k)):
        ok = [r for r in groups[key] if r["status"] == "ok"]
        if not ok:
            raise EmptyArm(f"no successful run in group {dict(zip(group_by, key))}")
        for metric in METRIC_NAMES:
            flag = f"{metric}_defined"
            values = [float(r[metric]) for r in ok if r.get(flag, True) in (True, "True", 1)]
            entry = dict(zip(group_by, key))
            entry.update({"metric": metric, "n": len(values), "failed": len(groups[key]) - len(ok)})
            if values:
                mean, std, degenerate = _mean_std(values)
                entry.update({"mean": mean, "std": std, "degenerate": degenerate})
            else:
                entry.update({"mean": math.nan, "std": math.nan, "degenerate": True})
            table.append(entry)
    return table


def histogram_values(source, metric, fraction=0.05, group_by=("arm",)):
    """Trimmed per-group metric values, long format (group columns + value)."""
    rows = [r for r in _rows(source) if r["status"] == "ok" and r.get(f"{metric}_defined", True) in (True, "True", 1)]
    frame_rows = []
    groups = {}
    for row in rows:
        groups.setdefault(tuple(row[k] for k in group_by), []).append(float(row[metric]))
    for key in sorted(groups, key=lambda k: tuple(str(v) for v in k)):
        for value in trim_outliers(groups[key], fraction):
            frame_rows.append(dict(zip(group_by, key), value=value))
    return pd.DataFrame(frame_rows, columns=list(group_by) + ["value"])


def summary_table(aggregates, group_by=("arm",)):
    """Wide table: one line per group, mean and std columns per metric."""
    frame = pd.DataFrame(aggregates)
    if frame.empty:
        return frame
    wide = frame.pivot_table(index=list(group_by), columns="metric", values=["mean", "std"], aggfunc="first")
    wide.columns = [f"{metric}_{stat}" for stat, metric in wide.columns]
    return wide.reset_index()


#_______Outputs_________#
def prepare_output_dir(out_dir, force=False):
    out_dir = Path(out_dir)
    if out_dir.exists() and any(out_dir.iterdir()) and not force:
        raise OutputExists(f"{out_dir} is not empty (use --force to overwrite)")
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir


def write_outputs(manifest, out_dir, force=False, trim_fraction=0.05):
    """manifest.json, rows.csv, aggregates.csv and hist_<metric>.csv under out_dir."""
    out_dir = prepare_output_dir(out_dir, force)
    group_by = ("arm",) if manifest.experiment == "exp1" else ("arm", "class_index", "ratio")
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as f:
        json.dump(manifest.to_dict(), f, indent=2, sort_keys=True)
    pd.DataFrame(manifest.rows).to_csv(out_dir / "rows.csv", index=False, encoding="utf-8")
    pd.DataFrame(manifest.aggregates).to_csv(out_dir / "aggregates.csv", index=False, encoding="utf-8")
    for metric in METRIC_NAMES:
        histogram_values(manifest, metric, trim_fraction, group_by).to_csv(
            out_dir / f"hist_{metric}.csv", index=False, encoding="utf-8")
    logger.info(f"Experiment outputs written to {out_dir}")
    return out_dir


def read_rows(path):
    frame = pd.read_csv(path, float_precision="round_trip", keep_default_na=True)
    frame["error"] = frame["error"].fillna("")
    return frame.to_dict(orient="records")


def report_from_rows(rows_path, out_dir, force=False, trim_fraction=0.05):
    """Recomputes aggregates, trimmed histograms and the per-arm summary table from a rows.csv."""
    rows = read_rows(rows_path)
    scenario = any(not math.isnan(float(r["ratio"])) for r in rows)
    group_by = ("arm", "class_index", "ratio") if scenario else ("arm",)
    out_dir = prepare_output_dir(out_dir, force)
    aggregates = aggregate(rows, group_by)
    pd.DataFrame(aggregates).to_csv(out_dir / "aggregates.csv", index=False, encoding="utf-8")
    summary = summary_table(aggregates, group_by)
    summary.to_csv(out_dir / "summary.csv", index=False, encoding="utf-8")
    for metric in METRIC_NAMES:
        histogram_values(rows, metric, trim_fraction, group_by).to_csv(
            out_dir / f"hist_{metric}.csv", index=False, encoding="utf-8")
    return summary
