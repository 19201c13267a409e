"""

*** Forecaster.py ***

Contains:
Downstream utility model: one-layer LSTM followed by an affine head that predicts the
next 30 minutes (3 sub-sampled points) of the room temperature from the previous 210
minutes (21 sub-sampled points). Windowing, training with early stopping, prediction,
gradient checking and checkpoints.

Units:
    Everything runs in scaled (standardized) units, float64 on CPU.

External dependencies:
numpy       -Numpy Python extension. http://numpy.org/
torch       -PyTorch. https://pytorch.org/
pandas      -Pandas. https://pandas.pydata.org/

Internal dependencies:
dataio      -DatasetSplit, values_matrix
seriestools -Sub-sampling
metrics     -evaluate_windows
checkpoint  -Binary checkpoint format

Changelog:
Date          Name              Change
__ _          __ _              ____ _
07/09/2024    Workbench team    Initial release
21/09/2024    Workbench team    Sliding windows and gradient check helper

References:
Short       Author,Year             Title
___ _       _________ _             ___ _
[Hoch97]    Hochreiter/Schmidhuber  Long short-term memory

"""
# Imports
import copy
import logging
import math
import time
from collections import OrderedDict
from dataclasses import asdict, dataclass

import numpy as np
import pandas as pd
import torch
from torch import nn

from src.utils.checkpoint import read_checkpoint, write_checkpoint
from src.utils.dataio import values_matrix
from src.utils.errors import BadWindow, EmptyDataset, InvalidConfig, NonFiniteLoss
from src.utils.metrics import evaluate_windows
from src.utils.seeding import derive_seed, numpy_rng, seed_torch, torch_generator
from src.utils.seriestools import SERIES_LENGTH, SeriesTools

logger = logging.getLogger(__name__)

DTYPE = torch.float64
CHECKPOINT_KIND = "forecaster"


@dataclass(frozen=True)
class ForecastConfig:
    hidden_size: int = 64
    learning_rate: float = 1e-3
    epochs: int = 300
    batch_size: int = 16
    patience: int = 20
    val_fraction: float = 0.1
    input_len: int = 21             # sub-sampled points (210 min)
    horizon: int = 3                # sub-sampled points (30 min)
    factor: int = 10
    subsample_mode: str = "stride"
    window_stride: int = 0          # 0 = one window per series, else offset stride [min]
    log_every: int = 50

    def __post_init__(self):
        self._validate()

    def _validate(self):
        for name in ("hidden_size", "epochs", "batch_size", "patience", "input_len", "horizon", "factor"):
            if getattr(self, name) < 1:
                raise InvalidConfig(f"{name} must be >= 1, got {getattr(self, name)}")
        if not self.learning_rate > 0:
            raise InvalidConfig(f"learning_rate must be positive, got {self.learning_rate}")
        if not 0.0 < self.val_fraction < 1.0:
            raise InvalidConfig(f"val_fraction must be in (0, 1), got {self.val_fraction}")
        if self.subsample_mode not in ("stride", "mean"):
            raise InvalidConfig(f"unknown subsample_mode: {self.subsample_mode}")
        if (self.input_len + self.horizon) * self.factor != SERIES_LENGTH:
            raise InvalidConfig(f"(input_len + horizon) * factor must equal {SERIES_LENGTH}")
        if self.window_stride < 0:
            raise InvalidConfig("window_stride cannot be negative")

    @property
    def window_len(self):
        return self.input_len + self.horizon

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True, eq=False)
class WindowPair:
    input: np.ndarray
    target: np.ndarray


@dataclass(frozen=True, eq=False)
class WindowSet:
    """Stacked windows: inputs (n, input_len), targets (n, horizon)."""
    inputs: np.ndarray
    targets: np.ndarray

    def __len__(self):
        return self.inputs.shape[0]

    def pairs(self):
        return [WindowPair(i, t) for i, t in zip(self.inputs, self.targets)]

    def concat(self, other):
        return WindowSet(np.concatenate([self.inputs, other.inputs]), np.concatenate([self.targets, other.targets]))


def _window_offsets(cfg):
    if cfg.window_stride == 0:
        return [0]
    if cfg.subsample_mode == "stride":
        last = SERIES_LENGTH - 1 - (cfg.window_len - 1) * cfg.factor
    else:
        last = SERIES_LENGTH - cfg.window_len * cfg.factor
    return list(range(0, last + 1, cfg.window_stride))


def windows_from_scaled(matrix, cfg=ForecastConfig()):
    """Windows of already-scaled (n, 240) series; one per series unless cfg.window_stride > 0."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    if matrix.shape[1] != SERIES_LENGTH:
        raise BadWindow(f"series must have {SERIES_LENGTH} samples, got {matrix.shape[1]}")
    inputs, targets = [], []
    for offset in _window_offsets(cfg):
        span = matrix[:, offset:offset + cfg.window_len * cfg.factor]
        if span.shape[1] < cfg.window_len * cfg.factor:
            # stride mode only reads every factor-th sample, edge padding never enters the result
            span = np.pad(span, ((0, 0), (0, cfg.window_len * cfg.factor - span.shape[1])), mode="edge")
        sub = np.stack([SeriesTools.subsample(row, cfg.factor, cfg.subsample_mode) for row in span]) \
            if len(span) else np.zeros((0, cfg.window_len))
        inputs.append(sub[:, :cfg.input_len])
        targets.append(sub[:, cfg.input_len:])
    return WindowSet(np.concatenate(inputs), np.concatenate(targets))


def make_windows(split, cfg=ForecastConfig()):
    """Train and test windows of a DatasetSplit, scaled with split.scaler then sub-sampled."""
    train = windows_from_scaled(split.scaler.apply(values_matrix(split.train)), cfg)
    test = windows_from_scaled(split.scaler.apply(values_matrix(split.test)), cfg)
    return train, test


class ForecastNet(nn.Module):
    def __init__(self, hidden_size=64, horizon=3):
        super().__init__()
        self.lstm = nn.LSTM(input_size=1, hidden_size=hidden_size, num_layers=1, batch_first=True, dtype=DTYPE)
        self.head = nn.Linear(hidden_size, horizon, dtype=DTYPE)

    def forward(self, x):
        # x: (B, input_len)
        out, _ = self.lstm(x.unsqueeze(-1))
        return self.head(out[:, -1, :])


@dataclass(eq=False)
class ForecastModel:
    net: ForecastNet
    config: ForecastConfig

    def parameters_finite(self):
        return all(torch.isfinite(p).all().item() for p in self.net.parameters())

    def state_arrays(self):
        return OrderedDict((name, t.detach().cpu().numpy().copy()) for name, t in self.net.state_dict().items())


@dataclass(frozen=True)
class TrainReport:
    train_loss: tuple
    val_loss: tuple
    selected_epoch: int
    wall_time: float
    stopped_early: bool = False

    def to_frame(self):
        return pd.DataFrame({"epoch": np.arange(len(self.train_loss)),
                             "train_loss": self.train_loss, "val_loss": self.val_loss})

    def write_csv(self, path):
        self.to_frame().to_csv(path, index=False, encoding="utf-8")


def build_model(cfg=ForecastConfig(), seed=0):
    seed_torch(derive_seed(seed, "init"))
    return ForecastModel(net=ForecastNet(cfg.hidden_size, cfg.horizon), config=cfg)


def _as_tensor(x):
    return torch.as_tensor(np.asarray(x, dtype=np.float64), dtype=DTYPE)


def _validation_cut(n, fraction):
    n_val = int(math.floor(fraction * n + 0.5))
    return min(n - 1, max(1, n_val))


def train_forecaster(windows, cfg=ForecastConfig(), seed=0):
    """
    Fits a ForecastModel by Adam on the MSE of the 3-point target.

    A validation share (cfg.val_fraction) of the windows is held out for early
    stopping; the parameters of the epoch with the lowest validation loss are restored.

    Returns:
        (ForecastModel, TrainReport)
    """
    n = len(windows)
    if n < 2:
        raise EmptyDataset(f"training needs at least 2 windows, got {n}")
    started = time.perf_counter()

    perm = numpy_rng(derive_seed(seed, "validation")).permutation(n)
    n_val = _validation_cut(n, cfg.val_fraction)
    val_idx, fit_idx = perm[:n_val], perm[n_val:]
    x_fit, y_fit = _as_tensor(windows.inputs[fit_idx]), _as_tensor(windows.targets[fit_idx])
    x_val, y_val = _as_tensor(windows.inputs[val_idx]), _as_tensor(windows.targets[val_idx])

    model = build_model(cfg, seed)
    net = model.net
    optimizer = torch.optim.Adam(net.parameters(), lr=cfg.learning_rate)
    loss_fn = nn.MSELoss()
    shuffle_gen = torch_generator(derive_seed(seed, "shuffle"))

    train_hist, val_hist = [], []
    best_val, best_epoch, best_state = math.inf, 0, None
    stopped_early = False
    for epoch in range(cfg.epochs):
        net.train()
        order = torch.randperm(len(fit_idx), generator=shuffle_gen)
        running, seen = 0.0, 0
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            optimizer.zero_grad()
            loss = loss_fn(net(x_fit[batch]), y_fit[batch])
            if not torch.isfinite(loss):
                raise NonFiniteLoss(f"training loss became {loss.item()} at epoch {epoch}")
            loss.backward()
            optimizer.step()
            running += loss.item() * len(batch)
            seen += len(batch)

        net.eval()
        with torch.no_grad():
            val = loss_fn(net(x_val), y_val).item()
        if not math.isfinite(val):
            raise NonFiniteLoss(f"validation loss became {val} at epoch {epoch}")
        train_hist.append(running / seen)
        val_hist.append(val)

        if val < best_val:
            best_val, best_epoch = val, epoch
            best_state = copy.deepcopy(net.state_dict())
        elif epoch - best_epoch >= cfg.patience:
            stopped_early = True
            break
        if cfg.log_every and (epoch + 1) % cfg.log_every == 0:
            logger.debug(f"epoch {epoch + 1}: train {train_hist[-1]:.6f}, val {val:.6f}")

    net.load_state_dict(best_state)
    net.eval()
    report = TrainReport(train_loss=tuple(train_hist), val_loss=tuple(val_hist), selected_epoch=best_epoch,
                         wall_time=time.perf_counter() - started, stopped_early=stopped_early)
    logger.debug(f"Forecaster trained: {len(train_hist)} epochs, selected {best_epoch} (val {best_val:.6f})")
    return model, report


def predict_batch(model, inputs):
    inputs = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    if not np.all(np.isfinite(inputs)):
        raise BadWindow("forecast input contains non-finite values")
    if inputs.shape[1] != model.config.input_len:
        raise BadWindow(f"forecast input needs {model.config.input_len} points, got {inputs.shape[1]}")
    model.net.eval()
    with torch.no_grad():
        return model.net(_as_tensor(inputs)).numpy()


def predict(model, input):
    """3-point forecast of a single 21-point input window."""
    return predict_batch(model, np.asarray(input, dtype=np.float64)[None, :])[0]


def evaluate_forecaster(model, windows):
    """MetricBundle of the model over a WindowSet."""
    return evaluate_windows(windows.targets, predict_batch(model, windows.inputs))


def gradient_check(model, inputs, targets, indices, step=1e-4):
    """
    Autograd gradient of the MSE loss against central finite differences, over the
    flattened parameter entries listed in ``indices``.

    Returns:
        (analytic, numeric): np.ndarray pair
    """
    net = model.net
    x, y = _as_tensor(np.atleast_2d(inputs)), _as_tensor(np.atleast_2d(targets))
    params = list(net.parameters())
    base = nn.utils.parameters_to_vector(params).detach().clone()

    def loss_at(vector):
        nn.utils.vector_to_parameters(vector, params)
        with torch.no_grad():
            return nn.functional.mse_loss(net(x), y).item()

    nn.utils.vector_to_parameters(base, params)
    net.zero_grad()
    nn.functional.mse_loss(net(x), y).backward()
    analytic = torch.cat([p.grad.reshape(-1) for p in params]).detach().numpy()[list(indices)]

    numeric = []
    for i in indices:
        plus, minus = base.clone(), base.clone()
        plus[i] += step
        minus[i] -= step
        numeric.append((loss_at(plus) - loss_at(minus)) / (2.0 * step))
    nn.utils.vector_to_parameters(base, params)
    net.zero_grad()
    return analytic, np.array(numeric)


def save_forecaster(model, path):
    write_checkpoint(path, CHECKPOINT_KIND, {"config": model.config.to_dict()}, model.state_arrays())


def load_forecaster(path):
    _, meta, params = read_checkpoint(path, expected_kind=CHECKPOINT_KIND)
    cfg = ForecastConfig(**meta["config"])
    net = ForecastNet(cfg.hidden_size, cfg.horizon)
    net.load_state_dict(OrderedDict((k, torch.as_tensor(v, dtype=DTYPE)) for k, v in params.items()))
    net.eval()
    return ForecastModel(net=net, config=cfg)
