"""

*** VQSynth.py ***

Contains:
Class-conditional synthesizer built on a vector-quantized autoencoder:
    stage 1  1-D convolutional encoder 240 -> (T x d), EMA codebook, transposed
             convolutional decoder (T x d) -> 240; loss = reconstruction MSE + beta * commitment
    stage 2  autoregressive LSTM prior over the T token indices, conditioned through its
             start token (one per trend class plus an unconditioned one)
Sampling draws T tokens from the prior and decodes them.

External dependencies:
numpy       -Numpy Python extension. http://numpy.org/
torch       -PyTorch. https://pytorch.org/

Internal dependencies:
codebook    -EMA codebook
synthesizer -SynthInterface
checkpoint  -Binary checkpoint format

Changelog:
Date          Name              Change
__ _          __ _              ____ _
11/09/2024    Workbench team    Initial release
25/09/2024    Workbench team    Codebook usage report, unconditioned start token
14/10/2024    Workbench team    Stage budgets 2000 / 10000 epochs, rejects classes absent from training

References:
Short       Author,Year             Title
___ _       _________ _             ___ _
[Oord17]    van den Oord,2017       Neural discrete representation learning
[Lee23]     Lee,2023                Vector quantized time series generation with a bidirectional prior model

"""
# Imports
import logging
import math
import warnings
from collections import OrderedDict
from dataclasses import asdict, dataclass

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from src.models.codebook import Codebook
from src.models.synthesizer import SynthInterface, check_training_set
from src.utils.checkpoint import read_checkpoint, write_checkpoint
from src.utils.errors import (ClassTooSmall, CodebookCollapse, EmptyDataset, InvalidConfig, NonFiniteLoss,
                              UnfittedModel, UnknownClass)
from src.utils.labeling import N_CLASSES
from src.utils.seeding import derive_seed, seed_torch, torch_generator
from src.utils.seriestools import SERIES_LENGTH

logger = logging.getLogger(__name__)

DTYPE = torch.float64
CHECKPOINT_KIND = "vqsynth"
UNCONDITIONED = N_CLASSES           # start token index of unlabeled sequences (offset by K)


@dataclass(frozen=True)
class VQConfig:
    n_codes: int = 64               # K
    code_dim: int = 32              # d
    downsample: int = 8             # 240 / 8 = 30 tokens
    hidden_channels: int = 64
    beta: float = 0.25
    decay: float = 0.99
    dead_code_threshold: float = 1e-2
    vq_epochs: int = 2000
    vq_lr: float = 1e-3
    prior_epochs: int = 10000
    prior_lr: float = 1e-3
    prior_hidden: int = 128
    prior_embedding: int = 64
    batch_size: int = 32
    log_every: int = 100

    def __post_init__(self):
        self._validate()

    def _validate(self):
        if self.n_codes < 2:
            raise InvalidConfig(f"n_codes must be >= 2, got {self.n_codes}")
        if self.downsample < 2 or self.downsample & (self.downsample - 1):
            raise InvalidConfig(f"downsample must be a power of two >= 2, got {self.downsample}")
        if SERIES_LENGTH % self.downsample:
            raise InvalidConfig(f"downsample must divide {SERIES_LENGTH}")
        for name in ("code_dim", "hidden_channels", "vq_epochs", "prior_epochs", "prior_hidden",
                     "prior_embedding", "batch_size"):
            if getattr(self, name) < 1:
                raise InvalidConfig(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.beta < 0 or not 0.0 <= self.decay <= 1.0:
            raise InvalidConfig("beta must be >= 0 and decay in [0, 1]")
        if self.vq_lr <= 0 or self.prior_lr <= 0:
            raise InvalidConfig("learning rates must be positive")

    @property
    def n_tokens(self):
        return SERIES_LENGTH // self.downsample

    def to_dict(self):
        return asdict(self)


class Encoder(nn.Module):
    """(B, 240) -> (B, T, d) through log2(downsample) stride-2 convolutions."""
    def __init__(self, cfg):
        super().__init__()
        layers, channels = [], 1
        for _ in range(int(math.log2(cfg.downsample))):
            layers += [nn.Conv1d(channels, cfg.hidden_channels, 4, stride=2, padding=1, dtype=DTYPE), nn.ReLU()]
            channels = cfg.hidden_channels
        layers.append(nn.Conv1d(channels, cfg.code_dim, 3, padding=1, dtype=DTYPE))
        self.net = nn.Sequential(*layers)

    def forward(self, x):
        return self.net(x.unsqueeze(1)).transpose(1, 2)


class Decoder(nn.Module):
    """(B, T, d) -> (B, 240), mirror of the encoder."""
    def __init__(self, cfg):
        super().__init__()
        n_up = int(math.log2(cfg.downsample))
        layers = [nn.Conv1d(cfg.code_dim, cfg.hidden_channels, 3, padding=1, dtype=DTYPE), nn.ReLU()]
        for i in range(n_up):
            out = 1 if i == n_up - 1 else cfg.hidden_channels
            layers.append(nn.ConvTranspose1d(cfg.hidden_channels, out, 4, stride=2, padding=1, dtype=DTYPE))
            if i < n_up - 1:
                layers.append(nn.ReLU())
        self.net = nn.Sequential(*layers)

    def forward(self, q):
        return self.net(q.transpose(1, 2)).squeeze(1)


class TokenPrior(nn.Module):
    """Next-token model: start token (K + class) then codebook indices 0..K-1."""
    def __init__(self, cfg):
        super().__init__()
        self.n_codes = cfg.n_codes
        self.embed = nn.Embedding(cfg.n_codes + N_CLASSES + 1, cfg.prior_embedding, dtype=DTYPE)
        self.lstm = nn.LSTM(cfg.prior_embedding, cfg.prior_hidden, batch_first=True, dtype=DTYPE)
        self.head = nn.Linear(cfg.prior_hidden, cfg.n_codes, dtype=DTYPE)

    def forward(self, inputs, state=None):
        out, state = self.lstm(self.embed(inputs), state)
        return self.head(out), state


def _start_tokens(n_codes, conditions):
    return (n_codes + torch.as_tensor(conditions, dtype=torch.long)).unsqueeze(1)


class VQSynth(SynthInterface):
    """
    Vector-quantized synthesizer.

    Atributos:
        encoder, decoder, codebook, prior (nn.Module)
        class_freq (np.ndarray | None): empirical class frequencies seen by the prior
        vq_trained, prior_trained (bool)
    """
    kind = "vq"

    def __init__(self, cfg=VQConfig()):
        self.cfg = cfg
        self.encoder = Encoder(cfg)
        self.decoder = Decoder(cfg)
        self.codebook = Codebook(cfg.n_codes, cfg.code_dim, cfg.decay)
        self.prior = TokenPrior(cfg)
        self.class_freq = None
        self.vq_trained = False
        self.prior_trained = False
        self.report = {}
        self.scaler = None

    @property
    def fitted(self):
        return self.vq_trained and self.prior_trained

    def modules(self):
        return OrderedDict(encoder=self.encoder, decoder=self.decoder, codebook=self.codebook, prior=self.prior)

    #_______Autoencoder_________#
    def encode(self, x):
        return self.encoder(torch.as_tensor(x, dtype=DTYPE))

    def tokens(self, series):
        """(n, T) token indices of scaled series."""
        self.encoder.eval()
        with torch.no_grad():
            z = self.encode(np.atleast_2d(series))
            return self.codebook.nearest(z.reshape(-1, self.cfg.code_dim)).reshape(z.shape[:2]).numpy()

    def decode_tokens(self, tokens):
        self.decoder.eval()
        with torch.no_grad():
            q = self.codebook.embedding[torch.as_tensor(tokens, dtype=torch.long)]
            return self.decoder(q).numpy()

    def reconstruct(self, series):
        return self.decode_tokens(self.tokens(series))

    def reconstruction_mse(self, series):
        series = np.atleast_2d(np.asarray(series, dtype=np.float64))
        return float(np.mean((self.reconstruct(series) - series) ** 2))

    #_______Prior_________#
    def next_token_distributions(self, tokens, cls=None):
        """(T, K) next-token probabilities along a token sequence, conditioned as for sampling."""
        tokens = np.asarray(tokens, dtype=np.int64)
        condition = UNCONDITIONED if cls is None else int(cls)
        inputs = torch.cat([_start_tokens(self.cfg.n_codes, [condition]),
                            torch.as_tensor(tokens[None, :-1], dtype=torch.long)], dim=1)
        self.prior.eval()
        with torch.no_grad():
            logits, _ = self.prior(inputs)
            return torch.softmax(logits[0], dim=-1).numpy()

    def sequence_probability(self, tokens, cls=None):
        probs = self.next_token_distributions(tokens, cls)
        return float(np.exp(np.sum(np.log(probs[np.arange(len(tokens)), tokens]))))

    #_______SynthInterface_________#
    def fit(self, series, labels=None, seed=0):
        train_vqvae(series, self.cfg, seed, model=self)
        train_prior(self, series, labels, self.cfg, seed)
        return self

    def sample(self, n, cls=None, seed=0):
        if not self.fitted:
            raise UnfittedModel("VQSynth sampled before both training stages completed")
        gen = torch_generator(derive_seed(seed, "vq-sample", "all" if cls is None else int(cls)))
        if cls is not None:
            if self.class_freq is None:
                raise UnknownClass("prior was fitted without labels, class-conditioned sampling is unavailable")
            if self.class_freq[int(cls)] == 0:
                raise ClassTooSmall(f"no training series of class {int(cls)} to condition on")
            conditions = torch.full((n,), int(cls), dtype=torch.long)
        elif self.class_freq is not None:
            conditions = torch.multinomial(torch.as_tensor(self.class_freq, dtype=DTYPE), n,
                                           replacement=True, generator=gen)
        else:
            conditions = torch.full((n,), UNCONDITIONED, dtype=torch.long)

        self.prior.eval()
        tokens = torch.zeros((n, self.cfg.n_tokens), dtype=torch.long)
        with torch.no_grad():
            current, state = _start_tokens(self.cfg.n_codes, conditions), None
            for t in range(self.cfg.n_tokens):
                logits, state = self.prior(current, state)
                probs = torch.softmax(logits[:, -1, :], dim=-1)
                tokens[:, t] = torch.multinomial(probs, 1, generator=gen).squeeze(1)
                current = tokens[:, t:t + 1]
        return self.decode_tokens(tokens.numpy())

    #_______Checkpoint_________#
    def save(self, path, scaler=None):
        if not self.fitted:
            raise UnfittedModel("only fitted synthesizers can be saved")
        params = OrderedDict()
        for prefix, module in self.modules().items():
            for name, t in module.state_dict().items():
                params[f"{prefix}.{name}"] = t.detach().numpy()
        meta = {"config": self.cfg.to_dict(), "n_tokens": self.cfg.n_tokens,
                "class_freq": None if self.class_freq is None else [float(f) for f in self.class_freq],
                "scaler": scaler}
        write_checkpoint(path, CHECKPOINT_KIND, meta, params)

    @classmethod
    def load(cls, path):
        _, meta, params = read_checkpoint(path, expected_kind=CHECKPOINT_KIND)
        model = cls(VQConfig(**meta["config"]))
        for prefix, module in model.modules().items():
            state = OrderedDict((k[len(prefix) + 1:], torch.as_tensor(v)) for k, v in params.items()
                                if k.startswith(prefix + "."))
            module.load_state_dict(state)
        model.class_freq = None if meta["class_freq"] is None else np.array(meta["class_freq"])
        model.vq_trained = model.prior_trained = True
        model.scaler = meta.get("scaler")
        return model


def _batches(n, batch_size, gen):
    order = torch.randperm(n, generator=gen)
    return [order[i:i + batch_size] for i in range(0, n, batch_size)]


def train_vqvae(data, cfg=VQConfig(), seed=0, model=None):
    """
    Stage 1: trains encoder, decoder and codebook on scaled (n, 240) series.

    Emits a CodebookCollapse warning when fewer than 2 codes are in use at the end.
    Returns the VQSynth (prior untrained).
    """
    data, _ = check_training_set(data)
    if len(data) < 8:
        raise EmptyDataset(f"autoencoder training needs at least 8 series, got {len(data)}")
    seed_torch(derive_seed(seed, "vq-init"))
    model = model if model is not None else VQSynth(cfg)
    model.encoder, model.decoder = Encoder(cfg), Decoder(cfg)
    model.codebook = Codebook(cfg.n_codes, cfg.code_dim, cfg.decay)
    gen = torch_generator(derive_seed(seed, "vq-train"))
    x_all = torch.as_tensor(data, dtype=DTYPE)

    params = list(model.encoder.parameters()) + list(model.decoder.parameters())
    optimizer = torch.optim.Adam(params, lr=cfg.vq_lr)
    model.encoder.train(); model.decoder.train(); model.codebook.train()
    with torch.no_grad():
        model.codebook.init_from(model.encode(x_all[:cfg.batch_size]).reshape(-1, cfg.code_dim), gen)

    for epoch in range(cfg.vq_epochs):
        running = 0.0
        for batch in _batches(len(data), cfg.batch_size, gen):
            x = x_all[batch]
            optimizer.zero_grad()
            z = model.encode(x)
            q, commitment, _ = model.codebook(z)
            recon = model.decoder(q)
            loss = F.mse_loss(recon, x) + cfg.beta * commitment
            if not torch.isfinite(loss):
                raise NonFiniteLoss(f"autoencoder loss became {loss.item()} at epoch {epoch}")
            loss.backward()
            optimizer.step()
            running += loss.item() * len(batch)
        if cfg.dead_code_threshold > 0 and epoch < cfg.vq_epochs - 1:
            with torch.no_grad():
                model.codebook.restart_dead(model.encode(x_all).reshape(-1, cfg.code_dim), gen,
                                            cfg.dead_code_threshold)
        if cfg.log_every and (epoch + 1) % cfg.log_every == 0:
            logger.info(f"VQ epoch {epoch + 1}/{cfg.vq_epochs}: loss {running / len(data):.6f}")

    model.codebook.eval()
    model.encoder.eval()
    model.codebook.reset_usage()
    with torch.no_grad():
        model.codebook(model.encode(x_all))
    usage = model.codebook.usage_report()
    model.report = {"reconstruction_mse": model.reconstruction_mse(data),
                    "codes_used": usage["n_used"], "code_perplexity": usage["perplexity"]}
    model.codebook.reset_usage()
    logger.info(f"Codebook: {usage['n_used']}/{cfg.n_codes} codes used, perplexity {usage['perplexity']:.2f}, "
                f"reconstruction MSE {model.report['reconstruction_mse']:.6f}")
    if usage["n_used"] < 2:
        logger.warning("Codebook collapse: fewer than 2 codes in use")
        warnings.warn(f"only {usage['n_used']} code(s) in use after training", CodebookCollapse)
    model.vq_trained = True
    model.prior_trained = False
    return model


def train_prior_tokens(model, tokens, labels=None, cfg=VQConfig(), seed=0):
    """Fits the token prior by cross-entropy on given (n, T) token sequences."""
    tokens = torch.as_tensor(np.asarray(tokens, dtype=np.int64))
    n = tokens.shape[0]
    if n == 0:
        raise EmptyDataset("prior training needs at least one sequence")
    if labels is None:
        conditions = np.full(n, UNCONDITIONED)
        model.class_freq = None
    else:
        conditions = np.asarray(labels, dtype=np.int64)
        model.class_freq = np.bincount(conditions, minlength=N_CLASSES) / n
    inputs = torch.cat([_start_tokens(cfg.n_codes, conditions), tokens[:, :-1]], dim=1)

    seed_torch(derive_seed(seed, "prior-init"))
    model.prior = TokenPrior(cfg)
    gen = torch_generator(derive_seed(seed, "prior-train"))
    optimizer = torch.optim.Adam(model.prior.parameters(), lr=cfg.prior_lr)
    model.prior.train()
    for epoch in range(cfg.prior_epochs):
        running = 0.0
        for batch in _batches(n, cfg.batch_size, gen):
            optimizer.zero_grad()
            logits, _ = model.prior(inputs[batch])
            loss = F.cross_entropy(logits.reshape(-1, cfg.n_codes), tokens[batch].reshape(-1))
            if not torch.isfinite(loss):
                raise NonFiniteLoss(f"prior loss became {loss.item()} at epoch {epoch}")
            loss.backward()
            optimizer.step()
            running += loss.item() * len(batch)
        if cfg.log_every and (epoch + 1) % cfg.log_every == 0:
            logger.info(f"Prior epoch {epoch + 1}/{cfg.prior_epochs}: cross-entropy {running / n:.6f}")
    model.prior.eval()
    model.report["prior_cross_entropy"] = running / n
    model.prior_trained = True
    return model


def train_prior(model, data, labels=None, cfg=None, seed=0):
    """Stage 2: fits the class-conditioned token prior on the encoder tokens of ``data``."""
    if not model.vq_trained:
        raise UnfittedModel("train the autoencoder before the prior")
    data, labels = check_training_set(data, labels)
    return train_prior_tokens(model, model.tokens(data), labels, cfg or model.cfg, seed)
