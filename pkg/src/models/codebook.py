"""

*** Codebook.py ***

Contains:
Vector-quantization codebook with exponential-moving-average updates, nearest-code
lookup and usage statistics

Update rule (training mode, decay g, Laplace epsilon e):
    N_k <- g N_k + (1 - g) n_k                       (assignment counts)
    m_k <- g m_k + (1 - g) sum_{z -> k} z            (assigned vector sums)
    e_k  = m_k / ((N_k + e) / (sum N + K e) * sum N)

External dependencies:
numpy       -Numpy Python extension. http://numpy.org/
torch       -PyTorch. https://pytorch.org/

Changelog:
Date          Name              Change
__ _          __ _              ____ _
09/09/2024    Workbench team    Initial release
24/09/2024    Workbench team    Dead-code restart

References:
Short       Author,Year             Title
___ _       _________ _             ___ _
[Oord17]    van den Oord,2017       Neural discrete representation learning
[Raza19]    Razavi,2019             Generating diverse high-fidelity images with VQ-VAE-2

"""
# Imports
import math

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from src.utils.errors import InvalidConfig, NonFiniteValue

DTYPE = torch.float64


def squared_distances(flat, embeddings):
    """(N, d) x (K, d) -> (N, K) squared Euclidean distances, computed by direct differences."""
    return (flat.unsqueeze(1) - embeddings.unsqueeze(0)).pow(2).sum(dim=-1)


def quantize(z, embeddings):
    """
    Nearest code of z under squared Euclidean distance, ties to the smallest index.

    Args:
        z (array-like): (d,) vector or (N, d) batch
        embeddings (array-like): (K, d) code vectors

    Returns:
        (index, quantized): int and (d,) array for a vector input, (N,) and (N, d)
        arrays for a batch. Indices are 0-based.
    """
    e = torch.as_tensor(np.asarray(embeddings, dtype=np.float64), dtype=DTYPE)
    flat = torch.as_tensor(np.atleast_2d(np.asarray(z, dtype=np.float64)), dtype=DTYPE)
    # torch.argmin returns the first minimal index
    idx = torch.argmin(squared_distances(flat, e), dim=1)
    q = e[idx]
    if np.ndim(z) == 1:
        return int(idx[0]), q[0].numpy()
    return idx.numpy(), q.numpy()


class Codebook(nn.Module):
    """
    EMA codebook.

    Atributos:
        embedding (Tensor): (K, d) code vectors
        ema_cluster_size (Tensor): (K,) running assignment counts
        ema_w (Tensor): (K, d) running assigned-vector sums
        usage (Tensor): (K,) assignment counts accumulated since the last reset
    """
    def __init__(self, n_codes=64, dim=32, decay=0.99, epsilon=1e-5):
        super().__init__()
        if n_codes < 2:
            raise InvalidConfig(f"codebook needs K >= 2 codes, got {n_codes}")
        if not 0.0 <= decay <= 1.0:
            raise InvalidConfig(f"EMA decay must be in [0, 1], got {decay}")
        self.n_codes = n_codes
        self.dim = dim
        self.decay = decay
        self.epsilon = epsilon

        self.register_buffer("embedding", torch.randn(n_codes, dim, dtype=DTYPE))
        self.register_buffer("ema_cluster_size", torch.ones(n_codes, dtype=DTYPE))
        self.register_buffer("ema_w", self.embedding.clone())
        self.register_buffer("usage", torch.zeros(n_codes, dtype=DTYPE))

    def set_codes(self, codes):
        codes = torch.as_tensor(codes, dtype=DTYPE).reshape(self.n_codes, self.dim)
        if not torch.isfinite(codes).all():
            raise NonFiniteValue("code vectors must be finite")
        self.embedding.copy_(codes)
        self.ema_cluster_size.fill_(1.0)
        self.ema_w.copy_(codes)

    @torch.no_grad()
    def init_from(self, flat, generator):
        """Code vectors drawn from encoder outputs (without replacement when possible)."""
        n = flat.shape[0]
        if n >= self.n_codes:
            pick = torch.randperm(n, generator=generator)[:self.n_codes]
        else:
            pick = torch.randint(0, n, (self.n_codes,), generator=generator)
        self.set_codes(flat[pick].detach())

    def nearest(self, flat):
        return torch.argmin(squared_distances(flat.detach(), self.embedding), dim=1)

    @torch.no_grad()
    def _ema_update(self, flat, onehot):
        # decay 1 freezes the codebook
        if self.decay >= 1.0:
            return
        g = self.decay
        self.ema_cluster_size.mul_(g).add_((1.0 - g) * onehot.sum(dim=0))
        self.ema_w.mul_(g).add_((1.0 - g) * onehot.t() @ flat)
        n = self.ema_cluster_size.sum()
        smoothed = (self.ema_cluster_size + self.epsilon) / (n + self.n_codes * self.epsilon) * n
        self.embedding.copy_(self.ema_w / smoothed.unsqueeze(1))

    def forward(self, z):
        """
        Args:
            z (Tensor): (..., d) encoder outputs

        Returns:
            (quantized, commitment, indices): straight-through quantized tensor shaped
            like z, mean squared distance between z and its (detached) codes, and
            indices shaped z.shape[:-1].
        """
        flat = z.reshape(-1, self.dim)
        idx = self.nearest(flat)
        onehot = F.one_hot(idx, self.n_codes).to(DTYPE)
        with torch.no_grad():
            self.usage.add_(onehot.sum(dim=0))
        if self.training:
            self._ema_update(flat.detach(), onehot)
        q = self.embedding[idx].reshape(z.shape)
        commitment = F.mse_loss(z, q.detach())
        # straight-through estimator
        quantized = z + (q - z).detach()
        return quantized, commitment, idx.reshape(z.shape[:-1])

    @torch.no_grad()
    def restart_dead(self, flat, generator, threshold=1e-2):
        """Re-seeds codes whose EMA count fell under ``threshold`` from random encoder outputs."""
        dead = torch.nonzero(self.ema_cluster_size < threshold).flatten()
        if len(dead) == 0:
            return 0
        pick = torch.randint(0, flat.shape[0], (len(dead),), generator=generator)
        self.embedding[dead] = flat[pick].detach()
        self.ema_w[dead] = flat[pick].detach()
        self.ema_cluster_size[dead] = 1.0
        return len(dead)

    def reset_usage(self):
        self.usage.zero_()

    def usage_report(self):
        """Assignment counts, number of used codes and code perplexity since the last reset."""
        counts = self.usage.detach().numpy().copy()
        total = counts.sum()
        if total == 0:
            return {"counts": counts, "n_used": 0, "perplexity": 0.0}
        p = counts[counts > 0] / total
        return {"counts": counts, "n_used": int((counts > 0).sum()),
                "perplexity": float(math.exp(-np.sum(p * np.log(p))))}
