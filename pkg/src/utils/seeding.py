"""

*** Seeding.py ***

Contains:
Counter-mode seed derivation and seeded generator construction

Seed derivation:
    derive_seed(base, k1, k2, ...) hashes the UTF-8 string "base|k1|k2|..." with
    BLAKE2b (8-byte digest), reads it little-endian and keeps the low 63 bits.
    Every (arm, run) counter pair therefore maps to an independent, reproducible
    sub-seed, whatever order the runs are executed in.

External dependencies:
numpy       -Numpy Python extension. http://numpy.org/
torch       -PyTorch. https://pytorch.org/

Changelog:
Date          Name              Change
__ _          __ _              ____ _
02/09/2024    Workbench team    Initial release

"""
# Imports
import hashlib
import os

import numpy as np
import torch

SEED_ENV_VAR = "WORKBENCH_SEED"
DEFAULT_SEED = 2024
_MASK_63 = (1 << 63) - 1


def derive_seed(base, *keys):
    """Sub-seed for the counters ``keys`` under ``base``."""
    text = "|".join(str(part) for part in (int(base),) + keys)
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") & _MASK_63


def default_seed():
    """Default seed, overridable through the WORKBENCH_SEED environment variable."""
    raw = os.environ.get(SEED_ENV_VAR)
    if raw is None or raw.strip() == "":
        return DEFAULT_SEED
    return int(raw)


def numpy_rng(seed):
    return np.random.default_rng(int(seed))


def torch_generator(seed):
    gen = torch.Generator(device="cpu")
    gen.manual_seed(int(seed) & _MASK_63)
    return gen


def seed_torch(seed):
    """Seeds torch's global RNG (module initialisers draw from it)."""
    torch.manual_seed(int(seed) & _MASK_63)
    torch.use_deterministic_algorithms(True)
