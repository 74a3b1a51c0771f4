"""Seed derivation so that parallel work never changes outputs."""

import numpy as np
import torch


def derive_rng(master_seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for ``(master_seed, *keys)``.

    Trajectory ``i`` of a dataset uses ``derive_rng(seed, i)``; the stream
    depends only on the key, never on scheduling order.
    """
    return np.random.default_rng([int(master_seed), *(int(k) for k in keys)])


def derive_seed(master_seed: int, *keys: int) -> int:
    """Integer seed for APIs that do not take a Generator."""
    return int(derive_rng(master_seed, *keys).integers(0, 2**31 - 1))


def seed_torch(seed: int) -> torch.Generator:
    """Seed torch's default generator and return a dedicated one."""
    torch.manual_seed(int(seed))
    return torch.Generator().manual_seed(int(seed))
