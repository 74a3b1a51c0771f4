"""Cross-cutting utilities: logging, errors and seeding."""

from .logging import get_logger, set_verbose_mode, is_verbose_mode, set_debug_mode, is_debug_mode, vprint
from .seeding import derive_rng, derive_seed, seed_torch

__all__ = [
    'get_logger', 'set_verbose_mode', 'is_verbose_mode', 'set_debug_mode', 'is_debug_mode', 'vprint',
    'derive_rng', 'derive_seed', 'seed_torch',
]
