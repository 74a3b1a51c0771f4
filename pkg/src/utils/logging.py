"""
Logging utilities for controlling output verbosity.

Long-running pipeline stages (dataset generation, training epochs, CEM
iterations, MPC cycles, policy-evaluation episodes) report progress
through module loggers. Two switches decide what is printed:

- verbose (default on): info, success and progress lines
- debug (default off): per-epoch, per-iteration and per-IK-solve detail

Warnings and errors are always printed. Everything goes to stdout; stderr
is reserved for the one-line command-line error record.
"""

import os
from typing import Optional


_TRUTHY = ('1', 'true', 'yes', 'on')

# Cached switches; None means "read the environment on next use"
_VERBOSE_MODE: Optional[bool] = None
_DEBUG_MODE: Optional[bool] = None


def _env_flag(name: str, default: str) -> bool:
    return os.getenv(name, default).lower() in _TRUTHY


def is_verbose_mode() -> bool:
    """
    Check if verbose mode is enabled.

    Verbose mode is controlled by environment variables:
    - MASKWORLD_QUIET=1: Disable verbose output
    - PYTEST_VERBOSE=0: Disable verbose output during tests
    - MASKWORLD_VERBOSE=0: Disable verbose output
    - Default: True (verbose enabled)

    Returns:
        True if verbose mode is enabled, False otherwise
    """
    global _VERBOSE_MODE
    if _VERBOSE_MODE is None:
        _VERBOSE_MODE = not (
            _env_flag('MASKWORLD_QUIET', '0')
            or os.getenv('PYTEST_VERBOSE', '1') == '0'
            or not _env_flag('MASKWORLD_VERBOSE', '1')
        )
    return _VERBOSE_MODE


def is_debug_mode() -> bool:
    """True if MASKWORLD_DEBUG is set and verbose output is not silenced."""
    global _DEBUG_MODE
    if _DEBUG_MODE is None:
        _DEBUG_MODE = _env_flag('MASKWORLD_DEBUG', '0')
    return _DEBUG_MODE and is_verbose_mode()


def set_verbose_mode(enabled: Optional[bool]) -> None:
    """
    Programmatically set verbose mode.

    Args:
        enabled: True to enable verbose output, False to disable,
            None to re-read the environment on next use
    """
    global _VERBOSE_MODE
    _VERBOSE_MODE = enabled


def set_debug_mode(enabled: Optional[bool]) -> None:
    """Programmatically set debug mode (None re-reads MASKWORLD_DEBUG)."""
    global _DEBUG_MODE
    _DEBUG_MODE = enabled


def get_logger(name: str = "maskworld") -> "VerboseLogger":
    """
    Get a logger that respects the verbosity switches.

    Args:
        name: Logger name, shown in debug, warning and error lines

    Returns:
        VerboseLogger for ``name``
    """
    return VerboseLogger(name)


class VerboseLogger:
    """Named logger printing to stdout according to the verbosity switches."""

    def __init__(self, name: str):
        """Initialize with the name shown in tagged lines."""
        self.name = name

    def _tagged(self, icon: str, message: str) -> str:
        """Prefix ``message`` with an icon and the logger name."""
        return f"{icon} [{self.name}] {message}"

    def info(self, message: str) -> None:
        """Print an untagged line when verbose."""
        if is_verbose_mode():
            print(message)

    def success(self, message: str) -> None:
        """Print a success line when verbose."""
        if is_verbose_mode():
            print(f"✅ {message}")

    def progress(self, done: int, total: int, what: str) -> None:
        """One line per completed unit of work, e.g. ``⏳ [dataset] tuples 3/50``."""
        if is_verbose_mode():
            print(self._tagged("⏳", f"{what} {done}/{total}"))

    def debug(self, message: str) -> None:
        """Print a tagged detail line in debug mode only."""
        if is_debug_mode():
            print(self._tagged("🐛", message))

    def warning(self, message: str) -> None:
        """Print a tagged warning (always shown)."""
        print(self._tagged("⚠️ ", message))

    def error(self, message: str) -> None:
        """Print a tagged error (always shown)."""
        print(self._tagged("❌", message))


def vprint(*args, **kwargs) -> None:
    """print() that is silent unless verbose mode is enabled."""
    if is_verbose_mode():
        print(*args, **kwargs)
