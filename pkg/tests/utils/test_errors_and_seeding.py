"""
Tests for the error hierarchy, seed derivation and verbose logging.
"""

import numpy as np
import pytest
import torch

from src.utils.errors import (
    ConfigError, DidNotConverge, MaskWorldError, MissingLink, ShapeError, UnreachableTarget,
)
from src.utils.logging import (
    VerboseLogger, get_logger, is_debug_mode, is_verbose_mode, set_debug_mode, set_verbose_mode, vprint,
)
from src.utils.seeding import derive_rng, derive_seed, seed_torch


class TestErrors:
    """Tests for the error codes and step tagging."""

    def test_code_is_class_name(self):
        """Each error reports its class name as machine-parsable code."""
        assert ConfigError("x").code == "ConfigError"
        assert MissingLink("arm").code == "MissingLink"

    def test_value_errors_are_catchable_as_value_error(self):
        """Shape and config errors also derive from ValueError."""
        with pytest.raises(ValueError):
            raise ShapeError("bad shape")
        assert issubclass(ConfigError, MaskWorldError)

    def test_at_step_prefixes_message(self):
        """Tagging an error with a step prefixes its message."""
        error = UnreachableTarget(3.0, 2.0).at_step(4)
        assert error.step == 4
        assert str(error).startswith("step 4: ")
        assert "exceeds reach" in str(error)

    def test_did_not_converge_keeps_details(self):
        """The convergence error carries the best error and iteration count."""
        error = DidNotConverge(0.25, 200)
        assert error.best_error == 0.25
        assert error.iterations == 200
        assert error.step is None


class TestSeeding:
    """Tests for order-independent seed derivation."""

    def test_same_keys_same_stream(self):
        """Equal keys give identical streams."""
        a = derive_rng(3, 1, 2).normal(size=5)
        b = derive_rng(3, 1, 2).normal(size=5)
        np.testing.assert_array_equal(a, b)

    def test_different_keys_differ(self):
        """Sibling keys give different streams."""
        a = derive_rng(3, 1).normal(size=5)
        b = derive_rng(3, 2).normal(size=5)
        assert not np.allclose(a, b)

    def test_derive_seed_is_stable_int(self):
        """Integer seeds are deterministic and non-negative."""
        seed = derive_seed(0, 5)
        assert seed == derive_seed(0, 5)
        assert 0 <= seed < 2**31 - 1

    def test_seed_torch_generator(self):
        """The returned torch generator replays the same draws."""
        a = torch.rand(3, generator=seed_torch(11))
        b = torch.rand(3, generator=seed_torch(11))
        assert torch.equal(a, b)


class TestVerboseLogging:
    """Tests for the verbose-mode logger."""

    def teardown_method(self):
        set_verbose_mode(None)
        set_debug_mode(None)

    def test_quiet_suppresses_info(self, capsys):
        """Info, debug and success lines vanish in quiet mode."""
        set_verbose_mode(False)
        logger = get_logger("test")
        logger.info("hidden")
        logger.debug("hidden")
        logger.success("hidden")
        vprint("hidden")
        assert capsys.readouterr().out == ""

    def test_warnings_always_shown(self, capsys):
        """Warnings and errors print even in quiet mode."""
        set_verbose_mode(False)
        logger = get_logger("test")
        logger.warning("careful")
        logger.error("broken")
        out = capsys.readouterr().out
        assert "[test] careful" in out
        assert "[test] broken" in out

    def test_debug_prefix(self, capsys):
        """Debug lines carry the logger name."""
        set_verbose_mode(True)
        set_debug_mode(True)
        get_logger("planner").debug("iteration 3")
        assert "[planner] iteration 3" in capsys.readouterr().out

    def test_environment_quiet(self, monkeypatch):
        """MASKWORLD_QUIET disables verbose mode."""
        set_verbose_mode(None)
        monkeypatch.setenv("MASKWORLD_QUIET", "1")
        assert is_verbose_mode() is False

    def test_debug_needs_its_switch(self, capsys, monkeypatch):
        """Debug lines stay hidden unless MASKWORLD_DEBUG is set."""
        set_verbose_mode(True)
        set_debug_mode(None)
        monkeypatch.delenv("MASKWORLD_DEBUG", raising=False)
        get_logger("planner").debug("iteration 3")
        assert capsys.readouterr().out == ""
        assert is_debug_mode() is False

    def test_debug_silenced_by_quiet(self):
        """Quiet mode wins over the debug switch."""
        set_verbose_mode(False)
        set_debug_mode(True)
        assert is_debug_mode() is False

    def test_progress_line(self, capsys):
        """Progress lines show the count of finished work."""
        set_verbose_mode(True)
        get_logger("dataset").progress(3, 50, "tuples")
        assert capsys.readouterr().out.strip() == "⏳ [dataset] tuples 3/50"

    @pytest.mark.parametrize("method", ["info", "success", "progress", "debug", "warning", "error"])
    def test_logger_methods_documented(self, method):
        """Every logging method describes when it prints."""
        assert getattr(VerboseLogger, method).__doc__
