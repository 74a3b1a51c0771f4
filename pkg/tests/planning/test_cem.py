"""
Tests for cross-entropy planning and its strategies.
"""

import numpy as np
import pytest

import src.planning.cem as cem_module
from src.planning.cem import (
    TELEMETRY_COLUMNS, CemKnobs, CemState, GoalImage, PlanConfig, as_search_dims, cem_plan, check_refit,
    deltas_to_actions, latent_l1, plan_with_strategy, read_plan, refit, strategy_knobs,
)
from src.services.simulator import OracleWorld
from src.services.tasks import get_task
from src.utils.errors import ConfigError
from src.utils.logging import set_debug_mode, set_verbose_mode
from src.utils.seeding import derive_rng


@pytest.fixture(scope="module")
def planar_setup():
    """Planar reach instance at 32x32 with its oracle, start frame and goal frame."""
    task = get_task("planar_reach")
    instance = task.sample(derive_rng(0, 0), width=32, height=32)
    env = OracleWorld(task.chains(), instance.camera)
    x0 = env.render(instance.start)[0]
    goal = task.goal_frames(instance, env)[-1]
    return env, instance.start, x0, goal


def _config(**kwargs):
    options = dict(horizon=2, iterations=2, samples=6, elites=2, search_dims=(0, 1))
    options.update(kwargs)
    return PlanConfig(**options)


class TestPlanConfig:
    """Tests for planner settings."""

    @pytest.mark.parametrize("kwargs", [
        {"elites": 10, "samples": 4},
        {"strategy": "random"},
        {"search_dims": (6,)},
        {"search_dims": ()},
        {"gripper": 2.0},
        {"horizon": 0},
    ])
    def test_invalid(self, kwargs):
        """Inconsistent settings raise ConfigError."""
        with pytest.raises(ConfigError):
            PlanConfig(**kwargs)

    def test_search_dims_by_name(self):
        """Dimensions may be named dx..dyaw."""
        assert as_search_dims(["dx", "dyaw", 2]) == (0, 5, 2)
        with pytest.raises(ConfigError):
            as_search_dims(["dw"])

    def test_initial_spread(self):
        """Initial sigma is the step size; pi starts at one half."""
        cfg = PlanConfig(horizon=3)
        state = CemState.initial(cfg)
        np.testing.assert_allclose(state.sigma[:, 0], 0.05)
        np.testing.assert_allclose(state.sigma[:, 5], np.radians(20.0))
        np.testing.assert_array_equal(state.pi, 0.5)

    def test_strategy_knobs(self):
        """Each strategy maps to its sampling changes."""
        assert strategy_knobs(PlanConfig(strategy="joint")) == CemKnobs()
        assert strategy_knobs(PlanConfig(strategy="rotation_first", iterations=5)).freeze_translation_iters == 3
        assert strategy_knobs(PlanConfig(strategy="reallocated")).sample_scale == 2
        assert strategy_knobs(PlanConfig(strategy="axis_wise")).axis_passes == (5, 4, 3)


class TestRefit:
    """Tests for the elite refit."""

    def test_refit_statistics(self):
        """mu and sigma are elite moments; pi is the elite open-gripper rate."""
        state = CemState(np.zeros((1, 6)), np.full((1, 6), 9.0), np.full(1, 0.5))
        deltas = np.zeros((4, 1, 6))
        deltas[:, 0, 0] = [1.0, 3.0, 100.0, -100.0]
        grippers = np.array([[1.0], [0.0], [1.0], [1.0]])
        active = np.array([True, True, False, False, False, False])
        floor = np.full(6, 0.5)
        fitted = refit(state, deltas, grippers, np.array([0, 1]), floor, active)
        assert fitted.mu[0, 0] == pytest.approx(2.0)
        assert fitted.sigma[0, 0] == pytest.approx(1.0)
        assert fitted.sigma[0, 1] == pytest.approx(0.5)
        assert fitted.sigma[0, 2] == 9.0
        assert fitted.pi[0] == pytest.approx(0.5)

    def test_check_accepts_refit(self, rng):
        """Random refits agree with the candidate-by-candidate recomputation."""
        state = CemState(np.zeros((3, 6)), np.ones((3, 6)), np.full(3, 0.5))
        floor = np.full(6, 0.1)
        active = np.array([True, True, True, False, False, True])
        for _ in range(20):
            deltas = rng.normal(size=(10, 3, 6))
            grippers = (rng.random((10, 3)) < 0.5).astype(float)
            elite = rng.permutation(10)[:4]
            fitted = refit(state, deltas, grippers, elite, floor, active)
            check_refit(fitted, state, deltas, grippers, elite, floor, active)

    def test_check_rejects_wrong_mean(self, rng):
        """A refit whose mean drifts from the elites fails the check."""
        state = CemState(np.zeros((2, 6)), np.ones((2, 6)), np.full(2, 0.5))
        deltas = rng.normal(size=(6, 2, 6))
        grippers = np.ones((6, 2))
        elite = np.array([0, 2, 4])
        floor, active = np.full(6, 0.1), np.ones(6, dtype=bool)
        fitted = refit(state, deltas, grippers, elite, floor, active)
        drifted = CemState(fitted.mu + 1e-3, fitted.sigma, fitted.pi)
        with pytest.raises(AssertionError):
            check_refit(drifted, state, deltas, grippers, elite, floor, active)

    def test_debug_mode_checks_every_iteration(self, planar_setup, monkeypatch):
        """With debug output on, the planner recomputes each refit."""
        calls = []
        monkeypatch.setattr(cem_module, "check_refit", lambda *args: calls.append(args))
        env, start, x0, goal = planar_setup
        set_verbose_mode(True)
        set_debug_mode(True)
        try:
            cem_plan(env, x0, start, goal, _config(iterations=3), seed=1)
        finally:
            set_verbose_mode(None)
            set_debug_mode(None)
        assert len(calls) == 3

    def test_plan_gripper_threshold(self):
        """Plans open the gripper where pi >= 0.5, unless a command is fixed."""
        state = CemState(np.zeros((2, 6)), np.ones((2, 6)), np.array([0.5, 0.4]))
        _, grippers = state.plan(PlanConfig(horizon=2))
        np.testing.assert_array_equal(grippers, [1.0, 0.0])
        _, fixed = state.plan(PlanConfig(horizon=2, gripper=0.25))
        np.testing.assert_array_equal(fixed, [0.25, 0.25])


class TestGoalImage:
    """Tests for latent goal comparison."""

    def test_identical_frames(self, planar_setup):
        """A frame has zero loss to itself."""
        _, _, x0, goal = planar_setup
        assert latent_l1(goal, GoalImage(goal)) == 0.0
        assert latent_l1(x0, goal) > 0.0

    def test_round_trip_floor(self, planar_setup):
        """The codec round trip costs a small, non-negative loss."""
        _, _, _, goal = planar_setup
        assert 0.0 <= GoalImage(goal).round_trip_floor() < 1.0


class TestCemPlanning:
    """Tests for planning against the oracle."""

    def test_zero_plan_holds_still(self, planar_setup):
        """Zero increments command the current pose every step."""
        env, start, x0, _ = planar_setup
        actions = deltas_to_actions(np.zeros((3, 6)), np.ones(3), start, env.chains)
        assert len(actions) == 3
        np.testing.assert_array_equal(env.predict_final(x0, actions, start), x0)

    def test_joint_strategy_is_cem_plan(self, planar_setup):
        """The joint strategy and cem_plan draw identical plans."""
        env, start, x0, goal = planar_setup
        a = plan_with_strategy(env, x0, start, goal, _config(), seed=3)
        b = cem_plan(env, x0, start, goal, _config(strategy="axis_wise"), seed=3)
        np.testing.assert_array_equal(a.deltas, b.deltas)
        np.testing.assert_array_equal(a.grippers, b.grippers)
        assert a.best_loss == b.best_loss

    def test_telemetry(self, planar_setup):
        """One telemetry row per iteration with a non-increasing best."""
        env, start, x0, goal = planar_setup
        result = cem_plan(env, x0, start, goal, _config(iterations=3), seed=1)
        assert list(result.telemetry.columns) == TELEMETRY_COLUMNS
        assert list(result.telemetry["iter"]) == [0, 1, 2]
        assert np.all(np.diff(result.telemetry["best_so_far"]) <= 0)
        assert result.best_loss == result.telemetry["best_so_far"].iloc[-1]
        assert len(result.actions) == 2

    def test_rotation_first_freezes_translation(self, planar_setup):
        """With one iteration the rotation-first plan never moves the tool."""
        env, start, x0, goal = planar_setup
        cfg = _config(iterations=1, strategy="rotation_first", search_dims=(0, 1, 3, 4, 5))
        result = plan_with_strategy(env, x0, start, goal, cfg, seed=0)
        np.testing.assert_array_equal(result.deltas[:, :3], 0.0)

    def test_axis_wise_passes(self, planar_setup):
        """Axis-wise search runs one pass per rotation axis."""
        env, start, x0, goal = planar_setup
        cfg = _config(iterations=1, strategy="axis_wise", search_dims=(0, 1, 3, 4, 5))
        result = plan_with_strategy(env, x0, start, goal, cfg, seed=0)
        assert list(result.telemetry["pass"]) == [0, 1, 2]

    def test_search_dims_limit_sampling(self, planar_setup):
        """Unsearched dimensions stay at zero."""
        env, start, x0, goal = planar_setup
        result = cem_plan(env, x0, start, goal, _config(), seed=2)
        np.testing.assert_array_equal(result.deltas[:, 2:], 0.0)

    def test_plan_file(self, planar_setup, tmp_path):
        """Plans and telemetry are written as JSON and CSV."""
        env, start, x0, goal = planar_setup
        result = cem_plan(env, x0, start, goal, _config(iterations=1), seed=0)
        result.write(tmp_path / "plan.json", tmp_path / "telemetry.csv")
        deltas, grippers = read_plan(tmp_path / "plan.json")
        np.testing.assert_allclose(deltas, result.deltas)
        np.testing.assert_array_equal(grippers, result.grippers)
        assert (tmp_path / "telemetry.csv").exists()

    def test_unreadable_plan(self, tmp_path):
        """Missing plan files raise ConfigError."""
        with pytest.raises(ConfigError):
            read_plan(tmp_path / "missing.json")
