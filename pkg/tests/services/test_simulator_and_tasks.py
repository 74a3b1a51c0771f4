"""
Tests for the kinematic oracle world, the bundled tasks and scripted policies.
"""

import numpy as np
import pytest

from src.services.actions import ActionSequence, CartesianAction, hold_step
from src.services.policies import PolicySpec, ScriptedPolicy, load_policies
from src.services.simulator import OracleWorld
from src.services.tasks import TASKS, Waypoint, expand_waypoints, get_task
from src.utils.errors import ConfigError
from src.utils.seeding import derive_rng


def _instance(name: str, key: int = 0):
    task = get_task(name)
    return task, task.sample(derive_rng(0, key))


class TestOracleWorld:
    """Tests for the ground-truth simulator."""

    def test_hold_rollout_keeps_initial_frame(self):
        """Holding still reproduces the initial render in every frame."""
        task, instance = _instance("reach")
        world = OracleWorld(task.chains(), instance.camera)
        state = instance.start
        initial, _ = world.render(state)
        hold = ActionSequence((hold_step(world.chains, state.joints, state.grippers),) * 3)
        prediction = world.predict(initial, hold, state)
        assert len(prediction.video) == 3
        for t in range(3):
            np.testing.assert_array_equal(prediction.video.frame(t), initial)

    def test_predict_final_matches_rollout(self):
        """The final frame equals the last rollout frame."""
        task, instance = _instance("reach")
        world = OracleWorld(task.chains(), instance.camera)
        actions = task.expert_actions(instance, instance.start)
        _, video, _ = world.rollout(actions, instance.start)
        np.testing.assert_array_equal(world.predict_final(None, actions, instance.start), video.last)

    def test_step_checks_manipulator_count(self):
        """A step must carry one action per manipulator."""
        task, instance = _instance("reach")
        world = OracleWorld(task.chains(), instance.camera)
        with pytest.raises(ConfigError):
            world.step(instance.start, ())

    def test_masks_are_arm_coloured(self):
        """Occlusion-aware masks mark exactly the arm-coloured pixels."""
        task, instance = _instance("reach")
        world = OracleWorld(task.chains(), instance.camera)
        rgb, mask = world.render(instance.start)
        assert mask.any()
        assert np.all(rgb[mask] == (255, 32, 32))


class TestTasks:
    """Tests for the bundled tasks and their expert scripts."""

    @pytest.mark.parametrize("name", sorted(TASKS))
    def test_expert_solves_sampled_instance(self, name):
        """The expert script succeeds on every sampled instance."""
        task, instance = _instance(name)
        world = OracleWorld(task.chains(), instance.camera)
        final = world.run(task.expert_actions(instance, instance.start), instance.start)
        assert task.success(instance, final)
        if name != "planar_reach":
            assert not task.success(instance, instance.start)

    def test_pick_place_subgoal_holds_cube(self):
        """The pick-and-place subgoal is the grasp, the final goal the release."""
        task, instance = _instance("pick_place")
        world = OracleWorld(task.chains(), instance.camera)
        subgoal, goal = task.goal_states(instance, world)
        assert subgoal.scene.attached("cube") is not None
        assert goal.scene.attached("cube") is None

    def test_goal_frame_succeeds_on_itself(self):
        """A rendered goal frame passes the pixel success check against itself."""
        task, instance = _instance("push")
        world = OracleWorld(task.chains(), instance.camera)
        goal = task.goal_frames(instance, world)[-1]
        assert task.frame_success(instance, goal, goal)

    def test_unknown_task(self):
        """Unknown task names raise ConfigError."""
        with pytest.raises(ConfigError):
            get_task("juggle")

    def test_expand_waypoints_step_size(self):
        """No interpolated step moves the tool more than 2 cm."""
        start = CartesianAction((0.4, 0.0, 0.2), (np.pi, 0.0, np.pi))
        actions, ends = expand_waypoints(start, [Waypoint((0.5, 0.0, 0.2)), Waypoint((0.5, 0.1, 0.2))])
        positions = np.array([start.position] + [a.position for a in actions])
        assert np.max(np.linalg.norm(np.diff(positions, axis=0), axis=1)) <= 0.02 + 1e-12
        assert ends == [4, 9]
        np.testing.assert_allclose(actions[-1].position, (0.5, 0.1, 0.2))


class TestScriptedPolicy:
    """Tests for noisy expert policies."""

    def test_noise_free_policy_is_expert(self):
        """Without noise the policy replays the expert script."""
        task, instance = _instance("reach")
        policy = ScriptedPolicy(PolicySpec("reach"), instance, task.chains()).reset(instance.start)
        assert policy.actions().to_rows() == task.expert_actions(instance, instance.start).to_rows()

    def test_chunks_repeat_final_action(self):
        """Chunks past the end of the script repeat its last action."""
        task, instance = _instance("reach")
        policy = ScriptedPolicy(PolicySpec("reach", chunk=4), instance, task.chains()).reset(instance.start)
        last = policy.actions().to_rows()[-1]
        for _ in range(policy.length // 4 + 1):
            chunk = policy.next_chunk()
        assert policy.done
        assert chunk.to_rows()[-1] == last

    def test_noise_needs_generator(self):
        """Noisy policies cannot be reset without a random generator."""
        task, instance = _instance("reach")
        with pytest.raises(ConfigError):
            ScriptedPolicy(PolicySpec("reach", 0.03), instance, task.chains()).reset(instance.start)

    def test_noise_is_seeded(self):
        """Equal generators give equal noisy scripts."""
        task, instance = _instance("reach")
        spec = PolicySpec("reach", 0.03)
        a = ScriptedPolicy(spec, instance, task.chains()).reset(instance.start, derive_rng(5)).actions()
        b = ScriptedPolicy(spec, instance, task.chains()).reset(instance.start, derive_rng(5)).actions()
        assert a.to_rows() == b.to_rows()

    def test_spec_names(self):
        """Policies are named by label, else task and noise."""
        assert PolicySpec("reach", 0.03).name == "reach@0.03"
        assert PolicySpec("reach", label="careful").name == "careful"

    def test_load_policies(self, test_data_dir):
        """The bundled policy family file parses."""
        specs = load_policies(test_data_dir / "policies.json")
        assert [s.noise for s in specs] == [0.0, 0.02, 0.05]

    def test_unknown_policy_key(self):
        """Policy descriptions reject unknown keys."""
        with pytest.raises(ConfigError):
            PolicySpec.from_dict({"policy_id": "reach", "speed": 2})
