"""
Tests for action sequences, their joint trajectories and mask videos.
"""

import json

import numpy as np
import pytest

from src.render.scene import render_embodiment_mask
from src.robot.kinematics import tool_pose
from src.services.actions import (
    ActionSequence, CartesianAction, JointAction, actions_to_joint_states, hold_action, load_actions,
    masks_from_actions, save_actions,
)
from src.utils.errors import ConfigError, InvalidAction, JointLimitViolation, UnreachableTarget


def _planar(x: float, y: float, gripper: float = 1.0) -> CartesianAction:
    return CartesianAction((x, y, 0.0), (0.0, 0.0, 0.0), gripper)


class TestActionSequence:
    """Tests for the action sequence container."""

    def test_gripper_range(self):
        """Gripper commands outside [0, 1] are invalid."""
        with pytest.raises(InvalidAction):
            _planar(1.0, 0.0, gripper=1.5)

    def test_from_array_shapes(self):
        """(T, 7) arrays drive one manipulator, (T, N, 7) arrays N."""
        single = ActionSequence.from_array(np.zeros((3, 7)))
        dual = ActionSequence.from_array(np.zeros((3, 2, 7)))
        assert (single.length, single.manipulators) == (3, 1)
        assert (dual.length, dual.manipulators) == (3, 2)
        with pytest.raises(InvalidAction):
            ActionSequence.from_array(np.zeros((3, 6)))

    def test_ragged_steps_rejected(self):
        """Every step must drive the same number of manipulators."""
        a = _planar(1.0, 0.0)
        with pytest.raises(InvalidAction):
            ActionSequence(((a,), (a, a)))

    def test_empty_rejected(self):
        """A sequence needs at least one step."""
        with pytest.raises(InvalidAction):
            ActionSequence(())

    def test_pad_and_slice(self):
        """Padding repeats the final step; slicing keeps the type."""
        seq = ActionSequence.single([_planar(1.0, 0.0), _planar(1.2, 0.1)])
        padded = seq.pad_to(5)
        assert len(padded) == 5
        assert padded.steps[-1][0] is seq.steps[-1][0]
        assert isinstance(padded[1:3], ActionSequence)
        assert len(padded[1:3]) == 2

    def test_concat_requires_same_width(self):
        """Sequences for different manipulator counts cannot be joined."""
        one = ActionSequence.from_array(np.zeros((1, 7)))
        two = ActionSequence.from_array(np.zeros((1, 2, 7)))
        with pytest.raises(InvalidAction):
            one.concat(two)

    def test_file_round_trip_with_joint_actions(self, tmp_path):
        """Action files keep Cartesian and joint commands."""
        seq = ActionSequence.single([_planar(1.0, 0.5, 0.3), JointAction([0.1, 0.2], 0.0)])
        save_actions(tmp_path / "a.json", seq)
        again = load_actions(tmp_path / "a.json")
        assert again.to_rows() == seq.to_rows()
        assert isinstance(again.steps[1][0], JointAction)

    def test_unsupported_version(self, tmp_path):
        """Action files with another version are rejected."""
        path = tmp_path / "a.json"
        path.write_text(json.dumps({"version": 9, "steps": []}))
        with pytest.raises(InvalidAction):
            load_actions(path)

    def test_unreadable_file(self, tmp_path):
        """Missing files raise RuntimeError."""
        with pytest.raises(RuntimeError, match="Failed to read actions"):
            load_actions(tmp_path / "missing.json")


class TestJointTrajectory:
    """Tests for action-to-joint conversion."""

    def test_planar_targets_reached(self, deskcontext):
        """Every step's tool position matches its command."""
        targets = [(1.2, 0.8), (1.0, 1.0), (0.5, 1.4)]
        seq = ActionSequence.single([_planar(x, y) for x, y in targets])
        trajectory = actions_to_joint_states(seq, [deskcontext.planar])
        assert len(trajectory) == 3
        for t, (x, y) in enumerate(targets):
            reached = tool_pose(deskcontext.planar, trajectory.joints[0][t]).translation
            assert np.linalg.norm(reached - (x, y, 0.0)) <= 1e-4

    def test_failure_tagged_with_step(self, deskcontext):
        """An unreachable command reports its step index."""
        seq = ActionSequence.single([_planar(1.2, 0.8), _planar(1.0, 1.0), _planar(3.0, 0.0)])
        with pytest.raises(UnreachableTarget) as info:
            actions_to_joint_states(seq, [deskcontext.planar])
        assert info.value.step == 2

    def test_joint_actions_pass_through(self, deskcontext):
        """Joint commands are used as given after a limit check."""
        seq = ActionSequence.single([JointAction([0.3, -0.2])])
        trajectory = actions_to_joint_states(seq, [deskcontext.planar])
        np.testing.assert_array_equal(trajectory.joints[0][0], [0.3, -0.2])
        with pytest.raises(JointLimitViolation):
            actions_to_joint_states(ActionSequence.single([JointAction([5.0, 0.0])]), [deskcontext.planar])

    def test_chain_count_checked(self, deskcontext):
        """One chain is needed per manipulator."""
        seq = ActionSequence.from_array(np.zeros((1, 2, 7)))
        with pytest.raises(ConfigError):
            actions_to_joint_states(seq, [deskcontext.planar])


class TestMasksFromActions:
    """Tests for mask videos of action sequences."""

    def test_hold_action_reproduces_start_mask(self, deskcontext):
        """Holding the tool still renders the starting silhouette."""
        chain, cam = deskcontext.planar, deskcontext.overhead
        home = chain.home_configuration()
        seq = ActionSequence.single([hold_action(chain, home)] * 2)
        masks = masks_from_actions(seq, [chain], cam)
        expected = render_embodiment_mask(chain, home, cam)
        assert len(masks) == 2
        np.testing.assert_array_equal(masks.frame(0), expected)
        np.testing.assert_array_equal(masks.frame(1), expected)

    def test_dual_arm_union(self, deskcontext):
        """Frames of a two-arm sequence hold both silhouettes."""
        arms = deskcontext.dualarm.split_manipulators()
        homes = [arm.home_configuration() for arm in arms]
        seq = ActionSequence((tuple(hold_action(arm, q) for arm, q in zip(arms, homes)),))
        masks = masks_from_actions(seq, arms, deskcontext.desk)
        left = render_embodiment_mask(arms[0], homes[0], deskcontext.desk)
        right = render_embodiment_mask(arms[1], homes[1], deskcontext.desk)
        np.testing.assert_array_equal(masks.frame(0), left | right)
