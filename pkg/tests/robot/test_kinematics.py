"""
Tests for pose algebra, URDF parsing and forward/inverse kinematics.

Forward kinematics is checked against hand-built homogeneous matrices;
inverse kinematics against its own forward image.
"""

from dataclasses import replace

import numpy as np
import pytest

from src.robot.kinematics import (
    IKConfig, forward_kinematics, geometric_jacobian, inverse_kinematics, numeric_jacobian, tool_pose,
)
from src.robot.transforms import Pose, geodesic_distance, rotation_to_rpy, rpy_to_rotation
from src.robot.urdf import REVOLUTE, load_urdf, parse_urdf
from src.utils.errors import (
    CyclicJointGraph, JointLimitViolation, MalformedUrdf, MalformedXml, MissingLink, ShapeError,
    UnreachableTarget, UnsupportedGeometry,
)


def _urdf(body: str) -> str:
    return f'<?xml version="1.0"?>\n<robot name="test">{body}</robot>'


TWO_LINKS = """
  <link name="a"/>
  <link name="b"/>
"""


def _homogeneous_rz(angle: float, x: float = 0.0) -> np.ndarray:
    m = np.eye(4)
    m[:3, :3] = rpy_to_rotation(0.0, 0.0, angle)
    m[0, 3] = x
    return m


class TestTransforms:
    """Tests for rotations and poses."""

    def test_rpy_round_trip(self):
        """Angles away from gimbal lock survive a round trip."""
        roll, pitch, yaw = rotation_to_rpy(rpy_to_rotation(0.1, -0.4, 2.5))
        assert np.allclose((roll, pitch, yaw), (0.1, -0.4, 2.5))

    def test_random_rpy_round_trip(self, rng):
        """A thousand random triples away from pitch = +-pi/2 survive a round trip."""
        angles = rng.uniform(-1.0, 1.0, size=(1000, 3)) * (np.pi - 1e-3, np.pi / 2 - 1e-3, np.pi - 1e-3)
        for rpy in angles:
            np.testing.assert_allclose(rotation_to_rpy(rpy_to_rotation(*rpy)), rpy, rtol=0.0, atol=1e-9)
        assert np.allclose((roll, pitch, yaw), (0.1, -0.4, 2.5))

    def test_gimbal_lock_sets_roll_to_zero(self):
        """At pitch pi/2 the roll is folded into yaw."""
        rotation = rpy_to_rotation(0.3, np.pi / 2, 0.2)
        roll, pitch, yaw = rotation_to_rpy(rotation)
        assert roll == 0.0
        assert pitch == pytest.approx(np.pi / 2)
        np.testing.assert_allclose(rpy_to_rotation(roll, pitch, yaw), rotation, atol=1e-9)

    def test_compose_with_inverse_is_identity(self):
        """A pose composed with its inverse is the identity."""
        pose = Pose.from_xyz_rpy((0.3, -0.2, 0.5), (0.4, 0.1, -1.2))
        assert pose.compose(pose.inverse()).allclose(Pose.identity())

    def test_rejects_non_orthonormal_rotation(self):
        """Scaled matrices are not rotations."""
        with pytest.raises(ValueError):
            Pose(2.0 * np.eye(3), np.zeros(3))

    def test_row_major_layout(self):
        """Row-major serialization puts the translation in the last column."""
        values = Pose.from_xyz_rpy((1.0, 2.0, 3.0)).to_row_major()
        assert len(values) == 16
        assert (values[3], values[7], values[11], values[15]) == (1.0, 2.0, 3.0, 1.0)
        assert Pose.from_row_major(values).allclose(Pose.from_xyz_rpy((1.0, 2.0, 3.0)))

    def test_geodesic_distance(self):
        """The geodesic distance of a yaw rotation is its angle."""
        assert geodesic_distance(np.eye(3), rpy_to_rotation(0.0, 0.0, 0.7)) == pytest.approx(0.7)


class TestUrdfParsing:
    """Tests for the supported URDF subset."""

    def test_bundled_fixtures(self, deskcontext):
        """The bundled robots have the expected degrees of freedom."""
        assert deskcontext.planar.dof == 2
        assert deskcontext.franka.dof == 7
        assert deskcontext.dualarm.dof == 12
        assert len(deskcontext.franka.grippers) == 1

    def test_load_by_bare_name(self):
        """Bare fixture names resolve to the bundled assets."""
        assert load_urdf("planar2").dof == 2

    def test_missing_file(self, tmp_path):
        """Unreadable files raise RuntimeError."""
        with pytest.raises(RuntimeError, match="Failed to read URDF"):
            load_urdf(tmp_path / "absent.urdf")

    def test_dualarm_splits_into_two_manipulators(self, deskcontext):
        """Each gripper gets its own sub-chain from the shared base."""
        arms = deskcontext.dualarm.split_manipulators()
        assert len(arms) == 2
        assert [arm.dof for arm in arms] == [6, 6]
        assert arms[0].tool_link != arms[1].tool_link

    def test_malformed_xml(self):
        """Unbalanced tags are malformed XML."""
        with pytest.raises(MalformedXml):
            parse_urdf("<robot><link name='a'></robot>")

    def test_wrong_root(self):
        """The root element must be <robot>."""
        with pytest.raises(MalformedXml):
            parse_urdf("<model/>")

    def test_mesh_geometry_unsupported(self):
        """Meshes are rejected."""
        body = '<link name="a"><collision><geometry><mesh filename="a.stl"/></geometry></collision></link>'
        with pytest.raises(UnsupportedGeometry):
            parse_urdf(_urdf(body))

    def test_joint_to_undeclared_link(self):
        """A joint naming an unknown link raises MissingLink."""
        body = TWO_LINKS + """
          <joint name="j" type="fixed"><parent link="a"/><child link="ghost"/></joint>
        """
        with pytest.raises(MissingLink) as info:
            parse_urdf(_urdf(body))
        assert info.value.name == "ghost"

    def test_cycle(self):
        """Joints forming a loop raise CyclicJointGraph."""
        body = TWO_LINKS + """
          <joint name="ab" type="fixed"><parent link="a"/><child link="b"/></joint>
          <joint name="ba" type="fixed"><parent link="b"/><child link="a"/></joint>
        """
        with pytest.raises(CyclicJointGraph):
            parse_urdf(_urdf(body))

    def test_inverted_limits(self):
        """Lower limits above upper limits are malformed."""
        body = TWO_LINKS + """
          <joint name="j" type="revolute"><parent link="a"/><child link="b"/>
            <axis xyz="0 0 1"/><limit lower="1" upper="-1"/></joint>
        """
        with pytest.raises(MalformedUrdf):
            parse_urdf(_urdf(body))

    def test_home_outside_limits(self):
        """A home configuration must respect the joint limits."""
        body = TWO_LINKS + """
          <joint name="j" type="revolute"><parent link="a"/><child link="b"/>
            <axis xyz="0 0 1"/><limit lower="-1" upper="1"/></joint>
          <home q="2"/>
        """
        with pytest.raises(MalformedUrdf):
            parse_urdf(_urdf(body))


class TestForwardKinematics:
    """Tests for forward kinematics against homogeneous-matrix products."""

    def test_planar_tool_at_zero(self, deskcontext, expected_values):
        """The planar arm's tool sits 2 m along x at q = 0."""
        pose = tool_pose(deskcontext.planar, [0.0, 0.0])
        np.testing.assert_allclose(pose.translation, expected_values["planar_tool_at_zero"], atol=1e-12)

    @pytest.mark.parametrize("q", [(0.4, 0.8), (-1.2, 2.0), (3.0, -3.0)])
    def test_planar_matches_matrix_product(self, deskcontext, q):
        """Tool pose equals Rz(q1) T(1) Rz(q2) T(1)."""
        expected = _homogeneous_rz(q[0]) @ _homogeneous_rz(q[1], x=1.0) @ _homogeneous_rz(0.0, x=1.0)
        pose = tool_pose(deskcontext.planar, q)
        np.testing.assert_allclose(pose.as_matrix(), expected, atol=1e-12)

    @pytest.mark.parametrize("name", ["planar", "franka", "dualarm"])
    def test_full_turn_is_identity(self, deskcontext, rng, name):
        """Adding 2 pi to any revolute joint leaves every link pose unchanged."""
        chain = getattr(deskcontext, name)
        wide = replace(chain, joints=tuple(
            replace(j, lower=-10.0, upper=10.0) if j.kind == REVOLUTE else j for j in chain.joints
        ))
        revolute = np.array([j.kind == REVOLUTE for j in wide.actuated_joints])
        q = chain.home_configuration() + revolute * rng.uniform(-0.2, 0.2, size=chain.dof)
        before = forward_kinematics(wide, q)
        for i, joint in enumerate(wide.actuated_joints):
            if joint.kind != REVOLUTE:
                continue
            turned = q.copy()
            turned[i] += 2.0 * np.pi
            after = forward_kinematics(wide, turned)
            for link, pose in before.items():
                assert after[link].allclose(pose, atol=1e-9), f"{joint.name} moved {link}"

    def test_every_link_has_a_pose(self, deskcontext):
        """Forward kinematics reports every link, the base at the identity."""
        poses = forward_kinematics(deskcontext.franka, deskcontext.franka.home_configuration())
        assert set(poses) == set(deskcontext.franka.link_names)
        assert poses[deskcontext.franka.base_link].allclose(Pose.identity())

    def test_joint_limit_violation(self, deskcontext):
        """Values outside the limits are rejected unless unchecked."""
        with pytest.raises(JointLimitViolation) as info:
            tool_pose(deskcontext.planar, [4.0, 0.0])
        assert info.value.index == 0
        tool_pose(deskcontext.planar, [4.0, 0.0], check=False)

    def test_wrong_joint_count(self, deskcontext):
        """A joint vector of the wrong size raises ShapeError."""
        with pytest.raises(ShapeError):
            tool_pose(deskcontext.planar, [0.0, 0.0, 0.0])

    def test_jacobians_agree(self, deskcontext):
        """Analytic and central-difference Jacobians agree."""
        q = deskcontext.franka.home_configuration() + 0.1
        np.testing.assert_allclose(
            geometric_jacobian(deskcontext.franka, q),
            numeric_jacobian(deskcontext.franka, q),
            atol=1e-5,
        )


class TestInverseKinematics:
    """Tests for damped-least-squares inverse kinematics."""

    def test_recovers_forward_image(self, deskcontext):
        """IK of a nearby forward-kinematics pose meets both tolerances."""
        chain = deskcontext.franka
        home = chain.home_configuration()
        target = tool_pose(chain, home + np.array([0.1, -0.1, 0.05, 0.1, -0.05, 0.1, 0.05]))
        cfg = IKConfig()
        q = inverse_kinematics(chain, target, home, cfg)
        reached = tool_pose(chain, q)
        assert np.linalg.norm(reached.translation - target.translation) <= cfg.tol_pos
        assert geodesic_distance(reached.rotation, target.rotation) <= cfg.tol_rot

    def test_planar_is_position_only(self, deskcontext):
        """Chains with fewer than six joints only match the position."""
        target = Pose.from_xyz_rpy((1.2, 0.8, 0.0), (0.0, 0.0, 2.0))
        q = inverse_kinematics(deskcontext.planar, target, deskcontext.planar.home_configuration())
        assert np.linalg.norm(tool_pose(deskcontext.planar, q).translation - target.translation) <= 1e-4

    def test_converged_seed_returned_unchanged(self, deskcontext):
        """A seed that already meets the tolerances is returned as is."""
        chain = deskcontext.franka
        home = chain.home_configuration()
        q = inverse_kinematics(chain, tool_pose(chain, home), home)
        np.testing.assert_array_equal(q, home)

    def test_unreachable_target(self, deskcontext):
        """Targets beyond the reach raise UnreachableTarget."""
        with pytest.raises(UnreachableTarget):
            inverse_kinematics(deskcontext.planar, Pose.from_xyz_rpy((3.0, 0.0, 0.0)), [0.4, 0.8])

    def test_invalid_config(self):
        """Non-positive tolerances are rejected."""
        with pytest.raises(ValueError):
            IKConfig(tol_pos=0.0)
