"""
Robot description and kinematics.

URDF parsing into :class:`KinematicChain`, rigid :class:`Pose` algebra,
and forward/inverse kinematics for the tool centre point.
"""

from .transforms import Pose, rpy_to_rotation, rotation_to_rpy, geodesic_distance
from .urdf import (
    Box, Cylinder, Sphere, LinkGeometry, JointSpec, GripperSpec, KinematicChain,
    parse_urdf, load_urdf, bundled_urdf,
)
from .kinematics import (
    IKConfig, forward_kinematics, tool_pose, inverse_kinematics,
    numeric_jacobian, geometric_jacobian,
)

__all__ = [
    'Pose', 'rpy_to_rotation', 'rotation_to_rpy', 'geodesic_distance',
    'Box', 'Cylinder', 'Sphere', 'LinkGeometry', 'JointSpec', 'GripperSpec',
    'KinematicChain', 'parse_urdf', 'load_urdf', 'bundled_urdf',
    'IKConfig', 'forward_kinematics', 'tool_pose', 'inverse_kinematics',
    'numeric_jacobian', 'geometric_jacobian',
]
