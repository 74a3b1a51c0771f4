"""
Rigid transforms and rotation conventions.

Rotations use the extrinsic X-Y-Z roll/pitch/yaw convention,
``R = Rz(yaw) @ Ry(pitch) @ Rx(roll)``. Poses map child-frame points into
the parent frame: ``p_parent = R @ p_child + t``.
"""

from dataclasses import dataclass
from typing import Iterable, Sequence, Tuple

import numpy as np
from scipy.spatial.transform import Rotation

ORTHONORMAL_TOL = 1e-9
_GIMBAL_EPS = 1e-12


def rotx(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def roty(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rotz(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rpy_to_rotation(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Rotation matrix ``Rz(yaw) @ Ry(pitch) @ Rx(roll)``."""
    return rotz(yaw) @ roty(pitch) @ rotx(roll)


def rotation_to_rpy(rotation: np.ndarray) -> Tuple[float, float, float]:
    """
    Inverse of :func:`rpy_to_rotation`.

    Returns angles with pitch in [-pi/2, pi/2]. At gimbal lock
    (pitch = +-pi/2) roll is set to 0 and the remaining rotation is
    carried by yaw.
    """
    r = np.asarray(rotation, dtype=float)
    sin_pitch = float(np.clip(-r[2, 0], -1.0, 1.0))
    if abs(sin_pitch) < 1.0 - _GIMBAL_EPS:
        pitch = float(np.arcsin(sin_pitch))
        roll = float(np.arctan2(r[2, 1], r[2, 2]))
        yaw = float(np.arctan2(r[1, 0], r[0, 0]))
    else:
        pitch = float(np.copysign(np.pi / 2.0, sin_pitch))
        roll = 0.0
        yaw = float(np.arctan2(-r[0, 1], r[1, 1]))
    return roll, pitch, yaw


def axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation about a unit axis."""
    x, y, z = axis
    k = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    return np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)


def rotation_log(rotation: np.ndarray) -> np.ndarray:
    """Rotation vector (axis times angle) of a rotation matrix."""
    return Rotation.from_matrix(rotation).as_rotvec()


def geodesic_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Angle in radians of the relative rotation ``a^T b``."""
    return float(np.linalg.norm(rotation_log(np.asarray(a).T @ np.asarray(b))))


def is_rotation(rotation: np.ndarray, tol: float = ORTHONORMAL_TOL) -> bool:
    r = np.asarray(rotation, dtype=float)
    if r.shape != (3, 3) or not np.all(np.isfinite(r)):
        return False
    if not np.allclose(r @ r.T, np.eye(3), rtol=0.0, atol=tol):
        return False
    return abs(np.linalg.det(r) - 1.0) <= tol


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform in SE(3). Arrays are stored read-only."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        rotation = np.array(self.rotation, dtype=float).reshape(3, 3)
        translation = np.array(self.translation, dtype=float).reshape(3)
        if not is_rotation(rotation):
            raise ValueError("Pose rotation must be orthonormal with determinant 1")
        if not np.all(np.isfinite(translation)):
            raise ValueError("Pose translation must be finite")
        rotation.setflags(write=False)
        translation.setflags(write=False)
        object.__setattr__(self, "rotation", rotation)
        object.__setattr__(self, "translation", translation)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_xyz_rpy(cls, xyz: Sequence[float], rpy: Sequence[float] = (0.0, 0.0, 0.0)) -> "Pose":
        return cls(rpy_to_rotation(*rpy), xyz)

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "Pose":
        m = np.asarray(matrix, dtype=float).reshape(4, 4)
        return cls(m[:3, :3], m[:3, 3])

    @classmethod
    def from_row_major(cls, values: Iterable[float]) -> "Pose":
        """Inverse of :meth:`to_row_major` (16 doubles)."""
        return cls.from_matrix(np.asarray(list(values), dtype=float))

    def compose(self, other: "Pose") -> "Pose":
        """``self * other``: apply ``other`` first, then ``self``."""
        return Pose(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def inverse(self) -> "Pose":
        rt = self.rotation.T
        return Pose(rt, -(rt @ self.translation))

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform points of shape (..., 3)."""
        return np.asarray(points, dtype=float) @ self.rotation.T + self.translation

    def as_matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def to_row_major(self) -> list:
        return [float(v) for v in self.as_matrix().ravel()]

    def rpy(self) -> Tuple[float, float, float]:
        return rotation_to_rpy(self.rotation)

    def allclose(self, other: "Pose", atol: float = 1e-9) -> bool:
        return bool(
            np.allclose(self.rotation, other.rotation, rtol=0.0, atol=atol)
            and np.allclose(self.translation, other.translation, rtol=0.0, atol=atol)
        )

    def __repr__(self) -> str:
        roll, pitch, yaw = self.rpy()
        x, y, z = self.translation
        return f"Pose(xyz=({x:.4f}, {y:.4f}, {z:.4f}), rpy=({roll:.4f}, {pitch:.4f}, {yaw:.4f}))"
