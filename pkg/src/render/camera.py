"""
Pinhole camera model (OpenCV convention: x right, y down, z forward).
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from ..robot.transforms import Pose
from ..utils.errors import ConfigError

Z_NEAR = 0.01


class _Behind:
    """Marker for points at or behind the near plane."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "BEHIND"


BEHIND = _Behind()


@dataclass(frozen=True, eq=False)
class CameraModel:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    extrinsic: Pose  # world -> camera

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ConfigError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if self.width <= 0 or self.height <= 0:
            raise ConfigError(f"image size must be positive, got {self.width}x{self.height}")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ConfigError(f"principal point ({self.cx}, {self.cy}) outside the image")

    @classmethod
    def look_at(
        cls,
        eye: Sequence[float],
        target: Sequence[float],
        up: Sequence[float] = (0.0, 0.0, 1.0),
        fx: float = 80.0,
        fy: Optional[float] = None,
        width: int = 64,
        height: int = 64,
    ) -> "CameraModel":
        """Camera at ``eye`` looking at ``target`` with the principal point centred."""
        eye = np.asarray(eye, dtype=float)
        forward = np.asarray(target, dtype=float) - eye
        forward /= np.linalg.norm(forward)
        right = np.cross(forward, np.asarray(up, dtype=float))
        if np.linalg.norm(right) < 1e-9:
            raise ConfigError("camera up vector is parallel to the viewing direction")
        right /= np.linalg.norm(right)
        down = np.cross(forward, right)
        rotation = np.stack([right, down, forward])
        return cls(
            fx=float(fx),
            fy=float(fy if fy is not None else fx),
            cx=width / 2.0,
            cy=height / 2.0,
            width=int(width),
            height=int(height),
            extrinsic=Pose(rotation, -(rotation @ eye)),
        )

    def with_extrinsic(self, extrinsic: Pose) -> "CameraModel":
        return CameraModel(self.fx, self.fy, self.cx, self.cy, self.width, self.height, extrinsic)

    def project(self, points_cam: np.ndarray) -> np.ndarray:
        """(u, v) for camera-frame points (..., 3); no near-plane test."""
        p = np.asarray(points_cam, dtype=float)
        z = p[..., 2]
        u = self.fx * p[..., 0] / z + self.cx
        v = self.fy * p[..., 1] / z + self.cy
        return np.stack([u, v], axis=-1)

    def project_point(self, p_world: Sequence[float]) -> Union[Tuple[float, float], _Behind]:
        """
        Project a world point to continuous pixel coordinates.

        Returns:
            (u, v), possibly outside the frame, or ``BEHIND`` when the
            camera-frame depth is at most ``Z_NEAR``
        """
        p_cam = self.extrinsic.apply(np.asarray(p_world, dtype=float))
        if p_cam[2] <= Z_NEAR:
            return BEHIND
        u, v = self.project(p_cam)
        return float(u), float(v)

    def to_dict(self) -> dict:
        return {
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "width": self.width,
            "height": self.height,
            "extrinsic": self.extrinsic.to_row_major(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CameraModel":
        try:
            return cls(
                fx=float(data["fx"]),
                fy=float(data["fy"]),
                cx=float(data["cx"]),
                cy=float(data["cy"]),
                width=int(data["width"]),
                height=int(data["height"]),
                extrinsic=Pose.from_row_major(data["extrinsic"]),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"invalid camera description: {e}")
