"""
World-model interface shared by the kinematic oracle and the learned predictor.

A world model maps an initial frame, an action sequence and the current
embodiment state to one frame per action: frame t shows the scene after
action t has been applied.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from ..render.camera import CameraModel
from ..render.frames import MaskVideo, RgbVideo
from ..render.scene import SceneSpec
from ..robot.kinematics import tool_pose
from ..robot.transforms import Pose
from ..robot.urdf import KinematicChain
from .actions import ActionSequence


@dataclass(frozen=True, eq=False)
class SimState:
    """Embodiment joint states, gripper openings and the scene they act in."""

    joints: Tuple[np.ndarray, ...]
    grippers: Tuple[float, ...]
    scene: SceneSpec

    def __post_init__(self):
        object.__setattr__(self, "joints", tuple(np.array(q, dtype=float) for q in self.joints))
        object.__setattr__(self, "grippers", tuple(float(g) for g in self.grippers))

    @classmethod
    def at_home(cls, chains: Sequence[KinematicChain], scene: Optional[SceneSpec] = None) -> "SimState":
        return cls(
            joints=tuple(c.home_configuration() for c in chains),
            grippers=tuple(1.0 for _ in chains),
            scene=scene or SceneSpec(),
        )

    def tool_poses(self, chains: Sequence[KinematicChain]) -> Tuple[Pose, ...]:
        """World-frame tool centre point of every manipulator."""
        base = self.scene.robot_base
        return tuple(base.compose(tool_pose(c, q)) for c, q in zip(chains, self.joints))


@dataclass(frozen=True, eq=False)
class Prediction:
    video: RgbVideo
    state: SimState
    masks: Optional[MaskVideo] = None


class WorldModel(ABC):
    """
    Action-conditioned video predictor.

    Subclasses expose the embodiment (``chains``) and the camera they
    render for. ``chunk_length`` is the number of actions consumed per
    call natively (``None`` when any length is accepted).
    """

    chains: Tuple[KinematicChain, ...]
    cam: CameraModel
    chunk_length: Optional[int] = None

    @abstractmethod
    def predict(self, initial_frame: np.ndarray, actions: ActionSequence, state: SimState) -> Prediction:
        """One frame per action, plus the successor state."""

    def predict_final(self, initial_frame: np.ndarray, actions: ActionSequence, state: SimState) -> np.ndarray:
        """Last predicted frame only."""
        return self.predict(initial_frame, actions, state).video.last
