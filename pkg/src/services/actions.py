"""
Embodiment-agnostic action sequences and their conversion to masks.

An action sequence holds T steps of N manipulator actions. Each action is
either a Cartesian end-effector command (position, roll/pitch/yaw,
gripper) or a joint command. Sequences become joint trajectories through
inverse kinematics seeded with the previous step's solution, and joint
trajectories become mask videos through the renderer.
"""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from ..render.camera import CameraModel
from ..render.frames import MaskVideo
from ..render.scene import render_embodiment_mask
from ..robot.kinematics import IKConfig, as_joint_state, check_limits, inverse_kinematics, tool_pose
from ..robot.transforms import Pose
from ..robot.urdf import KinematicChain
from ..utils.errors import ConfigError, InvalidAction, MaskWorldError

ACTIONS_VERSION = 1
CARTESIAN_WIDTH = 7


def _gripper(value: float) -> float:
    value = float(value)
    if not (0.0 <= value <= 1.0):
        raise InvalidAction(f"gripper command must lie in [0, 1], got {value}")
    return value


def _vector(values, size: int, what: str) -> np.ndarray:
    array = np.array(values, dtype=float).reshape(-1)
    if array.shape != (size,) or not np.all(np.isfinite(array)):
        raise InvalidAction(f"{what} must be {size} finite values, got {values!r}")
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class CartesianAction:
    """End-effector command: position (m), roll/pitch/yaw (rad), gripper in [0, 1]."""

    position: np.ndarray
    rpy: np.ndarray
    gripper: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "position", _vector(self.position, 3, "position"))
        object.__setattr__(self, "rpy", _vector(self.rpy, 3, "rpy"))
        object.__setattr__(self, "gripper", _gripper(self.gripper))

    @classmethod
    def from_row(cls, row: Sequence[float]) -> "CartesianAction":
        row = list(row)
        if len(row) != CARTESIAN_WIDTH:
            raise InvalidAction(f"Cartesian action rows have 7 values, got {len(row)}")
        return cls(row[:3], row[3:6], row[6])

    @classmethod
    def from_pose(cls, pose: Pose, gripper: float = 1.0) -> "CartesianAction":
        return cls(pose.translation, pose.rpy(), gripper)

    def to_row(self) -> List[float]:
        return [*map(float, self.position), *map(float, self.rpy), float(self.gripper)]

    def pose(self) -> Pose:
        return Pose.from_xyz_rpy(self.position, self.rpy)


@dataclass(frozen=True, eq=False)
class JointAction:
    """Joint command; the gripper defaults to open."""

    q: np.ndarray
    gripper: float = 1.0

    def __post_init__(self):
        q = np.array(self.q, dtype=float).reshape(-1)
        if q.size == 0 or not np.all(np.isfinite(q)):
            raise InvalidAction(f"joint command must be finite, got {self.q!r}")
        q.setflags(write=False)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "gripper", _gripper(self.gripper))

    def to_row(self) -> List[float]:
        return [*map(float, self.q), float(self.gripper)]


ManipulatorAction = Union[CartesianAction, JointAction]


@dataclass(frozen=True, eq=False)
class ActionSequence:
    """T steps, each holding one action per manipulator."""

    steps: Tuple[Tuple[ManipulatorAction, ...], ...]

    def __post_init__(self):
        steps = tuple(tuple(step) for step in self.steps)
        if not steps:
            raise InvalidAction("an action sequence needs at least one step")
        width = len(steps[0])
        for t, step in enumerate(steps):
            if len(step) != width or width == 0:
                raise InvalidAction(f"step {t} has {len(step)} manipulator actions, expected {width}")
            for action in step:
                if not isinstance(action, (CartesianAction, JointAction)):
                    raise InvalidAction(f"step {t} holds {type(action).__name__}, not an action")
        object.__setattr__(self, "steps", steps)

    @classmethod
    def single(cls, actions: Sequence[ManipulatorAction]) -> "ActionSequence":
        """Sequence for one manipulator."""
        return cls(tuple((a,) for a in actions))

    @classmethod
    def from_array(cls, array) -> "ActionSequence":
        """Cartesian actions from a (T, 7) or (T, N, 7) array."""
        array = np.asarray(array, dtype=float)
        if array.ndim == 2:
            array = array[:, None, :]
        if array.ndim != 3 or array.shape[-1] != CARTESIAN_WIDTH:
            raise InvalidAction(f"expected a (T, N, 7) array, got {array.shape}")
        return cls(tuple(tuple(CartesianAction.from_row(row) for row in step) for step in array))

    @property
    def length(self) -> int:
        return len(self.steps)

    @property
    def manipulators(self) -> int:
        return len(self.steps[0])

    def __len__(self) -> int:
        return len(self.steps)

    def __getitem__(self, index) -> "ActionSequence":
        if isinstance(index, slice):
            return ActionSequence(self.steps[index])
        return ActionSequence((self.steps[index],))

    def is_cartesian(self) -> bool:
        return all(isinstance(a, CartesianAction) for step in self.steps for a in step)

    def to_array(self) -> np.ndarray:
        """(T, N, 7) array; Cartesian sequences only."""
        if not self.is_cartesian():
            raise InvalidAction("only Cartesian sequences convert to (T, N, 7) arrays")
        return np.array([[a.to_row() for a in step] for step in self.steps], dtype=float)

    def to_rows(self) -> List[List[float]]:
        """One row per step, manipulator rows concatenated."""
        return [[v for a in step for v in a.to_row()] for step in self.steps]

    def concat(self, other: "ActionSequence") -> "ActionSequence":
        if other.manipulators != self.manipulators:
            raise InvalidAction("cannot join sequences for different manipulator counts")
        return ActionSequence(self.steps + other.steps)

    def pad_to(self, length: int) -> "ActionSequence":
        """Repeat the final step until the sequence has ``length`` steps."""
        if length <= len(self):
            return self
        return ActionSequence(self.steps + (self.steps[-1],) * (length - len(self)))

    def to_dict(self) -> dict:
        steps = []
        for step in self.steps:
            entries = []
            for a in step:
                if isinstance(a, CartesianAction):
                    entries.append({
                        "position": [float(v) for v in a.position],
                        "rpy": [float(v) for v in a.rpy],
                        "gripper": a.gripper,
                    })
                else:
                    entries.append({"q": [float(v) for v in a.q], "gripper": a.gripper})
            steps.append(entries)
        return {"version": ACTIONS_VERSION, "manipulators": self.manipulators, "steps": steps}

    @classmethod
    def from_dict(cls, data: dict) -> "ActionSequence":
        version = data.get("version", ACTIONS_VERSION)
        if version != ACTIONS_VERSION:
            raise InvalidAction(f"unsupported action file version {version}")
        steps = []
        for step in data.get("steps", []):
            entries = []
            for entry in step:
                if "q" in entry:
                    entries.append(JointAction(entry["q"], entry.get("gripper", 1.0)))
                else:
                    entries.append(CartesianAction(entry["position"], entry["rpy"], entry.get("gripper", 1.0)))
            steps.append(tuple(entries))
        return cls(tuple(steps))


def save_actions(path: Union[str, Path], seq: ActionSequence) -> None:
    Path(path).write_text(json.dumps(seq.to_dict(), indent=2), encoding="utf-8")


def load_actions(path: Union[str, Path]) -> ActionSequence:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise RuntimeError(f"Failed to read actions {path}: {e}")
    return ActionSequence.from_dict(data)


def hold_action(chain: KinematicChain, q, gripper: float = 1.0) -> CartesianAction:
    """Cartesian command that keeps the tool where it is."""
    return CartesianAction.from_pose(tool_pose(chain, q), gripper)


def hold_step(chains: Sequence[KinematicChain], joints, grippers) -> Tuple[CartesianAction, ...]:
    return tuple(hold_action(c, q, g) for c, q, g in zip(chains, joints, grippers))


@dataclass(frozen=True, eq=False)
class JointTrajectory:
    """Per-manipulator joint states (T, d_n) and gripper openings (T, N)."""

    joints: Tuple[np.ndarray, ...]
    grippers: np.ndarray

    def __len__(self) -> int:
        return self.grippers.shape[0]

    def step(self, t: int) -> Tuple[List[np.ndarray], List[float]]:
        return [q[t] for q in self.joints], [float(g) for g in self.grippers[t]]

    @property
    def final(self) -> Tuple[List[np.ndarray], List[float]]:
        return self.step(len(self) - 1)


def solve_step(
    action: ManipulatorAction,
    chain: KinematicChain,
    seed: np.ndarray,
    ik: Optional[IKConfig] = None,
) -> Tuple[np.ndarray, float]:
    """Joint state and gripper opening realising one manipulator action."""
    if isinstance(action, JointAction):
        q = as_joint_state(chain, action.q)
        check_limits(chain, q)
        return q, action.gripper
    return inverse_kinematics(chain, action.pose(), seed, ik), action.gripper


def _check_manipulators(seq: ActionSequence, chains: Sequence[KinematicChain], seeds) -> None:
    if len(chains) != seq.manipulators:
        raise ConfigError(f"sequence drives {seq.manipulators} manipulators but {len(chains)} chains were given")
    if seeds is not None and len(seeds) != len(chains):
        raise ConfigError(f"{len(chains)} chains need {len(chains)} seeds, got {len(seeds)}")


def actions_to_joint_states(
    seq: ActionSequence,
    chains: Sequence[KinematicChain],
    seeds: Optional[Sequence] = None,
    ik: Optional[IKConfig] = None,
) -> JointTrajectory:
    """
    Convert an action sequence into per-step joint states.

    Step t is solved with step t-1's solution as the IK seed; joint actions
    are limit-checked and passed through unchanged.

    Args:
        seq: Action sequence for N manipulators
        chains: One kinematic chain per manipulator
        seeds: Initial joint state per chain (default: home configurations)
        ik: Inverse kinematics settings

    Returns:
        JointTrajectory with T rows per manipulator

    Raises:
        DidNotConverge, UnreachableTarget, JointLimitViolation: tagged with
            the failing step
    """
    chains = list(chains)
    _check_manipulators(seq, chains, seeds)
    current = [
        as_joint_state(c, s) for c, s in zip(chains, seeds if seeds is not None else [c.home_configuration() for c in chains])
    ]
    joints = [[] for _ in chains]
    grippers = []
    for t, step in enumerate(seq.steps):
        row = []
        for n, (action, chain) in enumerate(zip(step, chains)):
            try:
                q, g = solve_step(action, chain, current[n], ik)
            except MaskWorldError as e:
                raise e.at_step(t)
            current[n] = q
            joints[n].append(q)
            row.append(g)
        grippers.append(row)
    return JointTrajectory(
        joints=tuple(np.array(q) for q in joints),
        grippers=np.array(grippers, dtype=float),
    )


def masks_from_trajectory(
    trajectory: JointTrajectory,
    chains: Sequence[KinematicChain],
    cam: CameraModel,
    world_from_base: Optional[Pose] = None,
) -> MaskVideo:
    frames = []
    for t in range(len(trajectory)):
        qs, gs = trajectory.step(t)
        frame = np.zeros((cam.height, cam.width), dtype=bool)
        for chain, q, g in zip(chains, qs, gs):
            frame |= render_embodiment_mask(chain, q, cam, g, world_from_base)
        frames.append(frame)
    return MaskVideo.from_frames(frames)


def masks_from_actions(
    seq: ActionSequence,
    chains: Sequence[KinematicChain],
    cam: CameraModel,
    seeds: Optional[Sequence] = None,
    ik: Optional[IKConfig] = None,
    world_from_base: Optional[Pose] = None,
) -> MaskVideo:
    """
    Embodiment mask video for an action sequence.

    Frame t is the union over manipulators of their silhouettes at step t.

    Raises:
        Kinematics errors tagged with the failing step
    """
    trajectory = actions_to_joint_states(seq, chains, seeds, ik)
    return masks_from_trajectory(trajectory, chains, cam, world_from_base)
