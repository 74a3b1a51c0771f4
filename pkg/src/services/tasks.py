"""
Bundled manipulation tasks.

Each task samples a scene and a camera, scripts an expert as a list of
waypoints, and judges success twice: on the simulator state (the ground
truth) and on a rendered or predicted frame (what a world model can be
judged by).
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..render.camera import CameraModel
from ..render.scene import ARM_COLOR, SceneObject, SceneSpec, color_key_mask
from ..robot.kinematics import IKConfig
from ..robot.transforms import Pose
from ..robot.urdf import Box, Cylinder, KinematicChain, bundled_urdf
from ..utils.errors import ConfigError, MaskWorldError, SceneSamplingFailed
from ..utils.logging import get_logger
from .actions import ActionSequence, CartesianAction
from .simulator import OracleWorld
from .world import SimState

logger = get_logger("tasks")

MAX_ATTEMPTS = 10
OBJECT_TOLERANCE = 0.03
TRANSLATION_PER_STEP = 0.02
ROTATION_PER_STEP = np.radians(10.0)
DOWN_RPY = (np.pi, 0.0, np.pi)
CENTROID_TOLERANCE_PX = 2.0
REACH_IOU = 0.8
OBJECT_IOU = 0.5

TABLE_COLOR = (110, 140, 170)
MARKER_COLOR = (40, 170, 60)
CUBE_COLOR = (40, 60, 220)
PAD_COLOR = (230, 200, 40)
CUBOID_COLOR = (140, 60, 200)
DRAWER_COLOR = (150, 100, 40)


@dataclass(frozen=True)
class Waypoint:
    """Tool target reached by linear interpolation from the previous waypoint."""

    position: Tuple[float, float, float]
    rpy: Tuple[float, float, float] = DOWN_RPY
    gripper: float = 1.0
    min_steps: int = 1


@dataclass(frozen=True, eq=False)
class TaskInstance:
    task: str
    scene: SceneSpec
    start: SimState
    camera: CameraModel
    target: Dict[str, float] = field(default_factory=dict)


def _unwrap(value: np.ndarray, reference: np.ndarray) -> np.ndarray:
    return reference + (value - reference + np.pi) % (2.0 * np.pi) - np.pi


def expand_waypoints(
    start: CartesianAction,
    waypoints: Sequence[Waypoint],
) -> Tuple[List[CartesianAction], List[int]]:
    """
    Per-step actions moving through ``waypoints``.

    Segments are split so that no step moves the tool more than 2 cm or
    turns it more than 10 degrees; the gripper switches at the start of a
    segment.

    Returns:
        ``(actions, ends)`` where ``ends[i]`` is the index of the last
        action of waypoint ``i``
    """
    actions: List[CartesianAction] = []
    ends: List[int] = []
    position = np.asarray(start.position, dtype=float)
    rpy = np.asarray(start.rpy, dtype=float)
    for waypoint in waypoints:
        goal_position = np.asarray(waypoint.position, dtype=float)
        goal_rpy = _unwrap(np.asarray(waypoint.rpy, dtype=float), rpy)
        distance = float(np.linalg.norm(goal_position - position))
        turn = float(np.max(np.abs(goal_rpy - rpy)))
        steps = max(
            waypoint.min_steps,
            int(np.ceil(distance / TRANSLATION_PER_STEP - 1e-9)),
            int(np.ceil(turn / ROTATION_PER_STEP - 1e-9)),
            1,
        )
        for s in range(1, steps + 1):
            w = s / steps
            actions.append(
                CartesianAction(
                    position + w * (goal_position - position),
                    rpy + w * (goal_rpy - rpy),
                    waypoint.gripper,
                )
            )
        ends.append(len(actions) - 1)
        position, rpy = goal_position, goal_rpy
    return actions, ends


def _table(center=(0.4, 0.0), half=(0.45, 0.45), top=0.0) -> SceneObject:
    return SceneObject(
        "table",
        Box((half[0], half[1], 0.01)),
        Pose.from_xyz_rpy((center[0], center[1], top - 0.01)),
        TABLE_COLOR,
        movable=False,
    )


def _disc(name: str, xy, radius: float, color, top: float = 0.0) -> SceneObject:
    return SceneObject(
        name,
        Cylinder(radius, 0.004),
        Pose.from_xyz_rpy((xy[0], xy[1], top + 0.002)),
        color,
        movable=False,
    )


def _centroid(mask: np.ndarray) -> Optional[np.ndarray]:
    ys, xs = np.nonzero(mask)
    if xs.size == 0:
        return None
    return np.array([xs.mean(), ys.mean()])


def _iou(a: np.ndarray, b: np.ndarray) -> float:
    union = np.count_nonzero(a | b)
    if union == 0:
        return 1.0
    return np.count_nonzero(a & b) / union


class Task(ABC):
    """A sampled scene, an expert script and two success predicates."""

    name: str = ""
    urdf: str = "franka_toy"
    eye: Tuple[float, float, float] = (1.3, 0.0, 0.9)
    look: Tuple[float, float, float] = (0.4, 0.0, 0.1)
    up: Tuple[float, float, float] = (0.0, 0.0, 1.0)
    fx: float = 80.0
    # waypoint index whose end state is the intermediate subgoal
    subgoal_waypoint: Optional[int] = None

    def chains(self) -> List[KinematicChain]:
        return bundled_urdf(self.urdf).split_manipulators()

    def camera(self, rng: Optional[np.random.Generator] = None, jitter: float = 0.0,
               width: int = 64, height: int = 64) -> CameraModel:
        eye = np.asarray(self.eye, dtype=float)
        if rng is not None and jitter > 0:
            eye = eye + rng.normal(0.0, jitter, 3)
        fx = self.fx * width / 64.0
        return CameraModel.look_at(eye, self.look, self.up, fx=fx, width=width, height=height)

    def sample(
        self,
        rng: np.random.Generator,
        jitter: float = 0.0,
        width: int = 64,
        height: int = 64,
        ik: Optional[IKConfig] = None,
    ) -> TaskInstance:
        """
        Sample an instance the expert can solve.

        Raises:
            SceneSamplingFailed: No solvable instance within 10 attempts
        """
        chains = self.chains()
        camera = self.camera(rng, jitter, width, height)
        reason = ""
        for attempt in range(MAX_ATTEMPTS):
            scene, target = self.propose(rng)
            instance = TaskInstance(self.name, scene, SimState.at_home(chains, scene), camera, target)
            try:
                final = OracleWorld(chains, camera, ik).run(self.expert_actions(instance, instance.start), instance.start)
            except MaskWorldError as e:
                reason = f"({e.code}: {e})"
                logger.debug(f"{self.name}: attempt {attempt} rejected {reason}")
                continue
            if self.success(instance, final):
                return instance
            reason = "(expert did not succeed)"
        raise SceneSamplingFailed(MAX_ATTEMPTS, reason)

    def expert_actions(self, instance: TaskInstance, state: SimState, chains=None) -> ActionSequence:
        chains = chains or self.chains()
        start = CartesianAction.from_pose(state.tool_poses(chains)[0], state.grippers[0])
        actions, _ = expand_waypoints(start, self.waypoints(instance))
        return ActionSequence.single(actions)

    def goal_states(self, instance: TaskInstance, world: OracleWorld) -> List[SimState]:
        """Subgoal state (when the task has one) followed by the final goal state."""
        start = CartesianAction.from_pose(instance.start.tool_poses(world.chains)[0], 1.0)
        actions, ends = expand_waypoints(start, self.waypoints(instance))
        seq = ActionSequence.single(actions)
        state = instance.start
        states = []
        for t, step in enumerate(seq.steps):
            state = world.step(state, step, t)
            states.append(state)
        goals = []
        if self.subgoal_waypoint is not None:
            goals.append(states[ends[self.subgoal_waypoint]])
        goals.append(states[-1])
        return goals

    def goal_frames(self, instance: TaskInstance, world: OracleWorld) -> List[np.ndarray]:
        return [world.render(s)[0] for s in self.goal_states(instance, world)]

    @abstractmethod
    def propose(self, rng: np.random.Generator) -> Tuple[SceneSpec, Dict[str, float]]:
        """Candidate scene and target description."""

    @abstractmethod
    def waypoints(self, instance: TaskInstance) -> List[Waypoint]:
        """Expert script from the start configuration."""

    @abstractmethod
    def success(self, instance: TaskInstance, state: SimState) -> bool:
        """Ground-truth success on the simulator state."""

    def frame_success(self, instance: TaskInstance, frame: np.ndarray, goal_frame: np.ndarray) -> bool:
        """Success judged on pixels against the rendered goal frame."""
        return _iou(color_key_mask(frame, ARM_COLOR), color_key_mask(goal_frame, ARM_COLOR)) >= REACH_IOU


class ObjectTask(Task):
    """Tasks judged by where a coloured object ends up."""

    object_name: str = ""
    object_color: Tuple[int, int, int] = CUBE_COLOR

    def frame_success(self, instance: TaskInstance, frame: np.ndarray, goal_frame: np.ndarray) -> bool:
        seen = color_key_mask(frame, self.object_color)
        wanted = color_key_mask(goal_frame, self.object_color)
        a, b = _centroid(seen), _centroid(wanted)
        if a is None or b is None:
            return False
        close = float(np.linalg.norm(a - b)) <= CENTROID_TOLERANCE_PX
        return close and _iou(seen, wanted) >= OBJECT_IOU


class ReachTask(Task):
    name = "reach"

    def propose(self, rng):
        x, y = rng.uniform(0.35, 0.55), rng.uniform(-0.2, 0.2)
        scene = SceneSpec(objects=(_table(), _disc("marker", (x, y), 0.025, MARKER_COLOR)))
        return scene, {"x": x, "y": y, "z": 0.08}

    def waypoints(self, instance):
        t = instance.target
        return [Waypoint((t["x"], t["y"], t["z"]))]

    def success(self, instance, state):
        tcp = state.tool_poses(self.chains())[0].translation
        t = instance.target
        return float(np.linalg.norm(tcp - (t["x"], t["y"], t["z"]))) <= OBJECT_TOLERANCE


class PlanarReachTask(Task):
    name = "planar_reach"
    urdf = "planar2"
    eye = (0.6, 0.0, 3.5)
    look = (0.6, 0.0, 0.0)
    up = (1.0, 0.0, 0.0)
    fx = 64.0
    tolerance = 0.15

    def propose(self, rng):
        radius, angle = rng.uniform(0.9, 1.7), rng.uniform(-1.0, 1.0)
        x, y = radius * np.cos(angle), radius * np.sin(angle)
        scene = SceneSpec(objects=(
            _table(center=(0.6, 0.0), half=(2.5, 2.5), top=-0.1),
            _disc("marker", (x, y), 0.08, MARKER_COLOR, top=-0.1),
        ))
        return scene, {"x": x, "y": y, "z": 0.0}

    def waypoints(self, instance):
        t = instance.target
        return [Waypoint((t["x"], t["y"], 0.0), rpy=(0.0, 0.0, 0.0))]

    def success(self, instance, state):
        tcp = state.tool_poses(self.chains())[0].translation
        t = instance.target
        return float(np.hypot(tcp[0] - t["x"], tcp[1] - t["y"])) <= self.tolerance


class PickPlaceTask(ObjectTask):
    name = "pick_place"
    object_name = "cube"
    object_color = CUBE_COLOR
    subgoal_waypoint = 2
    lift = 0.12

    def propose(self, rng):
        cube = np.array([rng.uniform(0.38, 0.52), rng.uniform(-0.15, 0.15)])
        for _ in range(100):
            pad = np.array([rng.uniform(0.38, 0.52), rng.uniform(-0.15, 0.15)])
            if 0.1 <= np.linalg.norm(pad - cube) <= 0.25:
                break
        else:
            pad = cube + np.array([0.0, 0.12 if cube[1] < 0 else -0.12])
        scene = SceneSpec(objects=(
            _table(),
            _disc("pad", pad, 0.035, PAD_COLOR),
            SceneObject("cube", Box((0.02, 0.02, 0.02)), Pose.from_xyz_rpy((cube[0], cube[1], 0.02)), CUBE_COLOR),
        ))
        return scene, {"x": float(pad[0]), "y": float(pad[1]), "cube_x": float(cube[0]), "cube_y": float(cube[1])}

    def waypoints(self, instance):
        t = instance.target
        cx, cy, px, py = t["cube_x"], t["cube_y"], t["x"], t["y"]
        return [
            Waypoint((cx, cy, self.lift)),
            Waypoint((cx, cy, 0.02)),
            Waypoint((cx, cy, 0.02), gripper=0.0, min_steps=2),
            Waypoint((cx, cy, self.lift), gripper=0.0),
            Waypoint((px, py, self.lift), gripper=0.0),
            Waypoint((px, py, 0.025), gripper=0.0),
            Waypoint((px, py, 0.025), gripper=1.0, min_steps=2),
            Waypoint((px, py, self.lift)),
        ]

    def success(self, instance, state):
        if state.scene.attached(self.object_name) is not None:
            return False
        cube = state.scene.object(self.object_name).position
        t = instance.target
        return float(np.hypot(cube[0] - t["x"], cube[1] - t["y"])) <= OBJECT_TOLERANCE


class PushTask(ObjectTask):
    name = "push"
    object_name = "cube"
    object_color = CUBE_COLOR
    distance = 0.1
    # the tool trails the pushed object by this much once in contact
    lead = 0.06

    def propose(self, rng):
        x, y = rng.uniform(0.38, 0.52), rng.uniform(-0.1, 0.1)
        sign = 1.0 if rng.random() < 0.5 else -1.0
        scene = SceneSpec(objects=(
            _table(),
            SceneObject("cube", Box((0.02, 0.02, 0.02)), Pose.from_xyz_rpy((x, y, 0.02)), CUBE_COLOR),
        ))
        return scene, {"x": x, "y": y + sign * self.distance, "start_y": y, "sign": sign}

    def waypoints(self, instance):
        t = instance.target
        x, sign = t["x"], t["sign"]
        behind = t["start_y"] - sign * self.lead
        return [
            Waypoint((x, behind, 0.12)),
            Waypoint((x, behind, 0.02)),
            Waypoint((x, t["y"] - sign * self.lead, 0.02)),
            Waypoint((x, t["y"] - sign * self.lead, 0.12)),
        ]

    def success(self, instance, state):
        cube = state.scene.object(self.object_name).position
        t = instance.target
        return float(np.hypot(cube[0] - t["x"], cube[1] - t["y"])) <= OBJECT_TOLERANCE


class FlipCuboidTask(ObjectTask):
    """Turn a cuboid by 90 degrees about the vertical axis."""

    name = "flip_cuboid"
    object_name = "cuboid"
    object_color = CUBOID_COLOR
    subgoal_waypoint = 2
    turn = np.pi / 2.0
    yaw_tolerance = np.radians(15.0)

    def propose(self, rng):
        x, y = rng.uniform(0.4, 0.5), rng.uniform(-0.1, 0.1)
        scene = SceneSpec(objects=(
            _table(),
            SceneObject(
                "cuboid", Box((0.045, 0.015, 0.015)), Pose.from_xyz_rpy((x, y, 0.015)), CUBOID_COLOR
            ),
        ))
        return scene, {"x": x, "y": y, "yaw": self.turn}

    def waypoints(self, instance):
        t = instance.target
        x, y = t["x"], t["y"]
        turned = (DOWN_RPY[0], DOWN_RPY[1], DOWN_RPY[2] + t["yaw"])
        return [
            Waypoint((x, y, 0.12)),
            Waypoint((x, y, 0.015)),
            Waypoint((x, y, 0.015), gripper=0.0, min_steps=2),
            Waypoint((x, y, 0.08), gripper=0.0),
            Waypoint((x, y, 0.08), rpy=turned, gripper=0.0),
            Waypoint((x, y, 0.02), rpy=turned, gripper=0.0),
            Waypoint((x, y, 0.02), rpy=turned, gripper=1.0, min_steps=2),
            Waypoint((x, y, 0.12), rpy=turned),
        ]

    def success(self, instance, state):
        if state.scene.attached(self.object_name) is not None:
            return False
        pose = state.scene.object(self.object_name).pose
        t = instance.target
        yaw = float(np.arctan2(pose.rotation[1, 0], pose.rotation[0, 0]))
        # a cuboid looks the same after half a turn
        error = abs((yaw - t["yaw"] + np.pi / 2.0) % np.pi - np.pi / 2.0)
        near = float(np.hypot(pose.translation[0] - t["x"], pose.translation[1] - t["y"])) <= OBJECT_TOLERANCE
        return near and error <= self.yaw_tolerance


class CloseDrawerTask(ObjectTask):
    name = "close_drawer"
    object_name = "drawer"
    object_color = DRAWER_COLOR
    travel = 0.12
    closed_x = 0.56
    half = (0.06, 0.1, 0.03)

    def propose(self, rng):
        opening = rng.uniform(0.08, self.travel)
        y = rng.uniform(-0.08, 0.08)
        axis = (-1.0, 0.0, 0.0)
        origin = (self.closed_x, y, self.half[2])
        drawer = SceneObject(
            "drawer",
            Box(self.half),
            Pose.from_xyz_rpy((self.closed_x - opening, y, self.half[2])),
            DRAWER_COLOR,
            slide_axis=axis,
            slide_origin=origin,
            travel=self.travel,
        )
        return SceneSpec(objects=(_table(), drawer)), {"y": y, "opening": opening}

    def waypoints(self, instance):
        t = instance.target
        front = self.closed_x - t["opening"] - self.half[0]
        z = self.half[2]
        return [
            Waypoint((front - 0.05, t["y"], 0.15)),
            Waypoint((front - 0.05, t["y"], z)),
            Waypoint((self.closed_x - self.half[0] + 0.02, t["y"], z)),
            Waypoint((self.closed_x - self.half[0] + 0.02, t["y"], 0.15)),
        ]

    def success(self, instance, state):
        drawer = state.scene.object(self.object_name)
        return drawer.opening <= 0.1 * drawer.travel


TASKS: Dict[str, Task] = {
    task.name: task
    for task in (ReachTask(), PlanarReachTask(), PickPlaceTask(), PushTask(), FlipCuboidTask(), CloseDrawerTask())
}


def get_task(name: str) -> Task:
    try:
        return TASKS[name]
    except KeyError:
        raise ConfigError(f"unknown task '{name}'; choose from {sorted(TASKS)}")
