"""
Kinematic oracle world model.

Actions are turned into joint states with the same solver used for masks,
objects follow simple kinematic rules, and every frame is rendered with
:func:`render_scene`. Rules:

- grasp: a gripper command below 0.5 welds the nearest movable object
  whose centre lies within ``grasp_radius`` of the tool centre point;
- release: a command of 0.5 or more drops the object flat onto its
  resting height;
- push: an unattached object whose inflated footprint contains the tool
  centre point moves with the tool's horizontal motion; drawers move only
  along their slide axis, within their travel.
"""

from dataclasses import replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..render.camera import CameraModel
from ..render.frames import MaskVideo, RgbVideo
from ..render.scene import Attachment, SceneObject, SceneSpec, render_scene
from ..robot.kinematics import IKConfig, tool_pose
from ..robot.transforms import Pose, rotz
from ..robot.urdf import Box, Cylinder, KinematicChain, Sphere
from ..utils.errors import ConfigError, MaskWorldError
from ..utils.logging import get_logger
from .actions import ActionSequence, ManipulatorAction, solve_step
from .world import Prediction, SimState, WorldModel

logger = get_logger("simulator")

GRASP_RADIUS = 0.05
GRIPPER_CLOSED = 0.5
PUSH_MARGIN = 0.02


def half_extents(obj: SceneObject) -> np.ndarray:
    """Axis-aligned half extents of the object's primitive in its own frame."""
    primitive = obj.primitive
    if isinstance(primitive, Box):
        return np.asarray(primitive.half_extents, dtype=float)
    if isinstance(primitive, Cylinder):
        return np.array([primitive.radius, primitive.radius, primitive.length / 2.0])
    if isinstance(primitive, Sphere):
        return np.full(3, primitive.radius)
    raise TypeError(f"unsupported primitive {primitive!r}")


def settle(pose: Pose, rest_z: float) -> Pose:
    """Keep position x/y and heading; put the object flat at ``rest_z``."""
    yaw = float(np.arctan2(pose.rotation[1, 0], pose.rotation[0, 0]))
    x, y, _ = pose.translation
    return Pose(rotz(yaw), (x, y, rest_z))


class OracleWorld(WorldModel):
    """Ground-truth kinematic simulator satisfying :class:`WorldModel`."""

    def __init__(
        self,
        chains: Sequence[KinematicChain],
        cam: CameraModel,
        ik: Optional[IKConfig] = None,
        grasp_radius: float = GRASP_RADIUS,
    ):
        if isinstance(chains, KinematicChain):
            chains = [chains]
        self.chains = tuple(chains)
        self.cam = cam
        self.ik = ik
        self.grasp_radius = grasp_radius

    def render(self, state: SimState) -> Tuple[np.ndarray, np.ndarray]:
        """(rgb, occlusion-aware arm mask) of a state."""
        return render_scene(state.scene, self.chains, state.joints, self.cam, state.grippers)

    def step(self, state: SimState, step: Sequence[ManipulatorAction], t: int = 0) -> SimState:
        """Apply one step of manipulator actions."""
        if len(step) != len(self.chains):
            raise ConfigError(f"step drives {len(step)} manipulators, world has {len(self.chains)}")
        base = state.scene.robot_base
        joints, grippers = [], []
        before, after = [], []
        for n, (action, chain) in enumerate(zip(step, self.chains)):
            try:
                q, g = solve_step(action, chain, state.joints[n], self.ik)
            except MaskWorldError as e:
                raise e.at_step(t)
            before.append(base.compose(tool_pose(chain, state.joints[n])))
            after.append(base.compose(tool_pose(chain, q)))
            joints.append(q)
            grippers.append(g)

        scene = self._update_objects(state.scene, before, after, grippers)
        return SimState(tuple(joints), tuple(grippers), scene)

    def _update_objects(
        self,
        scene: SceneSpec,
        before: List[Pose],
        after: List[Pose],
        grippers: List[float],
    ) -> SceneSpec:
        attachments = list(scene.attachments)

        # release
        for attachment in list(attachments):
            if grippers[attachment.manipulator] >= GRIPPER_CLOSED:
                obj = scene.object(attachment.object_name)
                carried = after[attachment.manipulator].compose(attachment.tcp_from_object)
                scene = scene.with_object(obj.with_pose(settle(carried, attachment.rest_z)))
                attachments.remove(attachment)
                logger.debug(f"released '{obj.name}' at {np.round(carried.translation, 4)}")

        holding = {a.manipulator for a in attachments}
        attached = {a.object_name for a in attachments}

        # grasp
        for n, g in enumerate(grippers):
            if g >= GRIPPER_CLOSED or n in holding:
                continue
            tcp = after[n]
            best, best_distance = None, self.grasp_radius
            for obj in scene.objects:
                if not obj.movable or obj.slide_axis is not None or obj.name in attached:
                    continue
                distance = float(np.linalg.norm(obj.pose.translation - tcp.translation))
                if distance <= best_distance:
                    best, best_distance = obj, distance
            if best is not None:
                attachments.append(
                    Attachment(best.name, n, tcp.inverse().compose(best.pose), float(best.pose.translation[2]))
                )
                holding.add(n)
                attached.add(best.name)
                logger.debug(f"grasped '{best.name}' with manipulator {n}")

        # push
        for obj in scene.objects:
            if not obj.movable or obj.name in attached:
                continue
            pose = obj.pose
            limit = half_extents(obj) + PUSH_MARGIN
            for n in range(len(after)):
                local = pose.inverse().apply(after[n].translation)
                if np.any(np.abs(local) > limit):
                    continue
                delta = after[n].translation - before[n].translation
                if obj.slide_axis is not None:
                    axis = np.asarray(obj.slide_axis, dtype=float)
                    origin = np.asarray(obj.slide_origin, dtype=float)
                    opening = float(np.clip(obj.opening + np.dot(delta, axis), 0.0, obj.travel))
                    pose = Pose(pose.rotation, origin + opening * axis)
                else:
                    pose = Pose(pose.rotation, pose.translation + np.array([delta[0], delta[1], 0.0]))
            if pose is not obj.pose:
                scene = scene.with_object(obj.with_pose(pose))

        return replace(scene, attachments=tuple(attachments))

    def rollout(self, actions: ActionSequence, state: SimState) -> Tuple[List[SimState], RgbVideo, MaskVideo]:
        states, frames, masks = [], [], []
        for t, step in enumerate(actions.steps):
            state = self.step(state, step, t)
            rgb, mask = self.render(state)
            states.append(state)
            frames.append(rgb)
            masks.append(mask)
        return states, RgbVideo.from_frames(frames), MaskVideo.from_frames(masks)

    def predict(self, initial_frame: np.ndarray, actions: ActionSequence, state: SimState) -> Prediction:
        """
        Roll the kinematic scene forward; ``initial_frame`` is not needed.

        Raises:
            Kinematics errors tagged with the failing step
        """
        states, video, masks = self.rollout(actions, state)
        return Prediction(video=video, state=states[-1], masks=masks)

    def predict_final(self, initial_frame: np.ndarray, actions: ActionSequence, state: SimState) -> np.ndarray:
        for t, step in enumerate(actions.steps):
            state = self.step(state, step, t)
        return self.render(state)[0]

    def run(self, actions: ActionSequence, state: SimState) -> SimState:
        """Final state after ``actions`` without rendering."""
        for t, step in enumerate(actions.steps):
            state = self.step(state, step, t)
        return state


def oracle_predict(
    scene: SceneSpec,
    chains: Sequence[KinematicChain],
    cam: CameraModel,
    actions: ActionSequence,
    seeds: Optional[Sequence] = None,
    ik: Optional[IKConfig] = None,
) -> Tuple[RgbVideo, MaskVideo]:
    """
    Ground-truth video and occlusion-aware arm masks for ``actions``.

    Args:
        scene: Initial scene
        chains: One chain per manipulator
        cam: Camera
        actions: Action sequence
        seeds: Initial joint states (default: home configurations)
        ik: Inverse kinematics settings
    """
    world = OracleWorld(chains, cam, ik)
    if seeds is None:
        state = SimState.at_home(world.chains, scene)
    else:
        state = SimState(tuple(seeds), tuple(1.0 for _ in world.chains), scene)
    prediction = world.predict(None, actions, state)
    return prediction.video, prediction.masks
