"""
Embodiment silhouettes and flat-shaded oracle scenes.

The arm is always drawn in the reserved ``ARM_COLOR``; scene objects may
not use a colour close to it, so arm pixels can be recovered from RGB
frames by colour keying.
"""

from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from ..robot.kinematics import as_joint_state, check_limits, forward_kinematics, tool_pose
from ..robot.transforms import Pose
from ..robot.urdf import Box, Cylinder, GripperSpec, KinematicChain, Primitive, Sphere
from ..utils.errors import ConfigError
from .camera import CameraModel
from .rasterizer import rasterize
from .tessellation import primitive_triangles

ARM_COLOR = (255, 32, 32)
BACKGROUND_COLOR = (200, 200, 200)
RESERVED_DISTANCE = 80.0
COLOR_KEY_THRESHOLD = 40.0


def _check_color(color: Tuple[int, int, int], what: str) -> None:
    if len(color) != 3 or not all(0 <= c <= 255 for c in color):
        raise ConfigError(f"{what} colour must be three values in [0, 255], got {color}")
    if np.linalg.norm(np.subtract(color, ARM_COLOR, dtype=float)) < RESERVED_DISTANCE:
        raise ConfigError(f"{what} colour {tuple(color)} is too close to the arm colour")


@dataclass(frozen=True, eq=False)
class SceneObject:
    """
    A rigid coloured primitive.

    Drawers are objects with a ``slide_axis``: their position is confined to
    ``slide_origin + s * slide_axis`` with ``s`` in ``[0, travel]``.
    """

    name: str
    primitive: Primitive
    pose: Pose
    color: Tuple[int, int, int]
    movable: bool = True
    slide_axis: Optional[Tuple[float, float, float]] = None
    slide_origin: Optional[Tuple[float, float, float]] = None
    travel: float = 0.0

    def __post_init__(self):
        _check_color(self.color, f"object '{self.name}'")
        object.__setattr__(self, "color", tuple(int(c) for c in self.color))

    def with_pose(self, pose: Pose) -> "SceneObject":
        return replace(self, pose=pose)

    @property
    def position(self) -> np.ndarray:
        return self.pose.translation

    @property
    def opening(self) -> float:
        """Drawer displacement along its slide axis (0 when closed)."""
        if self.slide_axis is None:
            return 0.0
        return float(np.dot(self.position - np.asarray(self.slide_origin), self.slide_axis))


@dataclass(frozen=True, eq=False)
class Attachment:
    """Object welded to manipulator ``manipulator`` at a fixed TCP offset."""

    object_name: str
    manipulator: int
    tcp_from_object: Pose
    rest_z: float = 0.0


@dataclass(frozen=True, eq=False)
class SceneSpec:
    objects: Tuple[SceneObject, ...] = ()
    background: Tuple[int, int, int] = BACKGROUND_COLOR
    robot_base: Pose = field(default_factory=Pose.identity)
    attachments: Tuple[Attachment, ...] = ()

    def __post_init__(self):
        _check_color(self.background, "background")
        names = [o.name for o in self.objects]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate scene object names: {names}")

    def object(self, name: str) -> SceneObject:
        for obj in self.objects:
            if obj.name == name:
                return obj
        raise KeyError(name)

    def with_object(self, updated: SceneObject) -> "SceneSpec":
        objects = tuple(updated if o.name == updated.name else o for o in self.objects)
        return replace(self, objects=objects)

    def attached(self, name: str) -> Optional[Attachment]:
        for attachment in self.attachments:
            if attachment.object_name == name:
                return attachment
        return None


def _posed(pose: Pose, primitive: Primitive) -> np.ndarray:
    return pose.apply(primitive_triangles(primitive))


def finger_boxes(gripper: GripperSpec, opening: float) -> List[Tuple[Pose, Box]]:
    """Two finger boxes in the gripper link frame; gap = opening * max_gap."""
    half = 0.5 * gripper.finger_width
    offset = 0.5 * float(np.clip(opening, 0.0, 1.0)) * gripper.max_gap + half
    box = Box((half, half, 0.5 * gripper.finger_length))
    z = 0.5 * gripper.finger_length
    return [
        (Pose.from_xyz_rpy((0.0, side * offset, z)), box)
        for side in (1.0, -1.0)
    ]


def _as_openings(chain: KinematicChain, gripper) -> List[float]:
    if np.ndim(gripper) == 0:
        return [float(gripper)] * len(chain.grippers)
    values = [float(g) for g in gripper]
    if len(values) != len(chain.grippers):
        raise ConfigError(f"chain '{chain.name}' has {len(chain.grippers)} grippers, got {len(values)} values")
    return values


def embodiment_triangles(
    chain: KinematicChain,
    q,
    gripper: Union[float, Sequence[float]] = 1.0,
    frame: Optional[Pose] = None,
) -> np.ndarray:
    """
    All embodiment triangles (F, 3, 3) for joint state ``q``.

    Args:
        chain: Kinematic chain
        q: Joint state (limit-checked)
        gripper: Opening in [0, 1], per gripper or shared
        frame: Transform applied to base-frame geometry (default identity)
    """
    poses = forward_kinematics(chain, q)
    frame = frame or Pose.identity()
    parts = []
    for link, geoms in chain.links:
        link_pose = frame.compose(poses[link])
        for geom in geoms:
            parts.append(_posed(link_pose.compose(geom.origin), geom.primitive))
    for spec, opening in zip(chain.grippers, _as_openings(chain, gripper)):
        hand = frame.compose(poses[spec.link])
        for finger_pose, box in finger_boxes(spec, opening):
            parts.append(_posed(hand.compose(finger_pose), box))
    if not parts:
        return np.zeros((0, 3, 3))
    return np.concatenate(parts)


def render_embodiment_mask(
    chain: KinematicChain,
    q,
    cam: CameraModel,
    gripper: Union[float, Sequence[float]] = 1.0,
    world_from_base: Optional[Pose] = None,
) -> np.ndarray:
    """
    Binary silhouette of the embodiment at ``q``.

    A pixel is set iff its centre is covered by any link primitive or
    finger. Occlusion by scene objects is ignored.

    Returns:
        (H, W) boolean mask

    Raises:
        JointLimitViolation: ``q`` outside the joint limits
    """
    camera_from_base = cam.extrinsic.compose(world_from_base or Pose.identity())
    tris = embodiment_triangles(chain, q, gripper, frame=camera_from_base)
    _, owner = rasterize(tris, cam)
    return owner >= 0


def _as_manipulators(chains, qs, grippers) -> Tuple[list, list, list]:
    if isinstance(chains, KinematicChain):
        chains, qs = [chains], [qs]
        grippers = [grippers]
    chains, qs = list(chains), list(qs)
    if np.ndim(grippers) == 0:
        grippers = [grippers] * len(chains)
    grippers = list(grippers)
    if not (len(chains) == len(qs) == len(grippers)):
        raise ConfigError("one joint state and gripper value is needed per manipulator")
    return chains, qs, grippers


def object_pose(scene: SceneSpec, obj: SceneObject, tcp_poses: Sequence[Pose]) -> Pose:
    """World pose of ``obj``, following its attachment when grasped."""
    attachment = scene.attached(obj.name)
    if attachment is None:
        return obj.pose
    return tcp_poses[attachment.manipulator].compose(attachment.tcp_from_object)


def render_scene(
    scene: SceneSpec,
    chains: Union[KinematicChain, Sequence[KinematicChain]],
    qs,
    cam: CameraModel,
    grippers: Union[float, Sequence[float]] = 1.0,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Flat-shaded render of the scene with the arm(s) in ``ARM_COLOR``.

    Args:
        scene: Objects, background, robot base and attachments
        chains: One chain or one chain per manipulator
        qs: Joint state(s) matching ``chains``
        cam: Camera
        grippers: Gripper opening(s) in [0, 1]

    Returns:
        ``(rgb, mask)``: (H, W, 3) uint8 frame and the occlusion-aware
        (H, W) arm mask, i.e. pixels whose nearest surface is the arm

    Raises:
        JointLimitViolation: A joint state is outside its limits
    """
    chains, qs, grippers = _as_manipulators(chains, qs, grippers)
    camera_from_base = cam.extrinsic.compose(scene.robot_base)

    parts = []
    owners = []
    tcp_poses = []
    for chain, q, gripper in zip(chains, qs, grippers):
        q = as_joint_state(chain, q)
        check_limits(chain, q)
        tris = embodiment_triangles(chain, q, gripper, frame=camera_from_base)
        parts.append(tris)
        owners.append(np.zeros(len(tris), dtype=np.int64))
        tcp_poses.append(scene.robot_base.compose(tool_pose(chain, q)))

    for i, obj in enumerate(scene.objects, start=1):
        pose = cam.extrinsic.compose(object_pose(scene, obj, tcp_poses))
        tris = _posed(pose, obj.primitive)
        parts.append(tris)
        owners.append(np.full(len(tris), i, dtype=np.int64))

    palette = np.array([ARM_COLOR] + [o.color for o in scene.objects], dtype=np.uint8)
    _, winner = rasterize(np.concatenate(parts), cam)
    source = np.concatenate(owners)

    rgb = np.empty((cam.height, cam.width, 3), dtype=np.uint8)
    rgb[:] = np.asarray(scene.background, dtype=np.uint8)
    covered = winner >= 0
    layer = source[winner[covered]]
    rgb[covered] = palette[layer]
    mask = np.zeros((cam.height, cam.width), dtype=bool)
    mask[covered] = layer == 0
    return rgb, mask


def color_key_mask(
    frames: np.ndarray,
    color: Tuple[int, int, int] = ARM_COLOR,
    threshold: float = COLOR_KEY_THRESHOLD,
) -> np.ndarray:
    """Pixels of (..., H, W, 3) frames within ``threshold`` (RGB distance) of ``color``."""
    diff = np.asarray(frames, dtype=float) - np.asarray(color, dtype=float)
    return np.sqrt(np.sum(diff * diff, axis=-1)) <= threshold


def primitive_to_dict(primitive: Primitive) -> dict:
    if isinstance(primitive, Box):
        return {"kind": "box", "half_extents": [float(h) for h in primitive.half_extents]}
    if isinstance(primitive, Cylinder):
        return {"kind": "cylinder", "radius": float(primitive.radius), "length": float(primitive.length)}
    if isinstance(primitive, Sphere):
        return {"kind": "sphere", "radius": float(primitive.radius)}
    raise TypeError(f"unsupported primitive {primitive!r}")


def primitive_from_dict(data: dict) -> Primitive:
    kind = data.get("kind")
    if kind == "box":
        return Box(tuple(float(h) for h in data["half_extents"]))
    if kind == "cylinder":
        return Cylinder(float(data["radius"]), float(data["length"]))
    if kind == "sphere":
        return Sphere(float(data["radius"]))
    raise ConfigError(f"unknown primitive kind '{kind}'")


def scene_to_dict(scene: SceneSpec) -> dict:
    objects = []
    for obj in scene.objects:
        entry = {
            "name": obj.name,
            "primitive": primitive_to_dict(obj.primitive),
            "pose": obj.pose.to_row_major(),
            "color": list(obj.color),
            "movable": obj.movable,
        }
        if obj.slide_axis is not None:
            entry["slide_axis"] = [float(v) for v in obj.slide_axis]
            entry["slide_origin"] = [float(v) for v in obj.slide_origin]
            entry["travel"] = float(obj.travel)
        objects.append(entry)
    return {
        "objects": objects,
        "background": list(scene.background),
        "robot_base": scene.robot_base.to_row_major(),
        "attachments": [
            {
                "object": a.object_name,
                "manipulator": a.manipulator,
                "tcp_from_object": a.tcp_from_object.to_row_major(),
                "rest_z": a.rest_z,
            }
            for a in scene.attachments
        ],
    }


def scene_from_dict(data: dict) -> SceneSpec:
    try:
        objects = tuple(
            SceneObject(
                name=entry["name"],
                primitive=primitive_from_dict(entry["primitive"]),
                pose=Pose.from_row_major(entry["pose"]),
                color=tuple(entry["color"]),
                movable=bool(entry.get("movable", True)),
                slide_axis=tuple(entry["slide_axis"]) if "slide_axis" in entry else None,
                slide_origin=tuple(entry["slide_origin"]) if "slide_origin" in entry else None,
                travel=float(entry.get("travel", 0.0)),
            )
            for entry in data.get("objects", [])
        )
        attachments = tuple(
            Attachment(
                a["object"], int(a["manipulator"]), Pose.from_row_major(a["tcp_from_object"]), float(a["rest_z"])
            )
            for a in data.get("attachments", [])
        )
        return SceneSpec(
            objects=objects,
            background=tuple(data.get("background", BACKGROUND_COLOR)),
            robot_base=Pose.from_row_major(data["robot_base"]) if "robot_base" in data else Pose.identity(),
            attachments=attachments,
        )
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"invalid scene description: {e}")
