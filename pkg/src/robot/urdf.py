"""
URDF subset parser.

Supported: ``<robot>``, ``<link>`` with ``<collision>`` (or, failing that,
``<visual>``) box/cylinder/sphere primitives, and revolute, continuous,
prismatic and fixed ``<joint>`` elements. Two maskworld-specific elements
are understood as well:

- ``<gripper link=".." max_gap=".." finger_length=".." finger_width=".."/>``
  attaches a two-finger parallel gripper to a link;
- ``<home q=".."/>`` records a home configuration.

Everything else is ignored. Mesh geometry is rejected.
"""

import xml.etree.ElementTree as ET
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..utils.errors import (
    CyclicJointGraph,
    MalformedUrdf,
    MalformedXml,
    MissingLink,
    UnsupportedGeometry,
)
from .transforms import Pose

REVOLUTE = "revolute"
PRISMATIC = "prismatic"
FIXED = "fixed"

ASSET_DIR = Path(__file__).parent / "assets"


@dataclass(frozen=True)
class Box:
    half_extents: Tuple[float, float, float]


@dataclass(frozen=True)
class Cylinder:
    """Cylinder along the local z axis, centred on the origin."""

    radius: float
    length: float


@dataclass(frozen=True)
class Sphere:
    radius: float


Primitive = Union[Box, Cylinder, Sphere]


@dataclass(frozen=True, eq=False)
class LinkGeometry:
    primitive: Primitive
    origin: Pose = field(default_factory=Pose.identity)

    def __post_init__(self):
        dims = _primitive_dims(self.primitive)
        if not all(np.isfinite(d) and d > 0 for d in dims):
            raise MalformedUrdf(f"primitive dimensions must be positive: {self.primitive}")


@dataclass(frozen=True, eq=False)
class JointSpec:
    name: str
    kind: str
    axis: np.ndarray
    origin: Pose
    lower: float
    upper: float
    parent_link: str
    child_link: str

    @property
    def actuated(self) -> bool:
        return self.kind != FIXED


@dataclass(frozen=True)
class GripperSpec:
    """Parallel gripper: two finger boxes hanging along +z of ``link``.

    The tool centre point sits at the fingertips, ``finger_length`` along +z.
    """

    link: str
    max_gap: float
    finger_length: float
    finger_width: float


@dataclass(frozen=True, eq=False)
class KinematicChain:
    name: str
    base_link: str
    links: Tuple[Tuple[str, Tuple[LinkGeometry, ...]], ...]
    joints: Tuple[JointSpec, ...]
    grippers: Tuple[GripperSpec, ...] = ()
    home: Optional[np.ndarray] = None

    @property
    def actuated_joints(self) -> List[JointSpec]:
        return [j for j in self.joints if j.actuated]

    @property
    def dof(self) -> int:
        """Number of actuated joints (d_n)."""
        return sum(1 for j in self.joints if j.actuated)

    @property
    def link_names(self) -> List[str]:
        return [name for name, _ in self.links]

    @property
    def lower(self) -> np.ndarray:
        return np.array([j.lower for j in self.actuated_joints], dtype=float)

    @property
    def upper(self) -> np.ndarray:
        return np.array([j.upper for j in self.actuated_joints], dtype=float)

    def geometry(self, link: str) -> Tuple[LinkGeometry, ...]:
        for name, geoms in self.links:
            if name == link:
                return geoms
        raise MissingLink(link)

    def parent_joint(self, link: str) -> Optional[JointSpec]:
        for joint in self.joints:
            if joint.child_link == link:
                return joint
        return None

    @property
    def tool_link(self) -> str:
        """Link carrying the tool centre point."""
        if self.grippers:
            return self.grippers[0].link
        return self.links[-1][0]

    @property
    def tool_offset(self) -> float:
        """Distance along the tool link's +z axis to the tool centre point."""
        return self.grippers[0].finger_length if self.grippers else 0.0

    def home_configuration(self) -> np.ndarray:
        if self.home is not None:
            return np.array(self.home, dtype=float)
        return np.clip(np.zeros(self.dof), self.lower, self.upper)

    def reach(self) -> float:
        """Upper bound on the tool centre point distance from the base origin."""
        total = self.tool_offset
        link = self.tool_link
        while True:
            joint = self.parent_joint(link)
            if joint is None:
                return total
            total += float(np.linalg.norm(joint.origin.translation))
            if joint.kind == PRISMATIC:
                total += max(abs(joint.lower), abs(joint.upper))
            link = joint.parent_link

    def split_manipulators(self) -> List["KinematicChain"]:
        """One sub-chain per gripper, each running from the base to that gripper.

        Chains with fewer than two grippers are returned unchanged.
        """
        if len(self.grippers) < 2:
            return [self]
        home = self.home_configuration()
        actuated_index = {j.name: i for i, j in enumerate(self.actuated_joints)}
        result = []
        for gripper in self.grippers:
            path = []
            link = gripper.link
            while True:
                joint = self.parent_joint(link)
                if joint is None:
                    break
                path.append(joint)
                link = joint.parent_link
            path.reverse()
            link_names = [self.base_link] + [j.child_link for j in path]
            links = tuple((name, self.geometry(name)) for name in link_names)
            sub_home = np.array(
                [home[actuated_index[j.name]] for j in path if j.actuated], dtype=float
            )
            result.append(
                KinematicChain(
                    name=f"{self.name}/{gripper.link}",
                    base_link=self.base_link,
                    links=links,
                    joints=tuple(path),
                    grippers=(gripper,),
                    home=sub_home,
                )
            )
        return result


def _primitive_dims(primitive: Primitive) -> Tuple[float, ...]:
    if isinstance(primitive, Box):
        return tuple(primitive.half_extents)
    if isinstance(primitive, Cylinder):
        return (primitive.radius, primitive.length)
    return (primitive.radius,)


def _floats(text: Optional[str], count: int, default: Optional[Sequence[float]], what: str) -> np.ndarray:
    if text is None:
        if default is None:
            raise MalformedUrdf(f"{what} is missing")
        return np.array(default, dtype=float)
    try:
        values = [float(v) for v in text.split()]
    except ValueError:
        raise MalformedUrdf(f"non-numeric {what}: '{text}'")
    if len(values) != count:
        raise MalformedUrdf(f"{what} needs {count} values, got {len(values)}")
    return np.array(values, dtype=float)


def _parse_origin(element: Optional[ET.Element]) -> Pose:
    origin = element.find("origin") if element is not None else None
    if origin is None:
        return Pose.identity()
    xyz = _floats(origin.get("xyz"), 3, (0.0, 0.0, 0.0), "origin xyz")
    rpy = _floats(origin.get("rpy"), 3, (0.0, 0.0, 0.0), "origin rpy")
    return Pose.from_xyz_rpy(xyz, rpy)


def _attr_float(element: ET.Element, name: str, what: str) -> float:
    value = element.get(name)
    if value is None:
        raise MalformedUrdf(f"{what} is missing attribute '{name}'")
    try:
        return float(value)
    except ValueError:
        raise MalformedUrdf(f"{what} attribute '{name}' is not a number: '{value}'")


def _parse_geometry(container: ET.Element, link_name: str) -> Optional[LinkGeometry]:
    geometry = container.find("geometry")
    if geometry is None:
        return None
    shapes = list(geometry)
    if len(shapes) != 1:
        raise MalformedUrdf(f"link '{link_name}' geometry must hold exactly one shape")
    shape = shapes[0]
    what = f"link '{link_name}' {shape.tag}"
    if shape.tag == "box":
        size = _floats(shape.get("size"), 3, None, f"{what} size")
        primitive = Box(tuple(float(s) / 2.0 for s in size))
    elif shape.tag == "cylinder":
        primitive = Cylinder(_attr_float(shape, "radius", what), _attr_float(shape, "length", what))
    elif shape.tag == "sphere":
        primitive = Sphere(_attr_float(shape, "radius", what))
    elif shape.tag == "mesh":
        raise UnsupportedGeometry(f"link '{link_name}' uses mesh geometry")
    else:
        raise UnsupportedGeometry(f"link '{link_name}' uses unknown geometry '{shape.tag}'")
    return LinkGeometry(primitive, _parse_origin(container))


def _parse_link(element: ET.Element) -> Tuple[str, Tuple[LinkGeometry, ...]]:
    name = element.get("name")
    if not name:
        raise MalformedUrdf("link without a name")
    containers = element.findall("collision") or element.findall("visual")
    geoms = []
    for container in containers:
        geom = _parse_geometry(container, name)
        if geom is not None:
            geoms.append(geom)
    return name, tuple(geoms)


def _parse_joint(element: ET.Element, links: Dict[str, tuple]) -> JointSpec:
    name = element.get("name")
    if not name:
        raise MalformedUrdf("joint without a name")
    kind = element.get("type")
    if kind == "continuous":
        kind = REVOLUTE
        default_limits = (-np.inf, np.inf)
    elif kind in (REVOLUTE, PRISMATIC):
        default_limits = (-np.inf, np.inf)
    elif kind == FIXED:
        default_limits = (0.0, 0.0)
    else:
        raise MalformedUrdf(f"joint '{name}' has unsupported type '{kind}'")

    parent = element.find("parent")
    child = element.find("child")
    if parent is None or child is None or not parent.get("link") or not child.get("link"):
        raise MalformedUrdf(f"joint '{name}' needs <parent link> and <child link>")
    parent_link, child_link = parent.get("link"), child.get("link")
    for link in (parent_link, child_link):
        if link not in links:
            raise MissingLink(link)

    axis_el = element.find("axis")
    axis = _floats(axis_el.get("xyz") if axis_el is not None else None, 3, (1.0, 0.0, 0.0), f"joint '{name}' axis")
    norm = float(np.linalg.norm(axis))
    if kind != FIXED:
        if norm < 1e-12:
            raise MalformedUrdf(f"joint '{name}' has a zero axis")
        axis = axis / norm

    lower, upper = default_limits
    limit = element.find("limit")
    if limit is not None and kind != FIXED and element.get("type") != "continuous":
        if limit.get("lower") is not None:
            lower = _attr_float(limit, "lower", f"joint '{name}' limit")
        if limit.get("upper") is not None:
            upper = _attr_float(limit, "upper", f"joint '{name}' limit")
    if lower > upper:
        raise MalformedUrdf(f"joint '{name}' has lower limit above upper limit")
    axis.setflags(write=False)
    return JointSpec(name, kind, axis, _parse_origin(element), float(lower), float(upper), parent_link, child_link)


def _find_cycle(joints: List[JointSpec]) -> Optional[List[str]]:
    children: Dict[str, List[str]] = {}
    for joint in joints:
        children.setdefault(joint.parent_link, []).append(joint.child_link)
    state: Dict[str, int] = {}

    def visit(node: str, trail: List[str]) -> Optional[List[str]]:
        state[node] = 1
        for child in children.get(node, []):
            if state.get(child) == 1:
                return trail + [node, child]
            if child not in state:
                found = visit(child, trail + [node])
                if found:
                    return found
        state[node] = 2
        return None

    for start in children:
        if start not in state:
            found = visit(start, [])
            if found:
                return found
    return None


def parse_urdf(document: Union[str, bytes], name: Optional[str] = None) -> KinematicChain:
    """
    Parse a URDF document into a kinematic chain.

    Args:
        document: URDF XML text
        name: Optional chain name overriding the robot name

    Returns:
        KinematicChain with joints in depth-first order from the base link

    Raises:
        MalformedXml: Not well-formed XML or no <robot> root
        CyclicJointGraph: The joint graph contains a cycle
        UnsupportedGeometry: Mesh or unknown geometry
        MissingLink: A joint or gripper references an undeclared link
        MalformedUrdf: Any other violation of the supported subset
    """
    try:
        root = ET.fromstring(document)
    except ET.ParseError as e:
        raise MalformedXml(f"document is not well-formed XML: {e}")
    if root.tag != "robot":
        raise MalformedXml(f"root element is <{root.tag}>, expected <robot>")

    links: Dict[str, tuple] = {}
    for element in root.findall("link"):
        link_name, geoms = _parse_link(element)
        if link_name in links:
            raise MalformedUrdf(f"duplicate link '{link_name}'")
        links[link_name] = geoms
    if not links:
        raise MalformedUrdf("robot declares no links")

    joints = [_parse_joint(element, links) for element in root.findall("joint")]
    if len({j.name for j in joints}) != len(joints):
        raise MalformedUrdf("duplicate joint names")

    cycle = _find_cycle(joints)
    if cycle:
        raise CyclicJointGraph(f"joint graph has a cycle through {' -> '.join(cycle)}")

    parent_of: Dict[str, JointSpec] = {}
    for joint in joints:
        if joint.child_link in parent_of:
            raise MalformedUrdf(f"link '{joint.child_link}' has more than one parent joint")
        parent_of[joint.child_link] = joint
    roots = [link for link in links if link not in parent_of]
    if len(roots) != 1:
        raise MalformedUrdf(f"joint graph must have a single root link, found {roots}")

    ordered_links: List[str] = []
    ordered_joints: List[JointSpec] = []
    stack = [roots[0]]
    while stack:
        link = stack.pop()
        ordered_links.append(link)
        outgoing = [j for j in joints if j.parent_link == link]
        ordered_joints.extend(outgoing)
        stack.extend(j.child_link for j in reversed(outgoing))
    # Stack order emits joints grouped per parent; re-sort so every joint
    # follows the joint that produces its parent link.
    position = {link: i for i, link in enumerate(ordered_links)}
    ordered_joints.sort(key=lambda j: position[j.child_link])

    grippers = []
    for element in root.findall("gripper"):
        link = element.get("link")
        if link not in links:
            raise MissingLink(str(link))
        gripper = GripperSpec(
            link=link,
            max_gap=_attr_float(element, "max_gap", "gripper"),
            finger_length=_attr_float(element, "finger_length", "gripper"),
            finger_width=_attr_float(element, "finger_width", "gripper"),
        )
        if min(gripper.max_gap, gripper.finger_length, gripper.finger_width) <= 0:
            raise MalformedUrdf("gripper dimensions must be positive")
        grippers.append(gripper)

    chain = KinematicChain(
        name=name or root.get("name", "robot"),
        base_link=roots[0],
        links=tuple((link, links[link]) for link in ordered_links),
        joints=tuple(ordered_joints),
        grippers=tuple(grippers),
    )

    home_el = root.find("home")
    if home_el is not None:
        home = _floats(home_el.get("q"), chain.dof, None, "home q")
        if np.any(home < chain.lower) or np.any(home > chain.upper):
            raise MalformedUrdf("home configuration violates joint limits")
        chain = replace(chain, home=home)
    return chain


def load_urdf(path: Union[str, Path]) -> KinematicChain:
    """Parse a URDF file. Bare names resolve to the bundled fixtures."""
    path = Path(path)
    if not path.exists():
        bundled = ASSET_DIR / (path.name if path.suffix else f"{path.name}.urdf")
        if bundled.exists():
            path = bundled
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise RuntimeError(f"Failed to read URDF {path}: {e}")
    return parse_urdf(text, name=path.stem)


def bundled_urdf(name: str) -> KinematicChain:
    """Load one of ``planar2``, ``franka_toy``, ``dualarm_toy``."""
    return load_urdf(ASSET_DIR / f"{name}.urdf")
