"""
Forward and inverse kinematics over a :class:`KinematicChain`.

Forward kinematics is a measurement and refuses out-of-limit joint values;
inverse kinematics is a search and clamps to the limits every iteration.
"""

from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from ..utils.errors import (
    DidNotConverge,
    JointLimitViolation,
    ShapeError,
    UnreachableTarget,
)
from ..utils.logging import get_logger
from .transforms import Pose, axis_angle, rotation_log
from .urdf import PRISMATIC, REVOLUTE, KinematicChain

logger = get_logger("kinematics")

JACOBIAN_STEP = 1e-6

_Frame = Tuple[np.ndarray, np.ndarray]


@dataclass(frozen=True)
class IKConfig:
    """Damped-least-squares settings."""

    damping: float = 0.05
    max_iters: int = 200
    tol_pos: float = 1e-4
    tol_rot: float = 1e-3
    # None: position-only for chains with fewer than six actuated joints
    position_only: Optional[bool] = None

    def __post_init__(self):
        if self.damping < 0 or self.max_iters < 0 or self.tol_pos <= 0 or self.tol_rot <= 0:
            raise ValueError(f"invalid IK configuration: {self}")


def as_joint_state(chain: KinematicChain, q) -> np.ndarray:
    values = np.asarray(q, dtype=float).reshape(-1)
    if values.shape != (chain.dof,):
        raise ShapeError(f"chain '{chain.name}' has {chain.dof} actuated joints, got {values.size} values")
    return values


def check_limits(chain: KinematicChain, q: np.ndarray) -> None:
    lower, upper = chain.lower, chain.upper
    bad = np.nonzero((q < lower) | (q > upper) | ~np.isfinite(q))[0]
    if bad.size:
        i = int(bad[0])
        raise JointLimitViolation(i, float(q[i]), (float(lower[i]), float(upper[i])))


def _link_frames(chain: KinematicChain, q: np.ndarray) -> Dict[str, _Frame]:
    frames: Dict[str, _Frame] = {chain.base_link: (np.eye(3), np.zeros(3))}
    index = 0
    for joint in chain.joints:
        parent_r, parent_t = frames[joint.parent_link]
        r = parent_r @ joint.origin.rotation
        t = parent_r @ joint.origin.translation + parent_t
        if joint.kind == REVOLUTE:
            r = r @ axis_angle(joint.axis, q[index])
            index += 1
        elif joint.kind == PRISMATIC:
            t = t + r @ (joint.axis * q[index])
            index += 1
        frames[joint.child_link] = (r, t)
    return frames


def _tool_frame(chain: KinematicChain, frames: Dict[str, _Frame]) -> _Frame:
    r, t = frames[chain.tool_link]
    return r, t + r[:, 2] * chain.tool_offset


def forward_kinematics(chain: KinematicChain, q, check: bool = True) -> Dict[str, Pose]:
    """
    World pose of every link.

    Args:
        chain: Kinematic chain
        q: Actuated joint values in chain order
        check: Enforce joint limits (default True)

    Returns:
        Mapping link name -> Pose; the base link is the identity

    Raises:
        ShapeError: Wrong number of joint values
        JointLimitViolation: A value is outside its limits
    """
    q = as_joint_state(chain, q)
    if check:
        check_limits(chain, q)
    return {name: Pose(r, t) for name, (r, t) in _link_frames(chain, q).items()}


def tool_pose(chain: KinematicChain, q, check: bool = True) -> Pose:
    """Pose of the tool centre point (fingertips, or the last link origin)."""
    q = as_joint_state(chain, q)
    if check:
        check_limits(chain, q)
    r, t = _tool_frame(chain, _link_frames(chain, q))
    return Pose(r, t)


def numeric_jacobian(chain: KinematicChain, q, step: float = JACOBIAN_STEP) -> np.ndarray:
    """
    6 x d_n tool Jacobian by central differences.

    Rows 0-2 are linear velocity, rows 3-5 angular velocity in the base
    frame. Probes are not limit-checked.
    """
    q = as_joint_state(chain, q)
    jac = np.zeros((6, chain.dof))
    for i in range(chain.dof):
        dq = np.zeros(chain.dof)
        dq[i] = step
        r_plus, t_plus = _tool_frame(chain, _link_frames(chain, q + dq))
        r_minus, t_minus = _tool_frame(chain, _link_frames(chain, q - dq))
        jac[:3, i] = (t_plus - t_minus) / (2.0 * step)
        jac[3:, i] = rotation_log(r_plus @ r_minus.T) / (2.0 * step)
    return jac


def geometric_jacobian(chain: KinematicChain, q) -> np.ndarray:
    """Analytic tool Jacobian from joint axes, same layout as :func:`numeric_jacobian`."""
    q = as_joint_state(chain, q)
    frames = _link_frames(chain, q)
    _, tool = _tool_frame(chain, frames)
    jac = np.zeros((6, chain.dof))
    path = set()
    link = chain.tool_link
    while (joint := chain.parent_joint(link)) is not None:
        path.add(joint.name)
        link = joint.parent_link
    index = 0
    for joint in chain.joints:
        if not joint.actuated:
            continue
        if joint.name in path:
            r, t = frames[joint.child_link]
            axis = r @ joint.axis
            if joint.kind == REVOLUTE:
                jac[:3, index] = np.cross(axis, tool - t)
                jac[3:, index] = axis
            else:
                jac[:3, index] = axis
        index += 1
    return jac


def pose_error(chain: KinematicChain, q: np.ndarray, target: Pose) -> Tuple[np.ndarray, float, float]:
    """Stacked (position, rotation-vector) error and their norms."""
    r, t = _tool_frame(chain, _link_frames(chain, q))
    e_pos = target.translation - t
    e_rot = rotation_log(target.rotation @ r.T)
    return np.concatenate([e_pos, e_rot]), float(np.linalg.norm(e_pos)), float(np.linalg.norm(e_rot))


def inverse_kinematics(
    chain: KinematicChain,
    target: Pose,
    seed,
    cfg: Optional[IKConfig] = None,
) -> np.ndarray:
    """
    Damped-least-squares inverse kinematics for the tool centre point.

    ``dq = J^T (J J^T + damping^2 I)^-1 e`` with a numeric Jacobian, clamped
    to the joint limits after every iteration. A seed that already meets the
    tolerances is returned unchanged.

    Args:
        chain: Kinematic chain
        target: Desired tool pose (only its translation in position-only mode)
        seed: Starting joint values
        cfg: Solver settings

    Returns:
        Joint values meeting ``tol_pos`` (and ``tol_rot`` for full-pose targets)

    Raises:
        UnreachableTarget: Target farther than the chain can reach
        DidNotConverge: Tolerances not met within ``max_iters``
    """
    cfg = cfg or IKConfig()
    position_only = cfg.position_only if cfg.position_only is not None else chain.dof < 6
    q = np.clip(as_joint_state(chain, seed), chain.lower, chain.upper)

    distance = float(np.linalg.norm(target.translation))
    reach = chain.reach()
    if distance > reach + cfg.tol_pos:
        raise UnreachableTarget(distance, reach)

    rows = slice(0, 3) if position_only else slice(0, 6)
    best = np.inf
    for iteration in range(cfg.max_iters + 1):
        error, pos_err, rot_err = pose_error(chain, q, target)
        if pos_err <= cfg.tol_pos and (position_only or rot_err <= cfg.tol_rot):
            if iteration:
                logger.debug(f"IK converged in {iteration} iterations on '{chain.name}'")
            return q
        best = min(best, pos_err if position_only else pos_err + rot_err)
        if iteration == cfg.max_iters:
            break
        jac = numeric_jacobian(chain, q)[rows]
        e = error[rows]
        gram = jac @ jac.T + (cfg.damping ** 2) * np.eye(jac.shape[0])
        q = np.clip(q + jac.T @ np.linalg.solve(gram, e), chain.lower, chain.upper)
    raise DidNotConverge(best, cfg.max_iters)
