"""
Cross-entropy-method planning toward a goal image.

A plan is H steps of tool-pose increments (dx, dy, dz, droll, dpitch,
dyaw) plus a gripper command, accumulated from the current tool pose.
Each iteration samples S candidates from per-step diagonal Gaussians and
a Bernoulli gripper, scores them by the mean absolute latent difference
between the last predicted frame and the goal, and refits the
distributions to the k best candidates.

Rotation-heavy strategies change only which dimensions are sampled:
``rotation_first`` freezes translation for the first half of the
iterations, ``reallocated`` doubles the rotation spread and the sample
count with translation frozen for half of the samples, and ``axis_wise``
searches yaw, pitch and roll in three sequential passes.
"""

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ..render.frames import RgbVideo, to_uint8
from ..robot.transforms import Pose, rpy_to_rotation
from ..services.actions import ActionSequence, CartesianAction, hold_action
from ..services.world import SimState, WorldModel
from ..utils.errors import ConfigError, InfeasiblePlan, MaskWorldError
from ..utils.logging import get_logger, is_debug_mode
from ..utils.seeding import derive_rng
from ..model.codec import decode_pixels, encode

logger = get_logger("cem")

PLAN_VERSION = 1
STRATEGIES = ("joint", "rotation_first", "reallocated", "axis_wise")
DIMENSIONS = ("dx", "dy", "dz", "dr", "dp", "dyaw")
TRANSLATION = np.array([True, True, True, False, False, False])
ROTATION = ~TRANSLATION
# yaw, pitch, roll
AXIS_ORDER = (5, 4, 3)
TELEMETRY_COLUMNS = ["pass", "iter", "best_loss", "mean_elite_loss", "best_so_far"]


@dataclass(frozen=True)
class PlanConfig:
    horizon: int = 5
    iterations: int = 5
    samples: int = 64
    elites: int = 8
    strategy: str = "joint"
    translation_step: float = 0.05
    rotation_step: float = math.radians(20.0)
    floor_ratio: float = 0.1
    search_dims: Tuple[int, ...] = (0, 1, 2, 3, 4, 5)
    gripper: Optional[float] = None
    switch_threshold: Optional[float] = None

    def __post_init__(self):
        if self.horizon < 1 or self.iterations < 1 or self.samples < 1:
            raise ConfigError("horizon, iterations and samples must be at least 1")
        if not (1 <= self.elites <= self.samples):
            raise ConfigError(f"elites must lie in [1, samples], got {self.elites} of {self.samples}")
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"strategy must be one of {STRATEGIES}, got '{self.strategy}'")
        if self.translation_step <= 0 or self.rotation_step <= 0 or self.floor_ratio <= 0:
            raise ConfigError("step sizes and the variance floor ratio must be positive")
        dims = tuple(sorted(set(int(d) for d in self.search_dims)))
        if not dims or dims[0] < 0 or dims[-1] > 5:
            raise ConfigError(f"search_dims must be a non-empty subset of 0..5, got {self.search_dims}")
        object.__setattr__(self, "search_dims", dims)
        if self.gripper is not None and not (0.0 <= self.gripper <= 1.0):
            raise ConfigError(f"fixed gripper command must lie in [0, 1], got {self.gripper}")

    @property
    def steps(self) -> np.ndarray:
        return np.where(TRANSLATION, self.translation_step, self.rotation_step)

    @property
    def floor(self) -> np.ndarray:
        return self.floor_ratio * self.steps

    @property
    def searched(self) -> np.ndarray:
        mask = np.zeros(6, dtype=bool)
        mask[list(self.search_dims)] = True
        return mask


@dataclass(frozen=True)
class CemKnobs:
    """What distinguishes the strategies; the defaults reduce to joint CEM."""

    freeze_translation_iters: int = 0
    rotation_scale: float = 1.0
    sample_scale: int = 1
    translation_frozen_fraction: float = 0.0
    axis_passes: Tuple[int, ...] = ()


def strategy_knobs(cfg: PlanConfig) -> CemKnobs:
    if cfg.strategy == "rotation_first":
        return CemKnobs(freeze_translation_iters=math.ceil(cfg.iterations / 2))
    if cfg.strategy == "reallocated":
        return CemKnobs(rotation_scale=2.0, sample_scale=2, translation_frozen_fraction=0.5)
    if cfg.strategy == "axis_wise":
        return CemKnobs(axis_passes=AXIS_ORDER)
    return CemKnobs()


@dataclass(eq=False)
class CemState:
    """Per-step Gaussian (mu, sigma) over pose increments and Bernoulli gripper pi."""

    mu: np.ndarray
    sigma: np.ndarray
    pi: np.ndarray

    @classmethod
    def initial(cls, cfg: PlanConfig, knobs: CemKnobs = CemKnobs()) -> "CemState":
        sigma = np.tile(cfg.steps, (cfg.horizon, 1))
        sigma[:, ROTATION] *= knobs.rotation_scale
        return cls(np.zeros((cfg.horizon, 6)), sigma, np.full(cfg.horizon, 0.5))

    def plan(self, cfg: PlanConfig) -> Tuple[np.ndarray, np.ndarray]:
        """Plan increments (mu) and gripper commands (1 when pi >= 0.5)."""
        if cfg.gripper is not None:
            grippers = np.full(len(self.pi), cfg.gripper)
        else:
            grippers = (self.pi >= 0.5).astype(float)
        return self.mu.copy(), grippers


def refit(
    state: CemState,
    deltas: np.ndarray,
    grippers: np.ndarray,
    elite: np.ndarray,
    floor: np.ndarray,
    active: np.ndarray,
) -> CemState:
    """
    Refit to the elite candidates.

    mu is the elite mean, sigma the elite standard deviation (at least
    ``floor``) on dimensions sampled this iteration, pi the elite
    frequency of an open gripper.
    """
    chosen = deltas[elite]
    mu = chosen.mean(axis=0)
    sigma = np.maximum(chosen.std(axis=0), floor)
    sigma = np.where(active, sigma, state.sigma)
    pi = (grippers[elite] == 1.0).mean(axis=0)
    return CemState(mu, sigma, pi)


def check_refit(
    fitted: CemState,
    previous: CemState,
    deltas: np.ndarray,
    grippers: np.ndarray,
    elite: np.ndarray,
    floor: np.ndarray,
    active: np.ndarray,
) -> None:
    """
    Recompute the elite statistics one candidate at a time and compare.

    Raises:
        AssertionError: ``fitted`` disagrees with the recomputation
    """
    count = len(elite)
    total = np.zeros_like(previous.mu)
    opened = np.zeros_like(previous.pi)
    for s in elite:
        total += deltas[s]
        opened += grippers[s] == 1.0
    mean = total / count
    spread = np.zeros_like(previous.mu)
    for s in elite:
        spread += (deltas[s] - mean) ** 2
    sigma = np.where(active, np.maximum(np.sqrt(spread / count), floor), previous.sigma)
    assert np.allclose(fitted.mu, mean, rtol=0.0, atol=1e-9), "refit mu is not the elite mean"
    assert np.allclose(fitted.sigma, sigma, rtol=0.0, atol=1e-9), "refit sigma is not the elite spread"
    assert np.allclose(fitted.pi, opened / count, rtol=0.0, atol=1e-12), "refit pi is not the open rate"


def goal_latent(goal: np.ndarray) -> np.ndarray:
    return encode(RgbVideo(np.asarray(goal))).data


def latent_l1(frame: np.ndarray, goal: Union[np.ndarray, "GoalImage"]) -> float:
    target = goal.latent if isinstance(goal, GoalImage) else goal_latent(goal)
    return float(np.mean(np.abs(encode(RgbVideo(np.asarray(frame))).data - target)))


@dataclass(eq=False)
class GoalImage:
    frame: np.ndarray
    latent: np.ndarray = field(init=False)

    def __post_init__(self):
        self.frame = np.asarray(self.frame)
        self.latent = goal_latent(self.frame)

    def round_trip_floor(self) -> float:
        """Latent loss between the goal and its decoded-then-quantized reconstruction."""
        reconstructed = to_uint8(decode_pixels(self.latent))[0]
        return latent_l1(reconstructed, self)


def deltas_to_actions(
    deltas: np.ndarray,
    grippers: np.ndarray,
    state: SimState,
    chains,
) -> ActionSequence:
    """
    Absolute tool commands for manipulator 0 from accumulated increments.

    Rotation increments are applied in the world frame; other manipulators
    hold their pose.
    """
    tool = state.tool_poses(chains)[0]
    base_inverse = state.scene.robot_base.inverse()
    others = [hold_action(c, q, g) for c, q, g in zip(chains[1:], state.joints[1:], state.grippers[1:])]
    position = tool.translation.copy()
    rotation = tool.rotation.copy()
    steps = []
    for delta, g in zip(deltas, grippers):
        position = position + delta[:3]
        rotation = rpy_to_rotation(*delta[3:]) @ rotation
        pose = base_inverse.compose(Pose(rotation, position))
        steps.append((CartesianAction.from_pose(pose, float(g)), *others))
    return ActionSequence(tuple(steps))


def score_candidate(
    world: WorldModel,
    x0: np.ndarray,
    state: SimState,
    actions: ActionSequence,
    goal: Union[np.ndarray, GoalImage],
) -> float:
    """Mean absolute latent difference between the last predicted frame and the goal."""
    final = world.predict_final(x0, actions, state)
    return latent_l1(final, goal)


@dataclass(eq=False)
class PlanResult:
    deltas: np.ndarray
    grippers: np.ndarray
    actions: ActionSequence
    state: CemState
    telemetry: pd.DataFrame
    best_loss: float

    @property
    def first_step(self):
        return self.actions.steps[0]

    def to_dict(self) -> dict:
        return {
            "version": PLAN_VERSION,
            "steps": [
                {**{k: float(v) for k, v in zip(DIMENSIONS, d)}, "g": float(g)}
                for d, g in zip(self.deltas, self.grippers)
            ],
        }

    def write(self, path: Union[str, Path], telemetry_path: Optional[Union[str, Path]] = None) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")
        if telemetry_path is not None:
            self.telemetry.to_csv(telemetry_path, index=False)


def read_plan(path: Union[str, Path]) -> Tuple[np.ndarray, np.ndarray]:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read plan {path}: {e}")
    if data.get("version") != PLAN_VERSION:
        raise ConfigError(f"unsupported plan version {data.get('version')}")
    steps = data["steps"]
    deltas = np.array([[s[k] for k in DIMENSIONS] for s in steps], dtype=float)
    return deltas, np.array([s["g"] for s in steps], dtype=float)


def _iteration_masks(
    cfg: PlanConfig,
    knobs: CemKnobs,
    iteration: int,
    count: int,
    axis: Optional[int],
) -> np.ndarray:
    """(count, 6) mask of dimensions each candidate samples."""
    active = np.tile(cfg.searched, (count, 1))
    if axis is not None:
        rotation_off = ROTATION.copy()
        rotation_off[axis] = False
        active[:, rotation_off] = False
    if iteration < knobs.freeze_translation_iters:
        active[:, TRANSLATION] = False
    if knobs.translation_frozen_fraction > 0:
        frozen = int(count * knobs.translation_frozen_fraction)
        active[:frozen, TRANSLATION] = False
    return active


def _run_cem(
    world: WorldModel,
    x0: np.ndarray,
    state: SimState,
    goal: GoalImage,
    cfg: PlanConfig,
    knobs: CemKnobs,
    rng: np.random.Generator,
) -> Tuple[CemState, pd.DataFrame, float]:
    cem = CemState.initial(cfg, knobs)
    chains = world.chains
    count = cfg.samples * knobs.sample_scale
    elites = min(cfg.elites * knobs.sample_scale, count)
    floor = cfg.floor
    passes = knobs.axis_passes or (None,)
    rows = []
    best_so_far = np.inf

    for pass_index, axis in enumerate(passes):
        for iteration in range(cfg.iterations):
            active = _iteration_masks(cfg, knobs, iteration, count, axis)
            noise = rng.standard_normal((count, cfg.horizon, 6))
            deltas = cem.mu[None] + cem.sigma[None] * noise * active[:, None, :]
            if cfg.gripper is not None:
                grippers = np.full((count, cfg.horizon), cfg.gripper)
            else:
                grippers = (rng.random((count, cfg.horizon)) < cem.pi[None]).astype(float)

            losses = np.full(count, np.inf)
            for s in range(count):
                try:
                    actions = deltas_to_actions(deltas[s], grippers[s], state, chains)
                    losses[s] = score_candidate(world, x0, state, actions, goal)
                except MaskWorldError as e:
                    logger.debug(f"candidate {s} failed: {e.code}: {e}")
            if not np.isfinite(losses).any():
                raise InfeasiblePlan(f"all {count} candidates failed at iteration {iteration}")

            elite = np.argsort(losses, kind="stable")[:elites]
            elite = elite[np.isfinite(losses[elite])]
            fitted = refit(cem, deltas, grippers, elite, floor, active.any(axis=0))
            if is_debug_mode():
                check_refit(fitted, cem, deltas, grippers, elite, floor, active.any(axis=0))
            cem = fitted
            best = float(losses[elite[0]])
            best_so_far = min(best_so_far, best)
            rows.append({
                "pass": pass_index,
                "iter": iteration,
                "best_loss": best,
                "mean_elite_loss": float(losses[elite].mean()),
                "best_so_far": best_so_far,
            })
            logger.debug(f"pass {pass_index} iteration {iteration}: best {best:.5f}")
    return cem, pd.DataFrame(rows, columns=TELEMETRY_COLUMNS), best_so_far


def plan_with_knobs(
    world: WorldModel,
    x0: np.ndarray,
    state: SimState,
    goal: Union[np.ndarray, GoalImage],
    cfg: PlanConfig,
    knobs: CemKnobs,
    seed: int = 0,
) -> PlanResult:
    goal = goal if isinstance(goal, GoalImage) else GoalImage(goal)
    rng = derive_rng(seed)
    cem, telemetry, best = _run_cem(world, x0, state, goal, cfg, knobs, rng)
    deltas, grippers = cem.plan(cfg)
    actions = deltas_to_actions(deltas, grippers, state, world.chains)
    return PlanResult(deltas, grippers, actions, cem, telemetry, best)


def plan_with_strategy(
    world: WorldModel,
    x0: np.ndarray,
    state: SimState,
    goal: Union[np.ndarray, GoalImage],
    cfg: PlanConfig,
    seed: int = 0,
) -> PlanResult:
    """
    CEM plan using ``cfg.strategy``.

    Raises:
        InfeasiblePlan: Every candidate of an iteration failed to roll out
    """
    return plan_with_knobs(world, x0, state, goal, cfg, strategy_knobs(cfg), seed)


def cem_plan(
    world: WorldModel,
    x0: np.ndarray,
    state: SimState,
    goal: Union[np.ndarray, GoalImage],
    cfg: PlanConfig,
    seed: int = 0,
) -> PlanResult:
    """Joint CEM over all searched dimensions."""
    return plan_with_strategy(world, x0, state, goal, replace(cfg, strategy="joint"), seed)


def strategies() -> List[str]:
    return list(STRATEGIES)


def as_search_dims(names: Sequence[Union[int, str]]) -> Tuple[int, ...]:
    """Accept indices or the names dx..dyaw."""
    dims = []
    for name in names:
        if isinstance(name, str):
            if name not in DIMENSIONS:
                raise ConfigError(f"unknown search dimension '{name}'")
            dims.append(DIMENSIONS.index(name))
        else:
            dims.append(int(name))
    return tuple(dims)
