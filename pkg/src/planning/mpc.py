"""
Receding-horizon control toward one or two goal images.

Each cycle plans with CEM against the active goal, executes the first
planned action in the oracle environment and observes the new frame. With
two goals (grasp subgoal, final state) the loop switches to the second
goal once the latent loss to the first drops below the switch threshold.
"""

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np
import pandas as pd

from ..services.actions import ActionSequence
from ..services.policies import PolicySpec, ScriptedPolicy
from ..services.simulator import OracleWorld
from ..services.tasks import Task, TaskInstance
from ..services.world import SimState, WorldModel
from ..utils.errors import ConfigError, InfeasiblePlan, MaskWorldError
from ..utils.logging import get_logger
from ..utils.seeding import derive_rng, derive_seed
from .cem import GoalImage, PlanConfig, latent_l1, plan_with_strategy, score_candidate

logger = get_logger("mpc")

SWITCH_FACTOR = 1.5
MIN_SWITCH_THRESHOLD = 0.02
TEMPERATURES = (0.0, 0.01, 0.03)
CYCLE_COLUMNS = ["cycle", "goal", "loss", "plan_loss"]

SuccessPredicate = Callable[[SimState, np.ndarray], bool]


def switch_threshold(goal: GoalImage, cfg: PlanConfig) -> float:
    """Configured threshold, or 1.5 times the goal's codec round-trip floor."""
    if cfg.switch_threshold is not None:
        return float(cfg.switch_threshold)
    return max(SWITCH_FACTOR * goal.round_trip_floor(), MIN_SWITCH_THRESHOLD)


@dataclass(eq=False)
class MpcResult:
    success: bool
    cycles: int
    states: List[SimState] = field(default_factory=list)
    frames: List[np.ndarray] = field(default_factory=list)
    executed: List[tuple] = field(default_factory=list)
    switched_at: Optional[int] = None
    log: pd.DataFrame = field(default_factory=lambda: pd.DataFrame(columns=CYCLE_COLUMNS))

    @property
    def actions(self) -> Optional[ActionSequence]:
        return ActionSequence(tuple(self.executed)) if self.executed else None

    @property
    def final_state(self) -> Optional[SimState]:
        return self.states[-1] if self.states else None


def mpc_loop(
    world: WorldModel,
    env: OracleWorld,
    state: SimState,
    goals: Sequence[np.ndarray],
    cfg: PlanConfig,
    max_cycles: int = 30,
    success: Optional[SuccessPredicate] = None,
    seed: int = 0,
) -> MpcResult:
    """
    Plan, execute the first action, observe, re-plan.

    Args:
        world: World model used to score candidates
        env: Oracle environment the chosen actions are executed in
        state: Start state of ``env``
        goals: One goal frame, or a subgoal frame followed by the final goal
        cfg: Planner settings (strategy, horizon, switch threshold)
        max_cycles: Upper bound on executed actions
        success: Predicate on (state, frame); default compares the frame
            with the last goal in latent space
        seed: Master seed; cycle ``c`` plans with ``derive_seed(seed, c)``

    Returns:
        MpcResult; ``max_cycles=0`` returns a failure with nothing executed
    """
    if not goals or len(goals) > 2:
        raise ConfigError(f"mpc_loop takes one or two goal frames, got {len(goals)}")
    if max_cycles < 0:
        raise ConfigError(f"max_cycles must be non-negative, got {max_cycles}")
    targets = [GoalImage(g) for g in goals]
    if success is None:
        final_threshold = switch_threshold(targets[-1], cfg)

        def success(_, frame):
            return latent_l1(frame, targets[-1]) <= final_threshold

    result = MpcResult(success=False, cycles=0)
    if max_cycles == 0:
        return result

    frame = env.render(state)[0]
    active = 0
    threshold = switch_threshold(targets[0], cfg)
    rows = []
    for cycle in range(max_cycles):
        if success(state, frame):
            result.success = True
            break
        loss = latent_l1(frame, targets[active])
        if active < len(targets) - 1 and loss < threshold:
            active += 1
            result.switched_at = cycle
            logger.info(f"🎯 Subgoal reached at cycle {cycle}, switching to the final goal")
            loss = latent_l1(frame, targets[active])

        plan = plan_with_strategy(world, frame, state, targets[active], cfg, seed=derive_seed(seed, cycle))
        step = plan.first_step
        state = env.step(state, step, cycle)
        frame = env.render(state)[0]
        result.states.append(state)
        result.frames.append(frame)
        result.executed.append(step)
        rows.append({"cycle": cycle, "goal": active, "loss": loss, "plan_loss": plan.best_loss})
        logger.debug(f"cycle {cycle}: goal {active} loss {loss:.5f}, plan loss {plan.best_loss:.5f}")
    else:
        result.success = bool(success(state, frame))

    result.cycles = len(result.executed)
    result.log = pd.DataFrame(rows, columns=CYCLE_COLUMNS)
    status = "succeeded" if result.success else "failed"
    logger.info(f"🔁 MPC {status} after {result.cycles} cycles")
    return result


@dataclass(eq=False)
class RerankResult:
    success: bool
    best_index: int
    actions: ActionSequence
    final_state: SimState
    scores: pd.DataFrame


def propose_and_rerank(
    world: WorldModel,
    env: OracleWorld,
    task: Task,
    instance: TaskInstance,
    goal: np.ndarray,
    n_proposals: int = 8,
    temperatures: Sequence[float] = TEMPERATURES,
    seed: int = 0,
) -> RerankResult:
    """
    Score scripted proposals with the world model and execute the best.

    Proposal ``i`` is the task's scripted policy at noise
    ``temperatures[i % len(temperatures)]`` drawn from ``derive_rng(seed, i)``.
    Proposals whose prediction fails score infinity.

    Raises:
        InfeasiblePlan: Every proposal failed
    """
    if n_proposals < 1 or not temperatures:
        raise ConfigError("propose_and_rerank needs at least one proposal and one temperature")
    target = GoalImage(goal)
    start = instance.start
    x0 = env.render(start)[0]
    chains = list(env.chains)
    proposals, rows = [], []
    for i in range(n_proposals):
        noise = float(temperatures[i % len(temperatures)])
        spec = PolicySpec(task.name, noise=noise)
        actions = ScriptedPolicy(spec, instance, chains).reset(start, derive_rng(seed, i)).actions()
        try:
            loss = score_candidate(world, x0, start, actions, target)
        except MaskWorldError as e:
            logger.debug(f"proposal {i} failed: {e.code}: {e}")
            loss = np.inf
        proposals.append(actions)
        rows.append({"proposal": i, "noise": noise, "loss": loss})

    scores = pd.DataFrame(rows)
    losses = scores["loss"].to_numpy()
    if not np.isfinite(losses).any():
        raise InfeasiblePlan(f"all {n_proposals} proposals failed")
    best = int(np.argsort(losses, kind="stable")[0])
    try:
        final = env.run(proposals[best], start)
        ok = bool(task.success(instance, final))
    except MaskWorldError as e:
        logger.warning(f"best proposal {best} failed in the environment: {e.code}: {e}")
        final, ok = start, False
    logger.info(f"🏅 Proposal {best} (noise {rows[best]['noise']}) chosen, success={ok}")
    return RerankResult(ok, best, proposals[best], final, scores)
