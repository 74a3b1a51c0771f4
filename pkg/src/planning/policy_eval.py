"""
Autoregressive policy evaluation inside a world model.

The policy emits a chunk of actions, the chunk is padded to the world
model's native length by repeating its final action, and the last
predicted frame becomes the next policy input. Success rates measured this
way (proxy) are compared with rates measured by executing the same
policies in the oracle environment (real).
"""

from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np
import pandas as pd

from ..metrics.ranking import SuccessTable
from ..render.frames import RgbVideo
from ..robot.kinematics import IKConfig
from ..services.policies import PolicySpec, ScriptedPolicy
from ..services.simulator import OracleWorld
from ..services.tasks import get_task
from ..services.world import SimState, WorldModel
from ..utils.errors import ConfigError, MaskWorldError
from ..utils.logging import get_logger
from ..utils.seeding import derive_rng

logger = get_logger("policy_eval")

NOISE_LEVELS = (0.0, 0.01, 0.03, 0.06, 0.1)
EPISODE_COLUMNS = ["index", "policy", "noise", "episode", "real", "proxy"]


@dataclass(eq=False)
class EvalRollout:
    video: RgbVideo
    state: SimState
    chunks: int
    success: Optional[bool] = None


def policy_eval_rollout(
    world: WorldModel,
    policy: ScriptedPolicy,
    x0: np.ndarray,
    state: SimState,
    horizon: Optional[int] = None,
    success: Optional[Callable[[SimState, np.ndarray], bool]] = None,
) -> EvalRollout:
    """
    Roll a reset policy forward in ``world`` chunk by chunk.

    Args:
        world: World model; its ``chunk_length`` is the native length T_wm
        policy: Policy already reset to ``state``
        x0: Initial frame
        state: Initial embodiment state
        horizon: Number of policy actions to consume (default: the script length)
        success: Predicate on (final state, final frame)

    Raises:
        ConfigError: The policy's chunk is longer than the native length
    """
    chunk = policy.spec.chunk
    native = world.chunk_length or chunk
    if chunk > native:
        raise ConfigError(f"policy chunk {chunk} exceeds the world model's native length {native}")
    horizon = policy.length if horizon is None else horizon
    if horizon < 1:
        raise ConfigError(f"evaluation horizon must be at least 1, got {horizon}")

    frame = np.asarray(x0)
    frames: List[np.ndarray] = []
    consumed = chunks = 0
    while consumed < horizon:
        actions = policy.next_chunk(chunk).pad_to(native)
        prediction = world.predict(frame, actions, state)
        frames.append(prediction.video.pixels)
        frame = prediction.video.last
        state = prediction.state
        consumed += chunk
        chunks += 1

    rollout = EvalRollout(RgbVideo(np.concatenate(frames)), state, chunks)
    if success is not None:
        rollout.success = bool(success(state, frame))
    return rollout


def evaluate_policy_family(
    policies: Sequence[PolicySpec],
    world: WorldModel,
    episodes: int = 20,
    seed: int = 0,
    width: int = 64,
    height: int = 64,
    ik: Optional[IKConfig] = None,
) -> tuple:
    """
    Real and proxy success rates for every policy.

    Episode ``e`` uses the same sampled task instance for every policy
    (``derive_rng(seed, e)``), and the same action-noise stream
    (``derive_rng(seed, e, p)``) for the real and the proxy run of policy
    ``p``. Real success is the task's state predicate after executing the
    script in the oracle environment; proxy success is the task's frame
    predicate on the last frame predicted by ``world`` against the oracle
    goal frame. Episodes that raise count as failures. ``world`` must
    render with the task camera at ``width`` x ``height``.

    Returns:
        ``(SuccessTable, per-episode DataFrame)``
    """
    if episodes < 1:
        raise ConfigError(f"need at least one episode per policy, got {episodes}")
    rows = []
    for e in range(episodes):
        cache = {}
        for p, spec in enumerate(policies):
            task = get_task(spec.policy_id)
            if task.name not in cache:
                instance = task.sample(derive_rng(seed, e), width=width, height=height, ik=ik)
                env = OracleWorld(task.chains(), instance.camera, ik)
                cache[task.name] = (instance, env, task.goal_frames(instance, env)[-1], env.render(instance.start)[0])
            instance, env, goal, x0 = cache[task.name]
            chains = list(env.chains)

            try:
                policy = ScriptedPolicy(spec, instance, chains).reset(instance.start, derive_rng(seed, e, p))
                real = bool(task.success(instance, env.run(policy.actions(), instance.start)))
            except MaskWorldError as err:
                logger.debug(f"{spec.name} episode {e}: real run failed ({err.code})")
                real = False

            try:
                policy = ScriptedPolicy(spec, instance, chains).reset(instance.start, derive_rng(seed, e, p))
                rollout = policy_eval_rollout(
                    world, policy, x0, instance.start,
                    success=lambda _, frame: task.frame_success(instance, frame, goal),
                )
                proxy = bool(rollout.success)
            except MaskWorldError as err:
                logger.debug(f"{spec.name} episode {e}: proxy run failed ({err.code})")
                proxy = False

            rows.append({"index": p, "policy": spec.name, "noise": spec.noise, "episode": e, "real": real, "proxy": proxy})
        logger.progress(e + 1, episodes, "episodes")

    frame = pd.DataFrame(rows, columns=EPISODE_COLUMNS)
    names = [spec.name for spec in policies]
    grouped = frame.groupby("index")[["real", "proxy"]].mean().reindex(range(len(policies)))
    table = SuccessTable(grouped["real"].to_numpy(), grouped["proxy"].to_numpy(), names)
    logger.info(f"📊 Evaluated {len(policies)} policies over {episodes} episodes")
    return table, frame


def noise_family(task: str, levels: Sequence[float] = NOISE_LEVELS, chunk: int = 4) -> List[PolicySpec]:
    """Scripted policies of one task at graded action noise."""
    base = PolicySpec(task, chunk=chunk)
    return [base.with_noise(float(level)) for level in levels]
