"""
Scaled end-to-end experiments.

These train predictors and run planners for minutes rather than seconds, so
they are marked slow and only run with MASKWORLD_RUN_SLOW=1. Thresholds are
directional: they check that each component helps, not absolute numbers.
"""

import numpy as np
import pytest

from src.metrics.image_quality import mask_iou, psnr
from src.metrics.ranking import mmrv, pearson_r
from src.model.training import TrainConfig, train
from src.model.worlds import LearnedWorld, SamplerConfig, StaticWorld
from src.planning.cem import PlanConfig
from src.planning.mpc import mpc_loop
from src.planning.policy_eval import evaluate_policy_family, noise_family
from src.services.dataset import DatasetConfig, generate_dataset
from src.services.simulator import OracleWorld
from src.services.tasks import get_task
from src.utils.logging import vprint
from src.utils.seeding import derive_rng

pytestmark = pytest.mark.slow

RESOLUTION = 32
SEEDS = range(10)


def _held_out_scores(model, tuples):
    """Per-tuple (psnr, mask_iou) of ``model``'s predictions for every action after the initial hold."""
    scores = []
    for item in tuples:
        world = LearnedWorld(model, item.chains, item.camera, SamplerConfig(steps=10))
        video = world.predict(item.initial_frame, item.actions[1:], item.state).video
        truth = item.video.pixels[1:]
        scores.append((psnr(video.pixels, truth), mask_iou(video.pixels, item.arm_masks.bits[1:])))
    return np.array(scores)


def _static_scores(tuples):
    scores = []
    for item in tuples:
        world = StaticWorld(item.chains, item.camera)
        video = world.predict(item.initial_frame, item.actions[1:], item.state).video
        scores.append((psnr(video.pixels, item.video.pixels[1:]), mask_iou(video.pixels, item.arm_masks.bits[1:])))
    return np.array(scores)


@pytest.fixture(scope="module")
def toy_data(tmp_path_factory):
    """Fifty training tuples and ten held-out tuples of the reach task."""
    root = tmp_path_factory.mktemp("toy")
    common = dict(task="reach", T=9, width=RESOLUTION, height=RESOLUTION)
    train_tuples, _ = generate_dataset(DatasetConfig(count=50, seed=0, **common), root / "train")
    held_out, _ = generate_dataset(DatasetConfig(count=10, seed=1, **common), root / "held_out")
    return train_tuples, held_out


@pytest.fixture(scope="module")
def trained(toy_data):
    """The full mask-conditioned predictor trained on the toy data."""
    train_tuples, _ = toy_data
    return train(train_tuples, TrainConfig(epochs=30, seed=0))


class TestTrainingEffectiveness:
    """Training reduces the loss and beats the static baseline."""

    def test_loss_halves(self, trained):
        """The final epoch's total loss is under half the first epoch's."""
        totals = trained.log["total"].to_numpy()
        vprint(f"total loss {totals[0]:.4f} -> {totals[-1]:.4f}")
        assert totals[-1] < 0.5 * totals[0]

    def test_beats_static_baseline(self, trained, toy_data):
        """The learned world wins on PSNR and Mask-IoU for most held-out tuples."""
        _, held_out = toy_data
        learned = _held_out_scores(trained.model, held_out)
        static = _static_scores(held_out)
        wins = np.logical_and(learned[:, 0] > static[:, 0], learned[:, 1] > static[:, 1])
        assert wins.mean() >= 0.8


class TestConditioningAblation:
    """Mask conditioning outperforms the ablated variants."""

    @pytest.mark.parametrize("conditioning", ["none", "coords"])
    def test_ablation_is_worse(self, trained, toy_data, conditioning):
        """Dropping the control branch or conditioning on coordinates lowers held-out Mask-IoU."""
        train_tuples, held_out = toy_data
        ablated = train(train_tuples, TrainConfig(epochs=30, seed=0, conditioning=conditioning))
        full = _held_out_scores(trained.model, held_out)[:, 1].mean()
        other = _held_out_scores(ablated.model, held_out)[:, 1].mean()
        vprint(f"held-out Mask-IoU: mask {full:.4f}, {conditioning} {other:.4f}")
        assert other < full


class TestPlanningSuccess:
    """Receding-horizon control against the oracle."""

    def _run(self, task_name: str, cfg: PlanConfig, seed: int, max_cycles: int) -> bool:
        task = get_task(task_name)
        instance = task.sample(derive_rng(seed, 0), width=RESOLUTION, height=RESOLUTION)
        env = OracleWorld(task.chains(), instance.camera)
        goals = task.goal_frames(instance, env)[-2:]
        result = mpc_loop(
            env, env, instance.start, goals, cfg, max_cycles=max_cycles,
            success=lambda state, _: task.success(instance, state), seed=seed,
        )
        return result.success

    def test_planar_reach(self):
        """The planar arm reaches its marker in at least eight of ten seeds."""
        cfg = PlanConfig(search_dims=(0, 1))
        successes = sum(self._run("planar_reach", cfg, seed, max_cycles=30) for seed in SEEDS)
        vprint(f"planar reach: {successes}/10")
        assert successes >= 8

    def test_rotation_strategies_on_flip(self):
        """Rotation-aware strategies succeed at least as often as joint search on the flip task."""
        counts = {}
        for strategy in ("joint", "rotation_first", "axis_wise"):
            cfg = PlanConfig(strategy=strategy)
            counts[strategy] = sum(self._run("flip_cuboid", cfg, seed, max_cycles=40) for seed in SEEDS)
        vprint(f"flip_cuboid successes: {counts}")
        assert counts["rotation_first"] >= counts["joint"]
        assert counts["axis_wise"] >= counts["joint"]


class TestPolicyRanking:
    """A learned world ranks noisy scripted policies like reality does."""

    def test_proxy_ranks_noise_family(self, trained):
        """Proxy success tracks real success across the noise-graded family."""
        task = get_task("reach")
        world = LearnedWorld(trained.model, task.chains(), task.camera(width=RESOLUTION, height=RESOLUTION),
                             SamplerConfig(steps=10))
        table, _ = evaluate_policy_family(
            noise_family("reach"), world, episodes=20, width=RESOLUTION, height=RESOLUTION
        )
        vprint(f"real {table.real}, proxy {table.proxy}")
        assert pearson_r(table) >= 0.8
        assert mmrv(table) <= 0.1
