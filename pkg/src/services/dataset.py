"""
Training-tuple generation from scripted rollouts in the oracle simulator.

Every trajectory draws its scene, camera and policy noise from
``derive_rng(seed, index)``, so the dataset does not depend on the order
(or parallelism) in which trajectories are produced. A clip starts with a
hold action, so frame 0 equals the initial frame.

Layout on disk::

    manifest.jsonl
    tuples/000000/initial.ppm
    tuples/000000/frames/frame_0000.ppm ...
    tuples/000000/masks/mask_0000.pbm ...      silhouettes (conditioning)
    tuples/000000/arm_masks/mask_0000.pbm ...  occlusion-aware (evaluation)
"""

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np

from ..render.camera import CameraModel
from ..render.frames import (
    MaskVideo,
    RgbVideo,
    read_mask_video,
    read_ppm,
    read_rgb_video,
    write_mask_video,
    write_ppm,
    write_rgb_video,
)
from ..render.scene import scene_from_dict, scene_to_dict
from ..robot.kinematics import IKConfig
from ..robot.urdf import KinematicChain, bundled_urdf
from ..utils.errors import ConfigError, MaskWorldError, SceneSamplingFailed, ShapeError
from ..utils.logging import get_logger
from ..utils.seeding import derive_rng
from .actions import ActionSequence, hold_step, masks_from_actions
from .policies import PolicySpec, ScriptedPolicy
from .simulator import OracleWorld
from .tasks import MAX_ATTEMPTS, TaskInstance, get_task
from .world import SimState

logger = get_logger("dataset")

MANIFEST_VERSION = 1
MANIFEST_NAME = "manifest.jsonl"
CLIP_STARTS = ("zero", "random")


@dataclass(frozen=True)
class DatasetConfig:
    """What to generate; ``T`` counts frames including the initial one."""

    count: int = 50
    task: str = "reach"
    T: int = 25
    noise: float = 0.0
    seed: int = 0
    jitter: float = 0.0
    width: int = 64
    height: int = 64
    clip_start: str = "zero"
    workers: int = 1

    def __post_init__(self):
        if self.count < 0:
            raise ConfigError(f"dataset count must be non-negative, got {self.count}")
        if self.T < 1 or (self.T - 1) % 4 != 0:
            raise ConfigError(f"video length T must satisfy T = 1 (mod 4), got {self.T}")
        if self.clip_start not in CLIP_STARTS:
            raise ConfigError(f"clip_start must be one of {CLIP_STARTS}, got '{self.clip_start}'")
        if self.width % 8 or self.height % 8:
            raise ConfigError(f"resolution must be divisible by 8, got {self.width}x{self.height}")
        if self.workers < 1:
            raise ConfigError(f"workers must be at least 1, got {self.workers}")
        get_task(self.task)


@dataclass(frozen=True, eq=False)
class TrainingTuple:
    """Initial frame, conditioning masks and the video they produce."""

    tuple_id: str
    initial_frame: np.ndarray
    masks: MaskVideo
    video: RgbVideo
    actions: ActionSequence
    arm_masks: Optional[MaskVideo] = None
    state: Optional[SimState] = None
    record: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.masks) != len(self.video):
            raise ShapeError(f"{len(self.masks)} masks for {len(self.video)} frames")
        if self.masks.resolution != self.video.resolution:
            raise ShapeError(f"mask resolution {self.masks.resolution} != video {self.video.resolution}")
        if self.initial_frame.shape[:2] != self.video.resolution:
            raise ShapeError(f"initial frame {self.initial_frame.shape[:2]} != video {self.video.resolution}")
        if len(self.actions) != len(self.video):
            raise ShapeError(f"{len(self.actions)} actions for {len(self.video)} frames")

    @property
    def camera(self) -> CameraModel:
        return CameraModel.from_dict(self.record["camera"])

    @property
    def chains(self) -> List[KinematicChain]:
        return bundled_urdf(self.record["urdf"]).split_manipulators()


def _clip(actions: ActionSequence, start: int, length: int) -> ActionSequence:
    return actions[start:start + length].pad_to(length) if start < len(actions) else actions[-1:].pad_to(length)


def _attempt(
    cfg: DatasetConfig,
    index: int,
    rng: np.random.Generator,
    ik: Optional[IKConfig],
) -> TrainingTuple:
    task = get_task(cfg.task)
    chains = task.chains()
    instance: TaskInstance = task.sample(rng, cfg.jitter, cfg.width, cfg.height, ik)
    world = OracleWorld(chains, instance.camera, ik)
    policy = ScriptedPolicy(PolicySpec(cfg.task, cfg.noise), instance, chains).reset(instance.start, rng)
    script = policy.actions()

    start = 0
    if cfg.clip_start == "random":
        start = int(rng.integers(0, len(script)))
    state = world.run(script[:start], instance.start) if start else instance.start

    hold = ActionSequence((hold_step(chains, state.joints, state.grippers),))
    actions = hold.concat(_clip(script, start, cfg.T - 1))
    initial_frame, _ = world.render(state)
    _, video, arm_masks = world.rollout(actions, state)
    masks = masks_from_actions(actions, chains, instance.camera, state.joints, ik, state.scene.robot_base)

    record = {
        "version": MANIFEST_VERSION,
        "id": f"{index:06d}",
        "task": cfg.task,
        "urdf": task.urdf,
        "camera": instance.camera.to_dict(),
        "actions": actions.to_rows(),
        "seed_q": [[float(v) for v in q] for q in state.joints],
        "grippers": list(state.grippers),
        "frame_dir": f"tuples/{index:06d}/frames",
        "mask_dir": f"tuples/{index:06d}/masks",
        "seed": cfg.seed,
        "index": index,
        "policy": cfg.task,
        "noise": cfg.noise,
        "clip_start": start,
        "scene": scene_to_dict(state.scene),
    }
    return TrainingTuple(
        tuple_id=record["id"],
        initial_frame=initial_frame,
        masks=masks,
        video=video,
        actions=actions,
        arm_masks=arm_masks,
        state=state,
        record=record,
    )


def generate_tuple(cfg: DatasetConfig, index: int, ik: Optional[IKConfig] = None) -> TrainingTuple:
    """
    Trajectory ``index`` of the dataset described by ``cfg``.

    Raises:
        SceneSamplingFailed: No valid scene or noisy rollout within the retry budget
    """
    rng = derive_rng(cfg.seed, index)
    reason = ""
    for attempt in range(MAX_ATTEMPTS):
        try:
            return _attempt(cfg, index, rng, ik)
        except SceneSamplingFailed:
            raise
        except MaskWorldError as e:
            reason = f"({e.code}: {e})"
            logger.debug(f"trajectory {index}: attempt {attempt} rejected {reason}")
    raise SceneSamplingFailed(MAX_ATTEMPTS, reason)


def write_tuple(root: Union[str, Path], item: TrainingTuple) -> None:
    root = Path(root)
    base = root / "tuples" / item.tuple_id
    base.mkdir(parents=True, exist_ok=True)
    write_ppm(base / "initial.ppm", item.initial_frame)
    write_rgb_video(root / item.record["frame_dir"], item.video)
    write_mask_video(root / item.record["mask_dir"], item.masks)
    if item.arm_masks is not None:
        write_mask_video(base / "arm_masks", item.arm_masks)


def generate_dataset(
    cfg: DatasetConfig,
    out_dir: Optional[Union[str, Path]] = None,
    ik: Optional[IKConfig] = None,
) -> Tuple[List[TrainingTuple], List[dict]]:
    """
    Generate ``cfg.count`` training tuples and their manifest records.

    Args:
        cfg: Dataset configuration
        out_dir: When given, frames, masks and ``manifest.jsonl`` are written there
        ik: Inverse kinematics settings

    Returns:
        ``(tuples, manifest records)`` in index order
    """
    logger.info(f"🧪 Generating {cfg.count} '{cfg.task}' tuples (T={cfg.T}, noise={cfg.noise}, seed={cfg.seed})")
    indices = range(cfg.count)
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            tuples = list(pool.map(lambda i: generate_tuple(cfg, i, ik), indices))
    else:
        tuples = []
        for i in indices:
            tuples.append(generate_tuple(cfg, i, ik))
            logger.progress(i + 1, cfg.count, "tuples")
    records = [t.record for t in tuples]

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for item in tuples:
            write_tuple(out_dir, item)
        write_manifest(out_dir / MANIFEST_NAME, records)
        logger.success(f"Wrote {len(tuples)} tuples to {out_dir}")
    return tuples, records


def write_manifest(path: Union[str, Path], records: List[dict]) -> None:
    lines = [json.dumps(r, sort_keys=True) for r in records]
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def read_manifest(path: Union[str, Path]) -> List[dict]:
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read manifest {path}: {e}")
    records = []
    for number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}:{number}: invalid manifest record: {e}")
        if record.get("version") != MANIFEST_VERSION:
            raise ConfigError(f"{path}:{number}: unsupported manifest version {record.get('version')}")
        records.append(record)
    return records


def load_tuple(root: Union[str, Path], record: dict) -> TrainingTuple:
    root = Path(root)
    base = root / "tuples" / record["id"]
    scene = scene_from_dict(record["scene"])
    state = SimState(tuple(record["seed_q"]), tuple(record.get("grippers", [1.0] * len(record["seed_q"]))), scene)
    rows = np.asarray(record["actions"], dtype=float)
    actions = ActionSequence.from_array(rows.reshape(len(rows), -1, 7))
    arm_dir = base / "arm_masks"
    return TrainingTuple(
        tuple_id=record["id"],
        initial_frame=read_ppm(base / "initial.ppm"),
        masks=read_mask_video(root / record["mask_dir"]),
        video=read_rgb_video(root / record["frame_dir"]),
        actions=actions,
        arm_masks=read_mask_video(arm_dir) if arm_dir.is_dir() else None,
        state=state,
        record=record,
    )


def load_dataset(root: Union[str, Path]) -> List[TrainingTuple]:
    """Every tuple listed in ``root/manifest.jsonl``."""
    root = Path(root)
    return [load_tuple(root, r) for r in read_manifest(root)]
