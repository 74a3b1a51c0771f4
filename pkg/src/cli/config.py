"""
Run configuration.

A run is described by one TOML file with the sections ``[robot]``,
``[camera]``, ``[video]``, ``[data]``, ``[ik]``, ``[loss]``, ``[train]``,
``[sampler]``, ``[plan]`` and ``[eval]`` plus a top-level ``seed``. Every
key ``section.key`` doubles as the command-line flag ``--section-key``;
flags override the file. Unknown sections or keys are rejected.
"""

import argparse
import math

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import tomli_w

from ..model.objectives import LossWeights
from ..model.training import TrainConfig
from ..model.worlds import SamplerConfig
from ..planning.cem import PlanConfig
from ..robot.kinematics import IKConfig
from ..services.dataset import DatasetConfig
from ..utils.errors import ConfigError

RESOLVED_NAME = "resolved_config.toml"


@dataclass
class RobotSection:
    # bundled fixture name or URDF path
    urdf: str = "franka_toy"


@dataclass
class CameraSection:
    # JSON camera file; empty uses the task camera
    file: str = ""
    jitter: float = 0.0


@dataclass
class VideoSection:
    T: int = 25
    width: int = 64
    height: int = 64


@dataclass
class DataSection:
    count: int = 50
    task: str = "reach"
    noise: float = 0.0
    clip_start: str = "zero"
    workers: int = 1


@dataclass
class IkSection:
    damping: float = 0.05
    max_iters: int = 200
    tol_pos: float = 1e-4
    tol_rot: float = 1e-3


@dataclass
class LossSection:
    lambda_dyn: float = 0.1
    lambda_flow_star: float = 0.05
    e_switch: int = 5
    K: int = 4
    huber_delta: float = 1.0
    eps_motion: float = 0.5


@dataclass
class TrainSection:
    epochs: int = 30
    batch_size: int = 8
    learning_rate: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 1e-4
    grad_clip_norm: float = 1.0
    warmup_steps: int = 0
    tau_max: int = 1000
    blocks: int = 4
    hidden: int = 32
    conditioning: str = "mask"


@dataclass
class SamplerSection:
    steps: int = 10


@dataclass
class PlanSection:
    horizon: int = 5
    iterations: int = 5
    samples: int = 64
    elites: int = 8
    strategy: str = "joint"
    translation_step: float = 0.05
    rotation_step_deg: float = 20.0
    floor_ratio: float = 0.1
    search_dims: List[int] = field(default_factory=lambda: [0, 1, 2, 3, 4, 5])
    # negative: sample the gripper
    gripper: float = -1.0
    # zero: derive from the goal image
    switch_threshold: float = 0.0
    max_cycles: int = 30


@dataclass
class EvalSection:
    episodes: int = 20
    noise_levels: List[float] = field(default_factory=lambda: [0.0, 0.01, 0.03, 0.06, 0.1])
    chunk: int = 4


SECTIONS = {
    "robot": RobotSection,
    "camera": CameraSection,
    "video": VideoSection,
    "data": DataSection,
    "ik": IkSection,
    "loss": LossSection,
    "train": TrainSection,
    "sampler": SamplerSection,
    "plan": PlanSection,
    "eval": EvalSection,
}


@dataclass
class RunConfig:
    seed: int = 0
    robot: RobotSection = field(default_factory=RobotSection)
    camera: CameraSection = field(default_factory=CameraSection)
    video: VideoSection = field(default_factory=VideoSection)
    data: DataSection = field(default_factory=DataSection)
    ik: IkSection = field(default_factory=IkSection)
    loss: LossSection = field(default_factory=LossSection)
    train: TrainSection = field(default_factory=TrainSection)
    sampler: SamplerSection = field(default_factory=SamplerSection)
    plan: PlanSection = field(default_factory=PlanSection)
    eval: EvalSection = field(default_factory=EvalSection)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunConfig":
        config = cls()
        for key, value in data.items():
            if key == "seed":
                config.seed = _coerce("seed", value, 0)
                continue
            if key not in SECTIONS:
                raise ConfigError(f"unknown config section '{key}'")
            if not isinstance(value, dict):
                raise ConfigError(f"config section '{key}' must be a table")
            section = getattr(config, key)
            known = {f.name: f for f in fields(section)}
            for name, item in value.items():
                if name not in known:
                    raise ConfigError(f"unknown config key '{key}.{name}'")
                setattr(section, name, _coerce(f"{key}.{name}", item, getattr(section, name)))
        return config

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {"seed": self.seed}
        for name in SECTIONS:
            section = getattr(self, name)
            out[name] = {f.name: getattr(section, f.name) for f in fields(section)}
        return out

    # Library configurations

    def dataset_config(self) -> DatasetConfig:
        return DatasetConfig(
            count=self.data.count,
            task=self.data.task,
            T=self.video.T,
            noise=self.data.noise,
            seed=self.seed,
            jitter=self.camera.jitter,
            width=self.video.width,
            height=self.video.height,
            clip_start=self.data.clip_start,
            workers=self.data.workers,
        )

    def ik_config(self) -> IKConfig:
        try:
            return IKConfig(
                damping=self.ik.damping,
                max_iters=self.ik.max_iters,
                tol_pos=self.ik.tol_pos,
                tol_rot=self.ik.tol_rot,
            )
        except ValueError as e:
            raise ConfigError(str(e))

    def loss_weights(self) -> LossWeights:
        return LossWeights(**{f.name: getattr(self.loss, f.name) for f in fields(self.loss)})

    def train_config(self) -> TrainConfig:
        values = {f.name: getattr(self.train, f.name) for f in fields(self.train)}
        return TrainConfig(seed=self.seed, weights=self.loss_weights(), **values)

    def sampler_config(self) -> SamplerConfig:
        return SamplerConfig(steps=self.sampler.steps, seed=self.seed)

    def plan_config(self) -> PlanConfig:
        p = self.plan
        return PlanConfig(
            horizon=p.horizon,
            iterations=p.iterations,
            samples=p.samples,
            elites=p.elites,
            strategy=p.strategy,
            translation_step=p.translation_step,
            rotation_step=math.radians(p.rotation_step_deg),
            floor_ratio=p.floor_ratio,
            search_dims=tuple(p.search_dims),
            gripper=None if p.gripper < 0 else p.gripper,
            switch_threshold=None if p.switch_threshold <= 0 else p.switch_threshold,
        )

    def validate(self) -> "RunConfig":
        """Build every library configuration once so invalid values fail early."""
        self.dataset_config()
        self.ik_config()
        self.train_config()
        self.sampler_config()
        self.plan_config()
        if self.eval.episodes < 1 or self.eval.chunk < 1:
            raise ConfigError("eval.episodes and eval.chunk must be at least 1")
        return self


def _coerce(name: str, value: Any, default: Any) -> Any:
    """Convert ``value`` to the type of ``default``."""
    try:
        if isinstance(default, bool):
            if isinstance(value, str):
                return value.lower() in ("1", "true", "yes", "on")
            return bool(value)
        if isinstance(default, int):
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(f"{value} is not an integer")
            return int(value)
        if isinstance(default, float):
            return float(value)
        if isinstance(default, list):
            if isinstance(value, str):
                value = [v for v in value.split(",") if v.strip()]
            element = default[0] if default else ""
            return [_coerce(name, v, element) for v in value]
        return str(value)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid value for '{name}': {value!r} ({e})")


def load_config(path: Optional[Union[str, Path]] = None) -> RunConfig:
    """Read a TOML run configuration (defaults when ``path`` is None)."""
    if path is None:
        return RunConfig()
    try:
        with open(path, "rb") as handle:
            data = tomllib.load(handle)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}")
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"invalid TOML in {path}: {e}")
    return RunConfig.from_dict(data)


def write_resolved(config: RunConfig, directory: Union[str, Path]) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / RESOLVED_NAME
    path.write_bytes(tomli_w.dumps(config.to_dict()).encode("utf-8"))
    return path


def flag_name(section: str, key: str) -> str:
    return f"--{section}-{key.replace('_', '-')}"


def dest_name(section: str, key: str) -> str:
    return f"cfg__{section}__{key}"


def add_config_flags(parser: argparse.ArgumentParser) -> None:
    """One flag per config key, named ``--section-key``."""
    group = parser.add_argument_group("configuration overrides")
    group.add_argument("--seed", dest="cfg__seed", default=None, help="Master seed (default 0)")
    defaults = RunConfig()
    for section in SECTIONS:
        for f in fields(getattr(defaults, section)):
            default = getattr(getattr(defaults, section), f.name)
            shown = ",".join(str(v) for v in default) if isinstance(default, list) else default
            group.add_argument(
                flag_name(section, f.name),
                dest=dest_name(section, f.name),
                default=None,
                metavar="VALUE",
                help=f"{section}.{f.name} (default {shown!s})",
            )


def overrides_from_args(args: argparse.Namespace) -> Dict[str, Any]:
    """Nested mapping of the config flags given on the command line."""
    overrides: Dict[str, Any] = {}
    for dest, value in vars(args).items():
        if value is None or not dest.startswith("cfg__"):
            continue
        parts: Tuple[str, ...] = tuple(dest.split("__")[1:])
        if parts == ("seed",):
            overrides["seed"] = value
        else:
            overrides.setdefault(parts[0], {})[parts[1]] = value
    return overrides


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """File values, then command-line overrides, validated."""
    config = load_config(getattr(args, "config", None))
    overrides = overrides_from_args(args)
    if overrides:
        merged = config.to_dict()
        for key, value in overrides.items():
            if isinstance(value, dict):
                merged[key].update(value)
            else:
                merged[key] = value
        config = RunConfig.from_dict(merged)
    return config.validate()

