"""
Scripted policies of graded quality.

A scripted policy replays a task's expert waypoints with Gaussian noise on
every commanded position (and an optional constant offset), open loop,
handing out fixed-length action chunks.
"""

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np

from ..robot.urdf import KinematicChain
from ..utils.errors import ConfigError
from .actions import ActionSequence, CartesianAction
from .tasks import Task, TaskInstance, get_task
from .world import SimState


@dataclass(frozen=True)
class PolicySpec:
    """Scripted behaviour ``policy_id`` (a task name) with action noise ``noise`` (m)."""

    policy_id: str
    noise: float = 0.0
    chunk: int = 4
    offset: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    label: str = ""

    def __post_init__(self):
        if self.chunk < 1:
            raise ConfigError(f"policy chunk length must be at least 1, got {self.chunk}")
        if self.noise < 0:
            raise ConfigError(f"policy noise must be non-negative, got {self.noise}")
        object.__setattr__(self, "offset", tuple(float(v) for v in self.offset))
        if len(self.offset) != 3:
            raise ConfigError(f"policy offset must have 3 values, got {self.offset}")
        get_task(self.policy_id)

    @property
    def name(self) -> str:
        return self.label or f"{self.policy_id}@{self.noise:g}"

    def with_noise(self, noise: float) -> "PolicySpec":
        return replace(self, noise=noise, label="")

    def to_dict(self) -> dict:
        return {
            "policy_id": self.policy_id,
            "noise": self.noise,
            "chunk": self.chunk,
            "offset": list(self.offset),
            "label": self.name,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PolicySpec":
        unknown = set(data) - {"policy_id", "noise", "chunk", "offset", "label"}
        if unknown:
            raise ConfigError(f"unknown policy keys: {sorted(unknown)}")
        try:
            return cls(
                policy_id=data["policy_id"],
                noise=float(data.get("noise", 0.0)),
                chunk=int(data.get("chunk", 4)),
                offset=tuple(data.get("offset", (0.0, 0.0, 0.0))),
                label=data.get("label", ""),
            )
        except KeyError as e:
            raise ConfigError(f"policy description is missing {e}")


def load_policies(path: Union[str, Path]) -> List[PolicySpec]:
    """Policy family from a JSON list (or ``{"policies": [...]}``)."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read policies {path}: {e}")
    if isinstance(data, dict):
        data = data.get("policies", [])
    return [PolicySpec.from_dict(entry) for entry in data]


@dataclass
class ScriptedPolicy:
    """
    Open-loop noisy expert for one task instance.

    ``reset`` scripts the whole trajectory from the given state; chunks are
    then served in order. Once the script is exhausted the final action is
    repeated.
    """

    spec: PolicySpec
    instance: TaskInstance
    chains: List[KinematicChain]
    _script: List[CartesianAction] = field(default_factory=list, init=False, repr=False)
    _cursor: int = field(default=0, init=False)

    @property
    def task(self) -> Task:
        return get_task(self.spec.policy_id)

    def reset(self, state: SimState, rng: Optional[np.random.Generator] = None) -> "ScriptedPolicy":
        expert = self.task.expert_actions(self.instance, state, self.chains)
        offset = np.asarray(self.spec.offset, dtype=float)
        script = []
        for step in expert.steps:
            action = step[0]
            position = action.position + offset
            if self.spec.noise > 0:
                if rng is None:
                    raise ConfigError("a noisy policy needs a random generator")
                position = position + rng.normal(0.0, self.spec.noise, 3)
            script.append(CartesianAction(position, action.rpy, action.gripper))
        self._script = script
        self._cursor = 0
        return self

    @property
    def length(self) -> int:
        return len(self._script)

    @property
    def done(self) -> bool:
        return self._cursor >= len(self._script)

    def actions(self) -> ActionSequence:
        """The full scripted trajectory."""
        if not self._script:
            raise ConfigError("policy has not been reset")
        return ActionSequence.single(self._script)

    def next_chunk(self, length: Optional[int] = None) -> ActionSequence:
        if not self._script:
            raise ConfigError("policy has not been reset")
        length = length or self.spec.chunk
        chunk = []
        for _ in range(length):
            index = min(self._cursor, len(self._script) - 1)
            chunk.append(self._script[index])
            self._cursor += 1
        return ActionSequence.single(chunk)
