"""
World models backed by the latent predictor, plus the static baseline.

``LearnedWorld`` renders embodiment masks for the commanded actions,
encodes them together with the initial frame, runs a deterministic
reverse-diffusion sampler and decodes the result. Actions are consumed in
chunks of the model's native length; each chunk starts with a hold action
so that latent frame 0 is the current frame.
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
import torch

from ..render.camera import CameraModel
from ..render.frames import RgbVideo, to_uint8
from ..robot.kinematics import IKConfig
from ..robot.urdf import KinematicChain
from ..services.actions import (
    ActionSequence,
    actions_to_joint_states,
    hold_step,
    masks_from_trajectory,
)
from ..services.world import Prediction, SimState, WorldModel
from ..utils.errors import ConfigError
from ..utils.seeding import derive_rng
from .codec import encode, decode_pixels, latent_shape
from .objectives import NoiseSchedule, estimate_noise, reconstruct
from .predictor import LatentPredictor, action_features


@dataclass(frozen=True)
class SamplerConfig:
    steps: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.steps < 1:
            raise ConfigError(f"sampler needs at least one step, got {self.steps}")


def sampling_taus(schedule: NoiseSchedule, steps: int) -> np.ndarray:
    return np.rint(np.linspace(schedule.tau_max - 1, 0, steps)).astype(int)


def ddim_sample(
    model: LatentPredictor,
    z_init: np.ndarray,
    condition: Optional[np.ndarray],
    shape: Sequence[int],
    sampler: SamplerConfig,
    schedule: Optional[NoiseSchedule] = None,
) -> np.ndarray:
    """
    Deterministic reverse iteration from seeded Gaussian noise.

    Each step predicts the velocity, forms the clean and noise estimates
    and re-noises the clean estimate to the next level; the last step
    returns the clean estimate. Latent frame 0 is then replaced by
    ``z_init``.
    """
    schedule = schedule or NoiseSchedule.cosine()
    rng = derive_rng(sampler.seed, 0)
    z = rng.standard_normal(tuple(shape))
    init_t = torch.from_numpy(np.ascontiguousarray(z_init, dtype=np.float64))
    cond_t = None if condition is None else torch.from_numpy(np.ascontiguousarray(condition, dtype=np.float64))
    taus = sampling_taus(schedule, sampler.steps)
    with torch.no_grad():
        for i, tau in enumerate(taus):
            alpha = schedule.alpha(tau)
            v = model(torch.from_numpy(z), init_t, alpha, cond_t).numpy()
            z0_hat = reconstruct(z, v, alpha)
            if i == len(taus) - 1:
                z = z0_hat
            else:
                eps_hat = estimate_noise(z, v, alpha)
                following = schedule.alpha(taus[i + 1])
                z = np.sqrt(following) * z0_hat + np.sqrt(1.0 - following) * eps_hat
    z = np.array(z)
    z[0] = z_init[0]
    return z


class LearnedWorld(WorldModel):
    """:class:`WorldModel` over a trained :class:`LatentPredictor`."""

    def __init__(
        self,
        model: LatentPredictor,
        chains: Sequence[KinematicChain],
        cam: CameraModel,
        sampler: Optional[SamplerConfig] = None,
        ik: Optional[IKConfig] = None,
        schedule: Optional[NoiseSchedule] = None,
    ):
        if model.video_length < 5:
            raise ConfigError(f"model video length {model.video_length} is too short to predict with")
        if isinstance(chains, KinematicChain):
            chains = [chains]
        self.model = model
        self.chains = tuple(chains)
        self.cam = cam
        self.sampler = sampler or SamplerConfig()
        self.ik = ik
        self.schedule = schedule or NoiseSchedule.cosine()
        self.chunk_length = model.video_length - 1

    def _condition(self, seq: ActionSequence, trajectory, base) -> Optional[np.ndarray]:
        if self.model.conditioning == "mask":
            masks = masks_from_trajectory(trajectory, self.chains, self.cam, base)
            return encode(masks).data
        if self.model.conditioning == "coords":
            frames = latent_shape(len(seq), self.cam.height, self.cam.width)[0]
            return action_features(np.asarray(seq.to_rows()), frames, self.model.action_dim)
        return None

    def predict_chunk(self, frame: np.ndarray, actions: ActionSequence, state: SimState, index: int = 0):
        """Up to ``chunk_length`` predicted frames and the successor state."""
        count = len(actions)
        if count > self.chunk_length:
            raise ConfigError(f"chunk of {count} actions exceeds the native length {self.chunk_length}")
        hold = ActionSequence((hold_step(self.chains, state.joints, state.grippers),))
        seq = hold.concat(actions.pad_to(self.chunk_length))
        trajectory = actions_to_joint_states(seq, self.chains, state.joints, self.ik)

        condition = self._condition(seq, trajectory, state.scene.robot_base)
        z_init = encode(frame).data
        shape = latent_shape(len(seq), self.cam.height, self.cam.width)
        sampler = SamplerConfig(self.sampler.steps, self.sampler.seed + index)
        z = ddim_sample(self.model, z_init, condition, shape, sampler, self.schedule)
        frames = to_uint8(decode_pixels(z))[1:count + 1]

        joints, grippers = trajectory.step(count)
        return frames, SimState(tuple(joints), tuple(grippers), state.scene)

    def predict(self, initial_frame: np.ndarray, actions: ActionSequence, state: SimState) -> Prediction:
        """
        Predict one frame per action, chunk by chunk.

        Raises:
            Kinematics errors tagged with the failing step
        """
        frame = to_uint8(initial_frame)
        videos: List[np.ndarray] = []
        for index, start in enumerate(range(0, len(actions), self.chunk_length)):
            chunk = actions[start:start + self.chunk_length]
            frames, state = self.predict_chunk(frame, chunk, state, index)
            videos.append(frames)
            frame = frames[-1]
        return Prediction(video=RgbVideo(np.concatenate(videos)), state=state)


class StaticWorld(WorldModel):
    """Baseline that repeats the initial frame."""

    def __init__(self, chains: Sequence[KinematicChain], cam: CameraModel):
        if isinstance(chains, KinematicChain):
            chains = [chains]
        self.chains = tuple(chains)
        self.cam = cam

    def predict(self, initial_frame: np.ndarray, actions: ActionSequence, state: SimState) -> Prediction:
        frames = np.repeat(to_uint8(initial_frame)[None], len(actions), axis=0)
        return Prediction(video=RgbVideo(frames), state=state)


def learned_predict(
    model: LatentPredictor,
    initial_frame: np.ndarray,
    actions: ActionSequence,
    chains: Sequence[KinematicChain],
    cam: CameraModel,
    sampler: Optional[SamplerConfig] = None,
    state: Optional[SimState] = None,
    ik: Optional[IKConfig] = None,
) -> RgbVideo:
    """Predicted video for ``actions`` from ``initial_frame`` (robot at home unless ``state`` is given)."""
    world = LearnedWorld(model, chains, cam, sampler, ik)
    state = state or SimState.at_home(world.chains)
    return world.predict(initial_frame, actions, state).video
