"""
Predictor training on generated tuples.

Each sample draws a noise level and Gaussian noise, predicts the velocity
and back-propagates the gradient of

    diff + lambda_dyn * dyn + flow_lambda(epoch) * flow

with respect to the prediction. The dynamics and flow terms act on the
clean-latent reconstruction, so their gradients reach the velocity through
``-sqrt(1 - alpha)``. Optimisation is momentum SGD with weight decay,
linear warm-up and gradient-norm clipping.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
import pandas as pd
import torch

from ..render.frames import RgbVideo
from ..services.dataset import TrainingTuple
from ..utils.errors import ConfigError, NonFiniteLoss, ShapeError
from ..utils.logging import get_logger
from ..utils.seeding import derive_rng
from .codec import decode_pixels, encode, pixel_adjoint
from .flow import FlowField, estimate_flow, flow_loss_and_grad
from .objectives import (
    LossParts,
    LossWeights,
    NoiseSchedule,
    diffusion_loss,
    dynamics_loss,
    flow_lambda,
    noising,
    reconstruct,
    total_loss,
)
from .predictor import CONDITIONINGS, LatentPredictor, action_features, build_predictor

logger = get_logger("training")

LOG_COLUMNS = ["epoch", "diff", "dyn", "flow", "total"]


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 8
    learning_rate: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 1e-4
    grad_clip_norm: float = 1.0
    warmup_steps: int = 0
    seed: int = 0
    tau_max: int = 1000
    blocks: int = 4
    hidden: int = 32
    conditioning: str = "mask"
    weights: LossWeights = field(default_factory=LossWeights)

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be at least 1, got {self.epochs}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be at least 1, got {self.batch_size}")
        if self.grad_clip_norm < 0 or self.weight_decay < 0 or self.warmup_steps < 0:
            raise ConfigError("grad_clip_norm, weight_decay and warmup_steps must be non-negative")
        if not (0.0 <= self.momentum < 1.0):
            raise ConfigError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.conditioning not in CONDITIONINGS:
            raise ConfigError(f"conditioning must be one of {CONDITIONINGS}, got '{self.conditioning}'")

    @property
    def schedule(self) -> NoiseSchedule:
        return NoiseSchedule.cosine(self.tau_max)


@dataclass(eq=False)
class PreparedTuple:
    """
    Latents of one training tuple.

    ``video`` is the codec reconstruction of the ground truth, the best any
    prediction can decode to; the flow term compares against it.
    """

    z0: np.ndarray
    z_init: np.ndarray
    condition: Optional[np.ndarray]
    video: RgbVideo
    _flow: Optional[FlowField] = field(default=None, repr=False)

    @property
    def true_flow(self) -> FlowField:
        if self._flow is None:
            self._flow = estimate_flow(self.video)
        return self._flow


@dataclass(eq=False)
class TrainResult:
    model: LatentPredictor
    log: pd.DataFrame

    def write_log(self, path: Union[str, Path]) -> None:
        self.log.to_csv(path, index=False)


def condition_for(item: TrainingTuple, conditioning: str, latent_frames: int, action_dim: int) -> Optional[np.ndarray]:
    if conditioning == "mask":
        return encode(item.masks).data
    if conditioning == "coords":
        return action_features(np.asarray(item.actions.to_rows()), latent_frames, action_dim)
    return None


def prepare(tuples: Sequence[TrainingTuple], conditioning: str) -> List[PreparedTuple]:
    """Encode every tuple; all tuples must share one shape."""
    prepared = []
    shape = None
    for item in tuples:
        z0 = encode(item.video).data
        if shape is not None and z0.shape != shape:
            raise ShapeError(f"tuple {item.tuple_id} has latent shape {z0.shape}, expected {shape}")
        shape = z0.shape
        z_init = encode(item.initial_frame).data
        action_dim = len(item.actions.to_rows()[0])
        prepared.append(
            PreparedTuple(
                z0,
                z_init,
                condition_for(item, conditioning, z0.shape[0], action_dim),
                RgbVideo(decode_pixels(z0)),
            )
        )
    return prepared


def _to_tensor(x: Optional[np.ndarray]) -> Optional[torch.Tensor]:
    if x is None:
        return None
    return torch.from_numpy(np.ascontiguousarray(x, dtype=np.float64))


def sample_loss(
    model: LatentPredictor,
    item: PreparedTuple,
    schedule: NoiseSchedule,
    weights: LossWeights,
    epoch: int,
    rng: np.random.Generator,
    window: int,
):
    """
    Loss parts of one noisy draw and the gradient on the velocity output.

    Returns:
        ``(parts, v_pred tensor, d total / d v_pred)``
    """
    alpha = schedule.alpha(schedule.sample_tau(rng))
    eps = rng.standard_normal(item.z0.shape)
    z_tilde = noising(item.z0, eps, alpha)

    v = model(_to_tensor(z_tilde), _to_tensor(item.z_init), alpha, _to_tensor(item.condition))
    v_np = v.detach().numpy()
    diff, grad = diffusion_loss(item.z0, z_tilde, v_np, alpha)

    z_hat = reconstruct(z_tilde, v_np, alpha)
    back = -np.sqrt(1.0 - alpha)
    dyn = 0.0
    if window >= 1:
        dyn, g_dyn = dynamics_loss(z_hat, item.z0, window)
        grad = grad + weights.lambda_dyn * back * g_dyn

    flow = 0.0
    gate = flow_lambda(epoch, weights)
    if gate > 0:
        predicted = RgbVideo(decode_pixels(z_hat))
        flow, g_pix = flow_loss_and_grad(
            predicted, item.video, weights.eps_motion, weights.huber_delta, true_flow=item.true_flow
        )
        grad = grad + gate * back * pixel_adjoint(g_pix)

    return LossParts(diff, dyn, flow), v, grad


def train(
    tuples: Sequence[TrainingTuple],
    cfg: TrainConfig,
    model: Optional[LatentPredictor] = None,
) -> TrainResult:
    """
    Train a predictor on ``tuples``.

    Args:
        tuples: Non-empty list of shape-consistent training tuples
        cfg: Training configuration
        model: Predictor to continue training (default: fresh, seeded)

    Returns:
        TrainResult with the model and a per-epoch loss log
        (epoch, diff, dyn, flow, total)

    Raises:
        ConfigError: Empty dataset
        NonFiniteLoss: A loss became NaN or infinite (epoch and step attached)
    """
    if not tuples:
        raise ConfigError("cannot train on an empty dataset")
    action_dim = len(tuples[0].actions.to_rows()[0])
    if model is None:
        model = build_predictor(
            seed=cfg.seed,
            blocks=cfg.blocks,
            hidden=cfg.hidden,
            conditioning=cfg.conditioning,
            action_dim=action_dim,
            video_length=len(tuples[0].video),
        )
    prepared = prepare(tuples, model.conditioning)
    latent_frames = prepared[0].z0.shape[0]
    window = min(cfg.weights.K, latent_frames - 1)
    if window != cfg.weights.K:
        logger.warning(f"dynamics window K={cfg.weights.K} clamped to {window} for {latent_frames} latent frames")

    schedule = cfg.schedule
    rng = derive_rng(cfg.seed, 1)
    optimizer = torch.optim.SGD(
        model.parameters(), lr=cfg.learning_rate, momentum=cfg.momentum, weight_decay=cfg.weight_decay
    )
    warmup = cfg.warmup_steps
    scheduler = torch.optim.lr_scheduler.LambdaLR(
        optimizer, lambda step: min(1.0, (step + 1) / warmup) if warmup else 1.0
    )

    logger.info(
        f"🏋️ Training {cfg.conditioning} predictor on {len(prepared)} tuples for {cfg.epochs} epochs "
        f"(latent {prepared[0].z0.shape})"
    )
    rows = []
    step = 0
    model.train()
    for epoch in range(cfg.epochs):
        sums = np.zeros(4)
        order = rng.permutation(len(prepared))
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            optimizer.zero_grad()
            for index in batch:
                parts, v, grad = sample_loss(model, prepared[index], schedule, cfg.weights, epoch, rng, window)
                try:
                    total = total_loss(parts, cfg.weights, epoch)
                except NonFiniteLoss as e:
                    raise NonFiniteLoss(epoch, step, f"(tuple {int(index)})") from e
                if not np.all(np.isfinite(grad)):
                    raise NonFiniteLoss(epoch, step, "(gradient)")
                v.backward(torch.from_numpy(grad / len(batch)))
                sums += (parts.diff, parts.dyn, parts.flow, total)
            if cfg.grad_clip_norm > 0:
                torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.grad_clip_norm)
            optimizer.step()
            scheduler.step()
            step += 1
        means = sums / len(prepared)
        rows.append({"epoch": epoch, "diff": means[0], "dyn": means[1], "flow": means[2], "total": means[3]})
        logger.debug(f"epoch {epoch}: total {means[3]:.5f} (diff {means[0]:.5f}, dyn {means[1]:.5f}, flow {means[2]:.5f})")
        logger.progress(epoch + 1, cfg.epochs, "epochs")
    model.eval()

    log = pd.DataFrame(rows, columns=LOG_COLUMNS)
    logger.success(f"Training finished: total loss {log['total'].iloc[0]:.4f} -> {log['total'].iloc[-1]:.4f}")
    return TrainResult(model=model, log=log)


def read_loss_log(path: Union[str, Path]) -> pd.DataFrame:
    return pd.read_csv(path)
