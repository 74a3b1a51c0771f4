"""
Training objectives: noise schedule, forward noising, velocity targets and
the diffusion, dynamics-consistency and flow losses.

Losses are means over entries. ``diffusion_loss`` and ``dynamics_loss``
return their value together with the gradient with respect to their
first (predicted) argument.
"""

from dataclasses import dataclass
from typing import Mapping, Tuple, Union

import numpy as np

from ..utils.errors import ConfigError, KTooLarge, NonFiniteLoss, ShapeError
from .codec import LatentVideo

TAU_MAX = 1000
COSINE_OFFSET = 0.008
MIN_ALPHA = 1e-8

Array = Union[np.ndarray, LatentVideo]


def _array(x: Array) -> np.ndarray:
    return x.data if isinstance(x, LatentVideo) else np.asarray(x, dtype=float)


def _same_shape(*arrays: np.ndarray) -> None:
    shapes = {a.shape for a in arrays}
    if len(shapes) != 1:
        raise ShapeError(f"shape mismatch: {sorted(shapes)}")


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not (0.0 <= alpha <= 1.0):
        raise ConfigError(f"alpha must lie in [0, 1], got {alpha}")
    return alpha


@dataclass(frozen=True, eq=False)
class NoiseSchedule:
    """Cumulative signal coefficients alpha_tau, non-increasing in tau."""

    alphas: np.ndarray

    def __post_init__(self):
        alphas = np.asarray(self.alphas, dtype=float)
        if alphas.ndim != 1 or alphas.size < 1:
            raise ConfigError("noise schedule needs at least one coefficient")
        if np.any(alphas <= 0) or np.any(alphas > 1):
            raise ConfigError("noise schedule coefficients must lie in (0, 1]")
        if np.any(np.diff(alphas) > 0):
            raise ConfigError("noise schedule must be non-increasing")
        if alphas[0] < 0.999:
            raise ConfigError(f"noise schedule must start near 1, got {alphas[0]}")
        alphas.setflags(write=False)
        object.__setattr__(self, "alphas", alphas)

    @classmethod
    def cosine(cls, tau_max: int = TAU_MAX, offset: float = COSINE_OFFSET) -> "NoiseSchedule":
        def f(t):
            return np.cos((t / tau_max + offset) / (1 + offset) * np.pi / 2) ** 2

        steps = np.arange(1, tau_max + 1, dtype=float)
        alphas = np.clip(f(steps) / f(0.0), MIN_ALPHA, 1.0)
        return cls(np.minimum.accumulate(alphas))

    @property
    def tau_max(self) -> int:
        return self.alphas.size

    def alpha(self, tau: int) -> float:
        return float(self.alphas[int(tau)])

    def sample_tau(self, rng: np.random.Generator) -> int:
        return int(rng.integers(0, self.tau_max))


@dataclass(frozen=True)
class LossWeights:
    lambda_dyn: float = 0.1
    lambda_flow_star: float = 0.05
    e_switch: int = 5
    K: int = 4
    huber_delta: float = 1.0
    eps_motion: float = 0.5

    def __post_init__(self):
        if min(self.lambda_dyn, self.lambda_flow_star, self.e_switch, self.huber_delta, self.eps_motion) < 0:
            raise ConfigError(f"loss weights must be non-negative: {self}")
        if self.K < 1:
            raise ConfigError(f"dynamics window K must be at least 1, got {self.K}")


@dataclass(frozen=True)
class LossParts:
    diff: float = 0.0
    dyn: float = 0.0
    flow: float = 0.0


def noising(z0: Array, eps: Array, alpha_tau: float) -> np.ndarray:
    """sqrt(a) z0 + sqrt(1 - a) eps."""
    z0, eps = _array(z0), _array(eps)
    _same_shape(z0, eps)
    alpha = _check_alpha(alpha_tau)
    return np.sqrt(alpha) * z0 + np.sqrt(1.0 - alpha) * eps


def velocity_target(z0: Array, eps: Array, alpha_tau: float) -> np.ndarray:
    """sqrt(a) eps - sqrt(1 - a) z0."""
    z0, eps = _array(z0), _array(eps)
    _same_shape(z0, eps)
    alpha = _check_alpha(alpha_tau)
    return np.sqrt(alpha) * eps - np.sqrt(1.0 - alpha) * z0


def reconstruct(z_tilde: Array, v: Array, alpha_tau: float) -> np.ndarray:
    """Clean-latent estimate sqrt(a) z_tilde - sqrt(1 - a) v."""
    z_tilde, v = _array(z_tilde), _array(v)
    _same_shape(z_tilde, v)
    alpha = _check_alpha(alpha_tau)
    return np.sqrt(alpha) * z_tilde - np.sqrt(1.0 - alpha) * v


def estimate_noise(z_tilde: Array, v: Array, alpha_tau: float) -> np.ndarray:
    """Noise estimate sqrt(1 - a) z_tilde + sqrt(a) v."""
    z_tilde, v = _array(z_tilde), _array(v)
    _same_shape(z_tilde, v)
    alpha = _check_alpha(alpha_tau)
    return np.sqrt(1.0 - alpha) * z_tilde + np.sqrt(alpha) * v


def diffusion_loss(z0: Array, z_tilde: Array, v_pred: Array, alpha_tau: float) -> Tuple[float, np.ndarray]:
    """
    Mean squared reconstruction residual of the velocity prediction.

    Returns:
        ``(loss, d loss / d v_pred)``
    """
    z0, z_tilde, v_pred = _array(z0), _array(z_tilde), _array(v_pred)
    _same_shape(z0, z_tilde, v_pred)
    alpha = _check_alpha(alpha_tau)
    residual = z0 - (np.sqrt(alpha) * z_tilde - np.sqrt(1.0 - alpha) * v_pred)
    loss = float(np.mean(residual ** 2))
    grad = 2.0 * np.sqrt(1.0 - alpha) * residual / residual.size
    return loss, grad


def dynamics_loss(z_pred: Array, z_true: Array, K: int) -> Tuple[float, np.ndarray]:
    """
    Multi-offset temporal-difference consistency.

    ``sum_j 1/(T-j) sum_t mean((zp[t+j] - zp[t]) - (z[t+j] - z[t]))^2``
    for ``j = 1..K``.

    Returns:
        ``(loss, d loss / d z_pred)``

    Raises:
        ShapeError: Argument shapes differ
        KTooLarge: K is not smaller than the number of latent frames
    """
    z_pred, z_true = _array(z_pred), _array(z_true)
    _same_shape(z_pred, z_true)
    frames = z_pred.shape[0]
    if K < 1:
        raise ConfigError(f"dynamics window K must be at least 1, got {K}")
    if K >= frames:
        raise KTooLarge(f"K={K} needs more than {frames} latent frames")
    entries = int(np.prod(z_pred.shape[1:], dtype=np.int64))
    diff = z_pred - z_true
    loss = 0.0
    grad = np.zeros_like(z_pred)
    for j in range(1, K + 1):
        d = diff[j:] - diff[:-j]
        scale = 1.0 / ((frames - j) * entries)
        loss += float(np.sum(d ** 2)) * scale
        g = 2.0 * scale * d
        grad[j:] += g
        grad[:-j] -= g
    return loss, grad


def flow_lambda(epoch: int, weights: LossWeights) -> float:
    """Flow weight gated off during the first ``e_switch`` epochs."""
    return 0.0 if epoch < weights.e_switch else weights.lambda_flow_star


def total_loss(parts: Union[LossParts, Mapping[str, float]], weights: LossWeights, epoch: int) -> float:
    """
    diff + lambda_dyn dyn + flow_lambda(epoch) flow.

    Raises:
        NonFiniteLoss: A part is NaN or infinite
    """
    if not isinstance(parts, LossParts):
        parts = LossParts(**parts)
    values = (parts.diff, parts.dyn, parts.flow)
    if not all(np.isfinite(v) for v in values):
        raise NonFiniteLoss(epoch=epoch, detail=f"(diff={parts.diff}, dyn={parts.dyn}, flow={parts.flow})")
    gate = flow_lambda(epoch, weights)
    total = parts.diff + weights.lambda_dyn * parts.dyn
    if gate:
        total += gate * parts.flow
    return total
