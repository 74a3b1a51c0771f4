"""
Latent velocity predictor with a zero-initialized control branch.

Every latent cell is processed as a sequence over latent time. The base
branch sees the noisy latent, the clean first-frame latent and the noise
level; the control branch sees the conditioning signal (mask latents or
flattened action coordinates) and enters every base block through a fuse
projection whose weights start at exactly zero, so a freshly initialized
predictor ignores the conditioning bit for bit.
"""

from pathlib import Path
from typing import List, Optional, Union

import numpy as np
import torch
from torch import nn

from ..utils.errors import ConfigError, ShapeError
from ..utils.seeding import seed_torch
from .codec import CHANNELS, GROUP, LatentVideo

PARAMS_VERSION = 1
CONDITIONINGS = ("mask", "coords", "none")


class TemporalBlock(nn.Module):
    """Depthwise temporal convolution followed by a residual MLP."""

    def __init__(self, hidden: int):
        super().__init__()
        self.mix = nn.Conv1d(hidden, hidden, kernel_size=3, padding=1, groups=hidden)
        self.inner = nn.Linear(hidden, hidden)
        self.outer = nn.Linear(hidden, hidden)

    def forward(self, h: torch.Tensor) -> torch.Tensor:
        # h: (cells, time, hidden)
        mixed = self.mix(h.transpose(1, 2)).transpose(1, 2)
        return h + self.outer(torch.tanh(self.inner(mixed)))


class LatentPredictor(nn.Module):
    """
    Velocity predictor over (T_l, H_l, W_l, C) latents.

    Args:
        blocks: Number of residual blocks per branch
        hidden: Hidden width
        channels: Latent channels
        conditioning: ``"mask"``, ``"coords"`` or ``"none"`` (no control branch)
        action_dim: Width of one action row (``"coords"`` only)
    """

    def __init__(
        self,
        blocks: int = 4,
        hidden: int = 32,
        channels: int = CHANNELS,
        conditioning: str = "mask",
        action_dim: int = 7,
        video_length: int = 0,
    ):
        super().__init__()
        if conditioning not in CONDITIONINGS:
            raise ConfigError(f"conditioning must be one of {CONDITIONINGS}, got '{conditioning}'")
        if blocks < 1 or hidden < 1:
            raise ConfigError(f"predictor needs blocks >= 1 and hidden >= 1, got {blocks}, {hidden}")
        self.blocks = blocks
        self.hidden = hidden
        self.channels = channels
        self.conditioning = conditioning
        self.action_dim = action_dim
        self.video_length = video_length

        self.embed = nn.Linear(2 * channels + 2, hidden)
        self.base = nn.ModuleList([TemporalBlock(hidden) for _ in range(blocks)])
        self.head = nn.Linear(hidden, channels)

        if conditioning != "none":
            width = channels if conditioning == "mask" else GROUP * action_dim
            self.control_embed = nn.Linear(width, hidden)
            self.control = nn.ModuleList([TemporalBlock(hidden) for _ in range(blocks)])
            self.fuse = nn.ModuleList([nn.Linear(hidden, hidden) for _ in range(blocks)])
            for layer in self.fuse:
                nn.init.zeros_(layer.weight)
                nn.init.zeros_(layer.bias)

    @property
    def has_control(self) -> bool:
        return self.conditioning != "none"

    def forward(
        self,
        z_noisy: torch.Tensor,
        z_init: torch.Tensor,
        alpha: float,
        condition: Optional[torch.Tensor] = None,
    ) -> torch.Tensor:
        """
        Args:
            z_noisy: (T_l, H_l, W_l, C) noisy latent
            z_init: (1, H_l, W_l, C) clean first-frame latent
            alpha: Noise-schedule coefficient
            condition: (T_l, H_l, W_l, C) mask latent, or (T_l, 4 * action_dim)
                action features

        Returns:
            (T_l, H_l, W_l, C) velocity prediction
        """
        frames, height, width, channels = z_noisy.shape
        if channels != self.channels or z_init.shape[1:] != z_noisy.shape[1:]:
            raise ShapeError(f"latent shapes {tuple(z_noisy.shape)} and {tuple(z_init.shape)} do not match the predictor")
        cells = height * width
        x = z_noisy.permute(1, 2, 0, 3).reshape(cells, frames, channels)
        init = z_init[0].reshape(cells, 1, channels).expand(cells, frames, channels)
        noise = torch.tensor([np.sqrt(alpha), np.sqrt(1.0 - alpha)], dtype=x.dtype).expand(cells, frames, 2)
        h = self.embed(torch.cat([x, init, noise], dim=-1))

        c = self._control_input(condition, frames, height, width) if self.has_control else None
        for n, block in enumerate(self.base):
            h = block(h)
            if c is not None:
                c = self.control[n](c)
                h = h + self.fuse[n](c)

        v = self.head(h)
        return v.reshape(height, width, frames, channels).permute(2, 0, 1, 3)

    def _control_input(self, condition: Optional[torch.Tensor], frames: int, height: int, width: int) -> torch.Tensor:
        if condition is None:
            raise ShapeError(f"'{self.conditioning}' conditioning needs a condition tensor")
        cells = height * width
        if self.conditioning == "mask":
            if tuple(condition.shape) != (frames, height, width, self.channels):
                raise ShapeError(f"mask latent shape {tuple(condition.shape)} does not match {(frames, height, width, self.channels)}")
            return self.control_embed(condition.permute(1, 2, 0, 3).reshape(cells, frames, self.channels))
        if tuple(condition.shape) != (frames, GROUP * self.action_dim):
            raise ShapeError(f"action features {tuple(condition.shape)} do not match {(frames, GROUP * self.action_dim)}")
        return self.control_embed(condition).unsqueeze(0).expand(cells, frames, self.hidden)


def build_predictor(seed: int = 0, **kwargs) -> LatentPredictor:
    """Float64 predictor initialized from ``seed``."""
    seed_torch(seed)
    model = LatentPredictor(**kwargs).double()
    model.eval()
    return model


def action_features(rows: np.ndarray, latent_frames: int, action_dim: int) -> np.ndarray:
    """
    Per latent frame, the rows of the frames it covers, zero padded.

    Latent frame 0 covers action 0; latent frame l >= 1 covers actions
    ``4l-3 .. 4l``.
    """
    rows = np.asarray(rows, dtype=float).reshape(len(rows), -1)
    if rows.shape[1] != action_dim:
        raise ShapeError(f"action rows have width {rows.shape[1]}, predictor expects {action_dim}")
    features = np.zeros((latent_frames, GROUP * action_dim))
    features[0, :action_dim] = rows[0]
    for t in range(1, latent_frames):
        group = rows[GROUP * t - 3: GROUP * t + 1]
        features[t, :group.size] = group.reshape(-1)
    return features


def predictor_forward(
    model: LatentPredictor,
    z_init: Union[LatentVideo, np.ndarray],
    condition: Optional[Union[LatentVideo, np.ndarray]],
    z_noisy: Union[LatentVideo, np.ndarray],
    alpha_tau: float,
) -> np.ndarray:
    """Numpy convenience wrapper around :meth:`LatentPredictor.forward`."""

    def tensor(x):
        if x is None:
            return None
        data = x.data if isinstance(x, LatentVideo) else np.asarray(x, dtype=float)
        return torch.from_numpy(np.ascontiguousarray(data, dtype=np.float64))

    with torch.no_grad():
        v = model(tensor(z_noisy), tensor(z_init), float(alpha_tau), tensor(condition))
    return v.numpy()


def save_params(path: Union[str, Path], model: LatentPredictor) -> None:
    """Header (version, blocks, hidden, channels, conditioning, action_dim, video_length) then float32 weights."""
    header = np.array(
        [
            PARAMS_VERSION,
            model.blocks,
            model.hidden,
            model.channels,
            CONDITIONINGS.index(model.conditioning),
            model.action_dim,
            model.video_length,
        ],
        dtype="<u4",
    )
    payload = [t.detach().cpu().numpy().astype("<f4").reshape(-1) for t in model.state_dict().values()]
    Path(path).write_bytes(header.tobytes() + np.concatenate(payload).tobytes())


def load_params(path: Union[str, Path]) -> LatentPredictor:
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise RuntimeError(f"Failed to read model parameters {path}: {e}")
    if len(data) < 28:
        raise ShapeError(f"{path}: truncated parameter header")
    version, blocks, hidden, channels, code, action_dim, video_length = (
        int(v) for v in np.frombuffer(data[:28], dtype="<u4")
    )
    if version != PARAMS_VERSION:
        raise ShapeError(f"{path}: unsupported parameter version {version}")
    if code >= len(CONDITIONINGS):
        raise ShapeError(f"{path}: unknown conditioning code {code}")
    model = build_predictor(
        blocks=blocks,
        hidden=hidden,
        channels=channels,
        conditioning=CONDITIONINGS[code],
        action_dim=action_dim,
        video_length=video_length,
    )
    payload = np.frombuffer(data[28:], dtype="<f4")
    state = model.state_dict()
    expected = sum(t.numel() for t in state.values())
    if payload.size != expected:
        raise ShapeError(f"{path}: payload holds {payload.size} values, model needs {expected}")
    offset = 0
    loaded = {}
    for name, tensor in state.items():
        size = tensor.numel()
        loaded[name] = torch.from_numpy(payload[offset:offset + size].astype(np.float64).reshape(tensor.shape))
        offset += size
    model.load_state_dict(loaded)
    return model


def parameter_count(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())


def fuse_parameters(model: LatentPredictor) -> List[torch.Tensor]:
    return list(model.fuse.parameters()) if model.has_control else []
