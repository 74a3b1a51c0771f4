"""
Fixed linear latent codec.

Frames are grouped in time (the first frame alone, then groups of four)
and cut into 8x8 spatial blocks. Each group-block is projected onto 16
orthonormal basis vectors: the temporal mean direction times separable
DCT-II patterns times colour directions (ten luminance patterns, three
for each chroma axis). Decoding is the transpose map, so
``encode(decode(z)) == z`` and ``decode(encode(v))`` is the orthogonal
projection of ``v`` onto the retained subspace.

Pixels are mapped to the signed domain ``(p - 127.5) / 127.5`` before the
linear map, so ``decode(0)`` is the mid-grey video.
"""

from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Tuple, Union

import numpy as np
from scipy.fft import dct

from ..render.frames import MaskVideo, RgbVideo
from ..utils.errors import ShapeError

BLOCK = 8
GROUP = 4
CHANNELS = 16
PIXEL_OFFSET = 127.5
PIXEL_SCALE = 127.5
LATENT_VERSION = 1

# (colour axis, number of lowest-order DCT patterns)
_ALLOCATION = ((0, 10), (1, 3), (2, 3))
_COLOR_AXES = np.array([
    [1.0, 1.0, 1.0],
    [1.0, 0.0, -1.0],
    [1.0, -2.0, 1.0],
])
_COLOR_AXES = _COLOR_AXES / np.linalg.norm(_COLOR_AXES, axis=1, keepdims=True)

PROVENANCES = ("encoded", "predicted")


def _frequency_order(count: int):
    """Lowest-order (kx, ky) pairs, by total order then by ky."""
    pairs = [(s - ky, ky) for s in range(2 * BLOCK) for ky in range(s + 1) if s - ky < BLOCK and ky < BLOCK]
    return pairs[:count]


@lru_cache(maxsize=1)
def codec_basis() -> np.ndarray:
    """(16, 8, 8, 3) orthonormal spatial-colour basis, indexed (k, y, x, c)."""
    rows = dct(np.eye(BLOCK), norm="ortho", axis=0)
    basis = []
    for axis, count in _ALLOCATION:
        for kx, ky in _frequency_order(count):
            pattern = np.outer(rows[ky], rows[kx])
            basis.append(pattern[:, :, None] * _COLOR_AXES[axis][None, None, :])
    basis = np.stack(basis)
    basis.setflags(write=False)
    return basis


def latent_length(frames: int) -> int:
    return 1 + (frames - 1) // GROUP


def video_length(latent_frames: int) -> int:
    return 1 + GROUP * (latent_frames - 1)


def check_video_shape(frames: int, height: int, width: int) -> None:
    if height % BLOCK or width % BLOCK:
        raise ShapeError(f"frame size {height}x{width} is not divisible by {BLOCK}")
    if frames < 1 or (frames - 1) % GROUP:
        raise ShapeError(f"video length {frames} does not satisfy T = 1 (mod {GROUP})")


def latent_shape(frames: int, height: int, width: int) -> Tuple[int, int, int, int]:
    check_video_shape(frames, height, width)
    return latent_length(frames), height // BLOCK, width // BLOCK, CHANNELS


def _groups(frames: int):
    yield slice(0, 1)
    for start in range(1, frames, GROUP):
        yield slice(start, start + GROUP)


@dataclass(frozen=True, eq=False)
class LatentVideo:
    """T_l x H_l x W_l x C latent tensor."""

    data: np.ndarray
    provenance: str = "encoded"

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 4 or data.shape[-1] != CHANNELS:
            raise ShapeError(f"latent video must be (T, H, W, {CHANNELS}), got {data.shape}")
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown latent provenance '{self.provenance}'")
        object.__setattr__(self, "data", data)

    @property
    def shape(self) -> Tuple[int, int, int, int]:
        return self.data.shape

    def __len__(self) -> int:
        return self.data.shape[0]


def analysis(signed: np.ndarray) -> np.ndarray:
    """Linear part of the encoder on a (T, H, W, 3) signed array."""
    signed = np.asarray(signed, dtype=float)
    if signed.ndim != 4 or signed.shape[-1] != 3:
        raise ShapeError(f"expected a (T, H, W, 3) array, got {signed.shape}")
    frames, height, width, _ = signed.shape
    check_video_shape(frames, height, width)
    blocks = signed.reshape(frames, height // BLOCK, BLOCK, width // BLOCK, BLOCK, 3)
    basis = codec_basis()
    latents = []
    for group in _groups(frames):
        stacked = blocks[group]
        pooled = stacked.sum(axis=0) / np.sqrt(stacked.shape[0])
        latents.append(np.einsum("yaxbc,kabc->yxk", pooled, basis))
    return np.stack(latents)


def synthesis(latent: np.ndarray) -> np.ndarray:
    """Transpose of :func:`analysis`: (T_l, H_l, W_l, C) to signed (T, H, W, 3)."""
    latent = np.asarray(latent, dtype=float)
    if latent.ndim != 4 or latent.shape[-1] != CHANNELS:
        raise ShapeError(f"latent video must be (T, H, W, {CHANNELS}), got {latent.shape}")
    t_l, h_l, w_l, _ = latent.shape
    basis = codec_basis()
    frames = []
    for t in range(t_l):
        size = 1 if t == 0 else GROUP
        block = np.einsum("yxk,kabc->yaxbc", latent[t], basis) / np.sqrt(size)
        frame = block.reshape(h_l * BLOCK, w_l * BLOCK, 3)
        frames.extend([frame] * size)
    return np.stack(frames)


def _as_pixels(video) -> np.ndarray:
    if isinstance(video, MaskVideo):
        video = video.to_rgb()
    if isinstance(video, RgbVideo):
        return video.as_float()
    pixels = np.asarray(video, dtype=float)
    if pixels.ndim == 3:
        pixels = pixels[None]
    return pixels


def encode(video: Union[RgbVideo, MaskVideo, np.ndarray]) -> LatentVideo:
    """
    Encode an RGB or mask video; masks are lifted to three channels first.

    Raises:
        ShapeError: Frame size not divisible by 8 or T not 1 (mod 4)
    """
    pixels = _as_pixels(video)
    return LatentVideo(analysis((pixels - PIXEL_OFFSET) / PIXEL_SCALE))


def decode_pixels(z: Union[LatentVideo, np.ndarray]) -> np.ndarray:
    """Float pixel values, unclamped."""
    data = z.data if isinstance(z, LatentVideo) else z
    return synthesis(data) * PIXEL_SCALE + PIXEL_OFFSET


def decode(z: Union[LatentVideo, np.ndarray]) -> RgbVideo:
    """Decoded video; pixels stay unclamped floats until written."""
    return RgbVideo(decode_pixels(z))


def pixel_adjoint(grad_pixels: np.ndarray) -> np.ndarray:
    """Pull a gradient on decoded pixels back to the latent."""
    return PIXEL_SCALE * analysis(grad_pixels)


def write_latent(path: Union[str, Path], z: LatentVideo) -> None:
    header = np.array([LATENT_VERSION, *z.shape], dtype="<u4")
    Path(path).write_bytes(header.tobytes() + z.data.astype("<f4").tobytes())


def read_latent(path: Union[str, Path]) -> LatentVideo:
    data = Path(path).read_bytes()
    if len(data) < 20:
        raise ShapeError(f"{path}: truncated latent header")
    version, t_l, h_l, w_l, channels = np.frombuffer(data[:20], dtype="<u4")
    if version != LATENT_VERSION:
        raise ShapeError(f"{path}: unsupported latent version {version}")
    payload = np.frombuffer(data[20:], dtype="<f4")
    if payload.size != t_l * h_l * w_l * channels:
        raise ShapeError(f"{path}: payload holds {payload.size} values, header says {t_l}x{h_l}x{w_l}x{channels}")
    return LatentVideo(payload.reshape(t_l, h_l, w_l, channels).astype(float))
