"""
Frozen dense flow estimator and the flow loss built on it.

Flow is estimated by coarse-to-fine block matching on greyscale frames:
8x8 blocks, a +-4 pixel search window per pyramid level around twice the
coarser estimate (plus the zero displacement), sum-of-absolute-differences
cost and ties broken toward the smallest displacement. Displacements are
whole pixels and are shared by all pixels of a block.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Tuple, Union

import numpy as np

from ..render.frames import RgbVideo
from ..utils.errors import ShapeError

BLOCK = 8
SEARCH_RADIUS = 4
LEVELS = 3
EPS_MOTION = 0.5
HUBER_DELTA = 1.0
FLOW_VERSION = 1

_LUMA = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True, eq=False)
class FlowField:
    """(T-1) x H x W x 2 displacements (dx, dy) in pixels per frame."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 4 or data.shape[-1] != 2:
            raise ShapeError(f"flow field must be (T-1, H, W, 2), got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ShapeError("flow field contains non-finite values")
        object.__setattr__(self, "data", data)

    def __len__(self) -> int:
        return self.data.shape[0]

    @property
    def magnitude(self) -> np.ndarray:
        return np.linalg.norm(self.data, axis=-1)


def max_displacement(levels: int = LEVELS, radius: int = SEARCH_RADIUS) -> int:
    """Largest displacement reachable through ``levels`` pyramid levels."""
    return radius * (2 ** levels - 1)


def _gray(video: RgbVideo) -> np.ndarray:
    return video.as_float() @ _LUMA


def _downsample(frame: np.ndarray) -> np.ndarray:
    h, w = frame.shape
    return frame.reshape(h // 2, 2, w // 2, 2).mean(axis=(1, 3))


def _pyramid_levels(height: int, width: int, levels: int) -> int:
    usable = 1
    while usable < levels:
        scale = 2 ** usable
        if height % (BLOCK * scale) or width % (BLOCK * scale):
            break
        usable += 1
    return usable


def _match(
    current: np.ndarray,
    following: np.ndarray,
    prediction: np.ndarray,
    radius: int,
    pad: int,
) -> np.ndarray:
    """Best per-block displacement (dx, dy) of ``current`` blocks into ``following``."""
    nby, nbx = prediction.shape[:2]
    padded = np.pad(following, pad, mode="edge")
    blocks = current.reshape(nby, BLOCK, nbx, BLOCK).transpose(0, 2, 1, 3)
    base_y = (np.arange(nby) * BLOCK)[:, None, None, None] + np.arange(BLOCK)[None, None, :, None]
    base_x = (np.arange(nbx) * BLOCK)[None, :, None, None] + np.arange(BLOCK)[None, None, None, :]

    offsets = [(dx, dy) for dy in range(-radius, radius + 1) for dx in range(-radius, radius + 1)]
    candidates = [prediction + np.array(o) for o in offsets]
    candidates.append(np.zeros_like(prediction))
    candidates = np.clip(np.stack(candidates), -pad, pad)

    costs = np.empty(candidates.shape[:3])
    for i, disp in enumerate(candidates):
        ys = base_y + disp[:, :, 1][:, :, None, None] + pad
        xs = base_x + disp[:, :, 0][:, :, None, None] + pad
        costs[i] = np.abs(padded[ys, xs] - blocks).sum(axis=(2, 3))

    n = candidates.shape[0]
    dx = candidates[..., 0].reshape(n, -1).T
    dy = candidates[..., 1].reshape(n, -1).T
    cost = costs.reshape(n, -1).T
    order = np.lexsort((dx, dy, dx ** 2 + dy ** 2, cost), axis=-1)
    best = order[:, 0]
    rows = np.arange(best.size)
    return np.stack([dx[rows, best], dy[rows, best]], axis=-1).reshape(nby, nbx, 2)


def _pair_flow(current: np.ndarray, following: np.ndarray, levels: int, radius: int) -> np.ndarray:
    pad = max_displacement(levels, radius)
    pyramid = [(current, following)]
    for _ in range(levels - 1):
        a, b = pyramid[-1]
        pyramid.append((_downsample(a), _downsample(b)))

    prediction = None
    for a, b in reversed(pyramid):
        nby, nbx = a.shape[0] // BLOCK, a.shape[1] // BLOCK
        if prediction is None:
            prediction = np.zeros((nby, nbx, 2), dtype=np.int64)
        else:
            prediction = 2 * np.repeat(np.repeat(prediction, 2, axis=0), 2, axis=1)[:nby, :nbx]
        prediction = _match(a, b, prediction, radius, pad)
    return np.repeat(np.repeat(prediction, BLOCK, axis=0), BLOCK, axis=1).astype(float)


def estimate_flow(video: RgbVideo, levels: int = LEVELS, radius: int = SEARCH_RADIUS) -> FlowField:
    """
    Dense flow between every consecutive frame pair.

    Raises:
        ShapeError: Fewer than two frames or a frame size not divisible by 8
    """
    if not isinstance(video, RgbVideo):
        video = RgbVideo(video)
    frames, height, width = video.pixels.shape[:3]
    if frames < 2:
        raise ShapeError(f"flow needs at least two frames, got {frames}")
    if height % BLOCK or width % BLOCK:
        raise ShapeError(f"frame size {height}x{width} is not divisible by {BLOCK}")
    usable = _pyramid_levels(height, width, levels)
    gray = _gray(video)
    fields = [_pair_flow(gray[t], gray[t + 1], usable, radius) for t in range(frames - 1)]
    return FlowField(np.stack(fields))


def huber(x: np.ndarray, delta: float = HUBER_DELTA) -> np.ndarray:
    a = np.abs(x)
    return np.where(a <= delta, 0.5 * x ** 2, delta * (a - 0.5 * delta))


def huber_grad(x: np.ndarray, delta: float = HUBER_DELTA) -> np.ndarray:
    return np.clip(x, -delta, delta)


def motion_region(flow: FlowField, eps_motion: float = EPS_MOTION) -> np.ndarray:
    return flow.magnitude > eps_motion


def flow_discrepancy(
    predicted: FlowField,
    true: FlowField,
    eps_motion: float = EPS_MOTION,
    delta: float = HUBER_DELTA,
) -> float:
    """Mean over the true motion region of (1 - cos angle) + Huber(|f_pred| - |f_true|)."""
    if predicted.data.shape != true.data.shape:
        raise ShapeError(f"flow shapes differ: {predicted.data.shape} vs {true.data.shape}")
    region = motion_region(true, eps_motion)
    if not region.any():
        return 0.0
    f_hat = predicted.data[region]
    f = true.data[region]
    sq_hat = np.sum(f_hat ** 2, axis=-1)
    sq = np.sum(f ** 2, axis=-1)
    n_hat, n = np.sqrt(sq_hat), np.sqrt(sq)
    moving = sq_hat > 0
    cos = np.zeros_like(n)
    cos[moving] = np.sum(f_hat[moving] * f[moving], axis=-1) / np.sqrt(sq_hat[moving] * sq[moving])
    return float(np.mean((1.0 - cos) + huber(n_hat - n, delta)))


def photometric_surrogate(
    pixels: np.ndarray,
    true: FlowField,
    eps_motion: float = EPS_MOTION,
    delta: float = HUBER_DELTA,
) -> Tuple[float, np.ndarray]:
    """
    Huber photometric residual of ``pixels`` warped along the true flow.

    Only the true motion region contributes. Returns the value and its
    gradient with respect to ``pixels`` (same shape), which stands in for
    the gradient of the flow loss.
    """
    pixels = np.asarray(pixels, dtype=float)
    grad = np.zeros_like(pixels)
    region = motion_region(true, eps_motion)
    count = int(region.sum()) * pixels.shape[-1]
    if count == 0:
        return 0.0, grad
    height, width = pixels.shape[1:3]
    total = 0.0
    for t in range(len(true)):
        ys, xs = np.nonzero(region[t])
        if ys.size == 0:
            continue
        flow = true.data[t][ys, xs]
        ty = np.clip(ys + flow[:, 1].astype(np.int64), 0, height - 1)
        tx = np.clip(xs + flow[:, 0].astype(np.int64), 0, width - 1)
        residual = pixels[t + 1][ty, tx] - pixels[t][ys, xs]
        total += float(huber(residual, delta).sum())
        g = huber_grad(residual, delta) / count
        np.add.at(grad[t + 1], (ty, tx), g)
        np.add.at(grad[t], (ys, xs), -g)
    return total / count, grad


def flow_loss(
    video_pred: RgbVideo,
    video_true: RgbVideo,
    eps_motion: float = EPS_MOTION,
    delta: float = HUBER_DELTA,
    true_flow: FlowField = None,
) -> float:
    """
    Direction plus magnitude discrepancy between estimated flows.

    Raises:
        ShapeError: Videos differ in shape
    """
    if video_pred.pixels.shape != video_true.pixels.shape:
        raise ShapeError(f"video shapes differ: {video_pred.pixels.shape} vs {video_true.pixels.shape}")
    true_flow = true_flow if true_flow is not None else estimate_flow(video_true)
    if not motion_region(true_flow, eps_motion).any():
        return 0.0
    return flow_discrepancy(estimate_flow(video_pred), true_flow, eps_motion, delta)


def flow_loss_and_grad(
    video_pred: RgbVideo,
    video_true: RgbVideo,
    eps_motion: float = EPS_MOTION,
    delta: float = HUBER_DELTA,
    true_flow: FlowField = None,
) -> Tuple[float, np.ndarray]:
    """Flow loss value with the warped photometric gradient on predicted pixels."""
    true_flow = true_flow if true_flow is not None else estimate_flow(video_true)
    value = flow_loss(video_pred, video_true, eps_motion, delta, true_flow)
    _, grad = photometric_surrogate(video_pred.as_float(), true_flow, eps_motion, delta)
    return value, grad


def write_flow(path: Union[str, Path], flow: FlowField) -> None:
    header = np.array([FLOW_VERSION, *flow.data.shape[:3]], dtype="<u4")
    Path(path).write_bytes(header.tobytes() + flow.data.astype("<f4").tobytes())


def read_flow(path: Union[str, Path]) -> FlowField:
    data = Path(path).read_bytes()
    if len(data) < 16:
        raise ShapeError(f"{path}: truncated flow header")
    version, pairs, height, width = np.frombuffer(data[:16], dtype="<u4")
    if version != FLOW_VERSION:
        raise ShapeError(f"{path}: unsupported flow version {version}")
    payload = np.frombuffer(data[16:], dtype="<f4")
    if payload.size != pairs * height * width * 2:
        raise ShapeError(f"{path}: payload size does not match header")
    return FlowField(payload.reshape(pairs, height, width, 2).astype(float))
