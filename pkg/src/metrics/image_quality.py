"""
Video quality metrics: PSNR, SSIM and embodiment Mask-IoU.

Frames are compared in pixel units (0-255). Predicted embodiment regions
are extracted by colour-keying the reserved arm colour.
"""

from typing import List, Union

import numpy as np
from skimage.metrics import structural_similarity

from ..render.frames import MaskVideo, RgbVideo
from ..render.scene import ARM_COLOR, color_key_mask
from ..utils.errors import ShapeError

PEAK = 255.0
SSIM_SIGMA = 1.5
LUMA = np.array([0.299, 0.587, 0.114])

Pixels = Union[np.ndarray, RgbVideo]


def _pixels(x: Pixels) -> np.ndarray:
    data = x.pixels if isinstance(x, RgbVideo) else np.asarray(x)
    return data.astype(float)


def _pair(a: Pixels, b: Pixels):
    a, b = _pixels(a), _pixels(b)
    if a.shape != b.shape:
        raise ShapeError(f"cannot compare shapes {a.shape} and {b.shape}")
    return a, b


def psnr(a: Pixels, b: Pixels) -> float:
    """
    Peak signal-to-noise ratio in dB.

    Returns:
        ``inf`` for identical inputs

    Raises:
        ShapeError: Shapes differ
    """
    a, b = _pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return float("inf")
    return float(10.0 * np.log10(PEAK**2 / mse))


def grayscale(pixels: np.ndarray) -> np.ndarray:
    return np.asarray(pixels, dtype=float) @ LUMA


def ssim(a: Pixels, b: Pixels) -> float:
    """
    Single-scale SSIM on grayscale, 11x11 Gaussian window (sigma 1.5),
    averaged over frames.

    Raises:
        ShapeError: Shapes differ
    """
    a, b = _pair(a, b)
    ga, gb = grayscale(a), grayscale(b)
    if ga.ndim == 2:
        ga, gb = ga[None], gb[None]
    scores = [
        structural_similarity(
            x, y,
            data_range=PEAK,
            gaussian_weights=True,
            sigma=SSIM_SIGMA,
            use_sample_covariance=False,
        )
        for x, y in zip(ga, gb)
    ]
    return float(np.mean(scores))


def _mask_pair(pred_video: Pixels, true_masks: Union[np.ndarray, MaskVideo]):
    pred = color_key_mask(_pixels(pred_video), ARM_COLOR)
    truth = true_masks.bits if isinstance(true_masks, MaskVideo) else np.asarray(true_masks, dtype=bool)
    if pred.ndim == 2:
        pred = pred[None]
    if truth.ndim == 2:
        truth = truth[None]
    if pred.shape != truth.shape:
        raise ShapeError(f"predicted video {pred.shape} and masks {truth.shape} differ")
    return pred, truth


def mask_iou(pred_video: Pixels, true_masks: Union[np.ndarray, MaskVideo]) -> float:
    """
    Pooled Mask-IoU: total intersection over total union across frames.

    Frames where both regions are empty contribute nothing; if every frame
    is empty the result is 1.0.
    """
    pred, truth = _mask_pair(pred_video, true_masks)
    union = int(np.logical_or(pred, truth).sum())
    if union == 0:
        return 1.0
    return float(np.logical_and(pred, truth).sum() / union)


def per_frame_mask_iou(pred_video: Pixels, true_masks: Union[np.ndarray, MaskVideo]) -> List[float]:
    """IoU of every frame; NaN where both regions are empty."""
    pred, truth = _mask_pair(pred_video, true_masks)
    scores = []
    for p, t in zip(pred, truth):
        union = int(np.logical_or(p, t).sum())
        scores.append(float(np.logical_and(p, t).sum() / union) if union else float("nan"))
    return scores


def mean_frame_mask_iou(pred_video: Pixels, true_masks: Union[np.ndarray, MaskVideo]) -> float:
    scores = np.array(per_frame_mask_iou(pred_video, true_masks))
    valid = scores[~np.isnan(scores)]
    return float(valid.mean()) if valid.size else 1.0
