"""
Evaluation report writers.

Quality tables keep the column order PSNR, SSIM, LPIPS, FVD, Mask-IoU.
LPIPS and FVD need pretrained networks and are reported as
"n/a (out of scope)". An infinite PSNR is written as the string "inf".
"""

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Union

import pandas as pd

from ..render.frames import MaskVideo, RgbVideo
from .image_quality import mask_iou, mean_frame_mask_iou, psnr, ssim
from .ranking import SuccessTable, ranking_summary

NOT_AVAILABLE = "n/a (out of scope)"
QUALITY_COLUMNS = ["name", "PSNR", "SSIM", "LPIPS", "FVD", "Mask-IoU"]


@dataclass
class QualityRow:
    """Quality metrics of one predicted video against its ground truth."""

    name: str
    psnr: float
    ssim: float
    mask_iou: float
    frame_mask_iou: Optional[float] = None

    def __post_init__(self):
        self.psnr = float(self.psnr)
        self.ssim = float(self.ssim)
        self.mask_iou = float(self.mask_iou)
        if self.frame_mask_iou is not None:
            self.frame_mask_iou = float(self.frame_mask_iou)

    def as_record(self) -> dict:
        return {
            "name": self.name,
            "PSNR": format_psnr(self.psnr),
            "SSIM": self.ssim,
            "LPIPS": NOT_AVAILABLE,
            "FVD": NOT_AVAILABLE,
            "Mask-IoU": self.mask_iou,
        }


def format_psnr(value: float) -> Union[str, float]:
    return "inf" if math.isinf(value) else value


def quality_row(name: str, pred: RgbVideo, truth: RgbVideo, masks: MaskVideo) -> QualityRow:
    """PSNR and SSIM of ``pred`` against ``truth``, Mask-IoU against ``masks``."""
    return QualityRow(
        name=name,
        psnr=psnr(pred, truth),
        ssim=ssim(pred, truth),
        mask_iou=mask_iou(pred, masks),
        frame_mask_iou=mean_frame_mask_iou(pred, masks),
    )


def quality_frame(rows: Iterable[QualityRow]) -> pd.DataFrame:
    """Report table; a trailing "mean" row averages the finite values."""
    rows = list(rows)
    frame = pd.DataFrame([r.as_record() for r in rows], columns=QUALITY_COLUMNS)
    if len(rows) > 1:
        finite = [r.psnr for r in rows if not math.isinf(r.psnr)]
        mean = {
            "name": "mean",
            "PSNR": sum(finite) / len(finite) if finite else "inf",
            "SSIM": sum(r.ssim for r in rows) / len(rows),
            "LPIPS": NOT_AVAILABLE,
            "FVD": NOT_AVAILABLE,
            "Mask-IoU": sum(r.mask_iou for r in rows) / len(rows),
        }
        frame = pd.concat([frame, pd.DataFrame([mean], columns=QUALITY_COLUMNS)], ignore_index=True)
    return frame


def _cell(value) -> str:
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


def markdown_table(frame: pd.DataFrame) -> str:
    header = "| " + " | ".join(frame.columns) + " |"
    rule = "| " + " | ".join("---" for _ in frame.columns) + " |"
    body = ["| " + " | ".join(_cell(v) for v in row) + " |" for row in frame.itertuples(index=False)]
    return "\n".join([header, rule, *body]) + "\n"


def write_quality_report(
    rows: Iterable[QualityRow],
    csv_path: Union[str, Path],
    markdown_path: Optional[Union[str, Path]] = None,
) -> pd.DataFrame:
    frame = quality_frame(rows)
    frame.to_csv(csv_path, index=False)
    if markdown_path is not None:
        Path(markdown_path).write_text(markdown_table(frame), encoding="utf-8")
    return frame


def write_success_report(
    table: SuccessTable,
    csv_path: Union[str, Path],
    markdown_path: Optional[Union[str, Path]] = None,
) -> dict:
    """Success table as CSV plus MMRV and Pearson r; returns the summary."""
    summary = ranking_summary(table)
    table.write_csv(csv_path)
    if markdown_path is not None:
        lines: List[str] = [
            markdown_table(table.to_frame()),
            f"MMRV: {summary['mmrv']:.4f}",
            f"Pearson r: {summary['pearson_r']:.4f}",
            "",
        ]
        Path(markdown_path).write_text("\n".join(lines), encoding="utf-8")
    return summary

