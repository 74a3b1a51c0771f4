"""
Image quality and policy-ranking metrics plus report writers.
"""

from .image_quality import psnr, ssim, mask_iou, per_frame_mask_iou, mean_frame_mask_iou, grayscale
from .ranking import SuccessTable, mmrv, pearson_r, rank_violations, ranking_summary, success_rates
from .reports import (
    NOT_AVAILABLE, QualityRow, quality_row, quality_frame, markdown_table,
    write_quality_report, write_success_report,
)

__all__ = [
    'psnr', 'ssim', 'mask_iou', 'per_frame_mask_iou', 'mean_frame_mask_iou', 'grayscale',
    'SuccessTable', 'mmrv', 'pearson_r', 'rank_violations', 'ranking_summary', 'success_rates',
    'NOT_AVAILABLE', 'QualityRow', 'quality_row', 'quality_frame', 'markdown_table',
    'write_quality_report', 'write_success_report',
]
