"""Segmentation quality metrics: per-frame IoU and its aggregate."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fuzzymask import BinaryMask

MODE_LABELS = ("pretrained", "finetuned-binary", "finetuned-fuzzy", "mock")


@dataclass
class EvalRecord:
    class_name: str
    frame_id: str
    iou: float
    inference_time_s: float
    mode: str = "mock"
    flags: list[str] = field(default_factory=list)
    sequence: str = ""


def iou(gt: BinaryMask, pred: BinaryMask) -> float:
    """Intersection over union of two binary masks of equal dimensions.

    Both masks empty counts as perfect (vacuous) agreement; exactly one
    empty scores 0.
    """
    a = np.asarray(gt.bits, dtype=bool)
    b = np.asarray(pred.bits, dtype=bool)
    if a.shape != b.shape:
        raise ValueError(f"mask dimensions differ: {a.shape} vs {b.shape}")
    union = int(np.logical_or(a, b).sum())
    if union == 0:
        return 1.0
    inter = int(np.logical_and(a, b).sum())
    return inter / union


def miou(ious) -> tuple[float, float]:
    """Mean and population standard deviation of IoU values."""
    values = np.asarray([r.iou if isinstance(r, EvalRecord) else r for r in ious],
                        dtype=np.float64)
    if values.size == 0:
        raise ValueError("no records to aggregate")
    return float(values.mean()), float(values.std())
