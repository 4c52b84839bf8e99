"""Segmentation metrics: per-class IoU from pixel confusion counts."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError

__all__ = ["IoUBreakdown", "iou"]


@dataclass(frozen=True)
class IoUBreakdown:
    per_class: list[float | None]  # None marks a class absent from pred and gt
    miou: float
    tp: list[int]
    fp: list[int]
    fn: list[int]


def iou(pred: np.ndarray, gt: np.ndarray, n_classes: int = 2) -> IoUBreakdown:
    """Pixel-exact intersection-over-union per class and their mean.

    A class with no pixels in either mask (TP+FP+FN = 0) is excluded from
    the mean rather than scored 0 or 1.
    """
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise ShapeError(f"mask shapes differ: {pred.shape} vs {gt.shape}")
    per_class: list[float | None] = []
    tps: list[int] = []
    fps: list[int] = []
    fns: list[int] = []
    present: list[float] = []
    for cls in range(n_classes):
        p = pred == cls
        g = gt == cls
        tp = int(np.count_nonzero(p & g))
        fp = int(np.count_nonzero(p & ~g))
        fn = int(np.count_nonzero(~p & g))
        tps.append(tp)
        fps.append(fp)
        fns.append(fn)
        denom = tp + fp + fn
        if denom == 0:
            per_class.append(None)
        else:
            value = tp / denom
            per_class.append(value)
            present.append(value)
    miou = float(np.mean(present)) if present else 0.0
    return IoUBreakdown(per_class=per_class, miou=miou, tp=tps, fp=fps, fn=fns)
