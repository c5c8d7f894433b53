"""Single-class average precision at a fixed IOU threshold."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .core import Detection, GroundTruthBox, ValidationError, iou


class Interpolation(str, Enum):
    ALL_POINT = "all_point"
    ELEVEN_POINT = "eleven_point"


@dataclass(frozen=True)
class EvalConfig:
    iou_threshold: float = 0.5
    interpolation: Interpolation = Interpolation.ALL_POINT

    def __post_init__(self) -> None:
        object.__setattr__(self, "interpolation", Interpolation(self.interpolation))
        if not 0.0 < self.iou_threshold < 1.0:
            raise ValidationError(f"iou_threshold must be in (0, 1), got {self.iou_threshold}")


@dataclass(frozen=True)
class PRPoint:
    precision: float
    recall: float


def confidence_order(preds: Sequence[Detection]) -> list[int]:
    """Indices by descending confidence; equal confidences keep input order."""
    return sorted(range(len(preds)), key=lambda i: -preds[i].conf)


def match_predictions(
    preds: Sequence[Detection], gts: Sequence[GroundTruthBox], cfg: EvalConfig = EvalConfig()
) -> list[bool]:
    """TP/FP flag per prediction, in input order.

    Predictions are visited by descending confidence and each claims the
    best-overlapping ground-truth box of its frame that is still free.
    """
    by_frame: dict[int, list[int]] = defaultdict(list)
    for k, g in enumerate(gts):
        by_frame[g.frame].append(k)
    taken: set[int] = set()
    flags = [False] * len(preds)
    for i in confidence_order(preds):
        p = preds[i]
        best, best_k = -1.0, -1
        for k in by_frame.get(p.frame, ()):
            if k in taken:
                continue
            overlap = iou(p.box, gts[k].box)
            if overlap > best:
                best, best_k = overlap, k
        if best_k >= 0 and best >= cfg.iou_threshold:
            taken.add(best_k)
            flags[i] = True
    return flags


def pr_curve(flags: Sequence[bool], n_gt: int) -> list[PRPoint]:
    tp = np.cumsum(np.asarray(flags, dtype=float))
    ranks = np.arange(1, len(flags) + 1)
    return [PRPoint(float(t / r), float(t / n_gt)) for t, r in zip(tp, ranks)]


def average_precision(flags: Sequence[bool], n_gt: int, cfg: EvalConfig = EvalConfig()) -> float:
    """AP from TP/FP flags already sorted by descending confidence."""
    if n_gt <= 0:
        raise ValidationError("average precision is undefined without ground truth")
    if sum(bool(f) for f in flags) > n_gt:
        raise ValidationError("more true positives than ground-truth boxes")
    if not flags:
        return 0.0
    points = pr_curve(flags, n_gt)
    recall = np.array([p.recall for p in points])
    precision = np.array([p.precision for p in points])
    envelope = np.maximum.accumulate(precision[::-1])[::-1]

    if cfg.interpolation is Interpolation.ELEVEN_POINT:
        total = 0.0
        for t in np.linspace(0.0, 1.0, 11):
            reach = recall >= t - 1e-12
            total += envelope[reach].max() if reach.any() else 0.0
        return float(total / 11.0)

    prev_recall = np.concatenate(([0.0], recall[:-1]))
    return float(np.sum((recall - prev_recall) * envelope))


def map50(preds: Sequence[Detection], gts: Sequence[GroundTruthBox], cfg: EvalConfig = EvalConfig()) -> float:
    """Single-class mAP, which is just AP over every frame pooled together."""
    if not gts:
        raise ValidationError("mAP is undefined without ground truth")
    flags = match_predictions(preds, gts, cfg)
    return average_precision([flags[i] for i in confidence_order(preds)], len(gts), cfg)
