"""Classifier score fusion and TP/FP crop manifests for classifier training."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, replace
from enum import Enum
from typing import Sequence

from .core import Box, Detection, GroundTruthBox, ImageDims, ValidationError, expand_box, iou


class CropLabel(str, Enum):
    DRONE = "drone"
    NOT_DRONE = "not_drone"


@dataclass(frozen=True)
class FusionConfig:
    match_iou: float = 0.3
    crop_margin: float = 10.0

    def __post_init__(self) -> None:
        problems = []
        if not 0.0 < self.match_iou < 1.0:
            problems.append(f"match_iou must be in (0, 1), got {self.match_iou}")
        if not math.isfinite(self.crop_margin) or self.crop_margin < 0:
            problems.append(f"crop_margin must be finite and non-negative, got {self.crop_margin}")
        if problems:
            raise ValidationError("; ".join(problems))


@dataclass(frozen=True)
class CropManifestEntry:
    frame: int
    crop: Box
    label: CropLabel
    source_conf: float


def fuse_confidence(c: float, cl: float) -> float:
    """Geometric mean of detector and classifier confidence."""
    for name, v in (("conf", c), ("cls_conf", cl)):
        if not (isinstance(v, (int, float)) and math.isfinite(v) and 0.0 <= v <= 1.0):
            raise ValidationError(f"{name} must be a finite number in [0, 1], got {v!r}")
    return min(max(math.sqrt(c * cl), 0.0), 1.0)


def fuse_detections(dets: Sequence[Detection]) -> list[Detection]:
    return [d if d.cls_conf is None else replace(d, conf=fuse_confidence(d.conf, d.cls_conf)) for d in dets]


def label_tp_fp(preds: Sequence[Detection], gts: Sequence[GroundTruthBox], match_iou: float = 0.3) -> list[bool]:
    """True (TP) where a prediction's best IOU against same-frame ground truth reaches ``match_iou``.

    Several predictions may match the same ground-truth box.
    """
    by_frame: dict[int, list[Box]] = defaultdict(list)
    for g in gts:
        by_frame[g.frame].append(g.box)
    return [max((iou(p.box, g) for g in by_frame.get(p.frame, ())), default=0.0) >= match_iou for p in preds]


def build_crop_manifest(
    preds: Sequence[Detection],
    labels: Sequence[bool],
    dims: ImageDims,
    cfg: FusionConfig = FusionConfig(),
) -> list[CropManifestEntry]:
    if len(preds) != len(labels):
        raise ValidationError(f"got {len(preds)} predictions but {len(labels)} labels")
    return [
        CropManifestEntry(
            frame=p.frame,
            crop=expand_box(p.box, cfg.crop_margin, dims),
            label=CropLabel.DRONE if tp else CropLabel.NOT_DRONE,
            source_conf=p.conf,
        )
        for p, tp in zip(preds, labels)
    ]
