"""Shared domain types and box geometry.

Boxes use a top-left origin and ``(x, y, w, h)`` in pixels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional


class ValidationError(ValueError):
    """A value violates a documented range or invariant."""


class OrderingError(ValueError):
    """Frames were supplied out of order."""


def _check_unit(name: str, value: float) -> None:
    if not (isinstance(value, (int, float)) and math.isfinite(value) and 0.0 <= value <= 1.0):
        raise ValidationError(f"{name} must be a finite number in [0, 1], got {value!r}")


@dataclass(frozen=True)
class Box:
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self) -> None:
        for name in ("x", "y", "w", "h"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValidationError(f"box {name} must be finite, got {v!r}")
        if self.w < 0 or self.h < 0:
            raise ValidationError(f"box size must be non-negative, got w={self.w}, h={self.h}")

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def center(self) -> tuple[float, float]:
        return self.x + self.w / 2.0, self.y + self.h / 2.0

    @classmethod
    def from_center(cls, cx: float, cy: float, w: float, h: float) -> "Box":
        w, h = max(w, 0.0), max(h, 0.0)
        return cls(cx - w / 2.0, cy - h / 2.0, w, h)

    def as_list(self) -> list[float]:
        return [self.x, self.y, self.w, self.h]


@dataclass(frozen=True)
class Detection:
    """One predicted box in one frame.

    ``conf`` is the detector confidence; ``cls_conf`` the optional score of an
    external drone/not-drone classifier for the same crop.
    """

    frame: int
    box: Box
    conf: float
    cls_conf: Optional[float] = None

    def __post_init__(self) -> None:
        if isinstance(self.frame, bool) or not isinstance(self.frame, int) or self.frame < 0:
            raise ValidationError(f"frame must be a non-negative integer, got {self.frame!r}")
        _check_unit("conf", self.conf)
        if self.cls_conf is not None:
            _check_unit("cls_conf", self.cls_conf)


@dataclass(frozen=True)
class GroundTruthBox:
    frame: int
    box: Box

    def __post_init__(self) -> None:
        if isinstance(self.frame, bool) or not isinstance(self.frame, int) or self.frame < 0:
            raise ValidationError(f"frame must be a non-negative integer, got {self.frame!r}")


@dataclass(frozen=True)
class ImageDims:
    width: int
    height: int

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValidationError(f"image dims must be positive, got {self.width}x{self.height}")


def iou(a: Box, b: Box) -> float:
    """Intersection over union of two boxes; 0 when the union is empty."""
    ix = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    iy = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    inter = max(ix, 0.0) * max(iy, 0.0)
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return min(max(inter / union, 0.0), 1.0)


def expand_box(b: Box, margin: float, dims: ImageDims) -> Box:
    """Grow every edge of ``b`` outward by ``margin`` pixels, clamped to the image."""
    if not math.isfinite(margin) or margin < 0:
        raise ValidationError(f"margin must be finite and non-negative, got {margin!r}")
    # Widths are built from the margin and clipped amounts so margin 0 is exact.
    left = b.x - margin
    top = b.y - margin
    w = b.w + 2 * margin - max(0.0, -left) - max(0.0, left + b.w + 2 * margin - dims.width)
    h = b.h + 2 * margin - max(0.0, -top) - max(0.0, top + b.h + 2 * margin - dims.height)
    x0 = min(max(left, 0.0), dims.width)
    y0 = min(max(top, 0.0), dims.height)
    return Box(x0, y0, min(max(w, 0.0), dims.width - x0), min(max(h, 0.0), dims.height - y0))
