"""Supervised tracking quality from predicted and ground-truth boxes."""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box as (left, top, width, height) in continuous pixel units."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        for name in ("x", "y", "w", "h"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"box field {name} must be finite, got {v!r}")
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box must have positive width and height, got w={self.w}, h={self.h}")
        if self.x + self.w <= self.x or self.y + self.h <= self.y:
            raise ValueError(f"box size vanishes at coordinate magnitude: {self!r}")

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h

    @property
    def area(self) -> float:
        return self.w * self.h


def _overlap(lo1: float, hi1: float, lo2: float, hi2: float) -> float:
    return max(0.0, min(hi1, hi2) - max(lo1, lo2))


def _areas(a: BoundingBox, b: BoundingBox) -> tuple[float, float, float]:
    # Every area comes from edge differences so rounding cannot push IoU above 1.
    area_a = (a.x2 - a.x) * (a.y2 - a.y)
    area_b = (b.x2 - b.x) * (b.y2 - b.y)
    inter = _overlap(a.x, a.x2, b.x, b.x2) * _overlap(a.y, a.y2, b.y, b.y2)
    union = max(area_a + area_b - inter, area_a, area_b)
    hull = max((max(a.x2, b.x2) - min(a.x, b.x)) * (max(a.y2, b.y2) - min(a.y, b.y)), union)
    return inter, union, hull


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union, in [0, 1]."""
    inter, union, _ = _areas(a, b)
    return inter / union


def giou(a: BoundingBox, b: BoundingBox) -> float:
    """Generalized IoU: IoU minus the fraction of the enclosing rectangle not covered by either box.

    Lies in (-1, 1] and approaches -1 as the boxes move infinitely far apart.
    """
    inter, union, hull = _areas(a, b)
    return inter / union - (hull - union) / hull


def ngiou(a: BoundingBox, b: BoundingBox) -> float:
    """GIoU rescaled to [0, 1]."""
    return (giou(a, b) + 1.0) / 2.0
