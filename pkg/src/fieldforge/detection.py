"""Bounding boxes, detections, IoU, and greedy per-label NMS.

Coordinates are fractions of the image dimension, so the same detection
renders at any display resolution. All functions are pure and deterministic,
including tie-breaking, so detection lists serialize bit-identically.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterable


@dataclass(frozen=True)
class BBox:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def is_valid(self) -> bool:
        return (
            all(isinstance(v, (int, float)) and not isinstance(v, bool)
                for v in (self.x_min, self.y_min, self.x_max, self.y_max))
            and 0.0 <= self.x_min < self.x_max <= 1.0
            and 0.0 <= self.y_min < self.y_max <= 1.0
        )

    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    def to_dict(self) -> dict[str, float]:
        return {
            "x_min": self.x_min,
            "y_min": self.y_min,
            "x_max": self.x_max,
            "y_max": self.y_max,
        }

    @classmethod
    def from_dict(cls, d: Any) -> "BBox":
        return cls(d["x_min"], d["y_min"], d["x_max"], d["y_max"])


@dataclass(frozen=True)
class Detection:
    label_id: int
    bbox: BBox
    confidence: float

    def is_valid(self, label_count: int | None = None) -> bool:
        if not isinstance(self.label_id, int) or isinstance(self.label_id, bool) or self.label_id < 0:
            return False
        if label_count is not None and self.label_id >= label_count:
            return False
        if not isinstance(self.confidence, (int, float)) or isinstance(self.confidence, bool):
            return False
        return self.bbox.is_valid() and 0.0 <= self.confidence <= 1.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "label_id": self.label_id,
            "bbox": self.bbox.to_dict(),
            "confidence": self.confidence,
        }

    @classmethod
    def from_dict(cls, d: Any) -> "Detection":
        return cls(d["label_id"], BBox.from_dict(d["bbox"]), d["confidence"])


def iou(a: BBox, b: BBox) -> float:
    """Intersection area over union area; 0.0 when disjoint."""
    ix = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    iy = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    return inter / (a.area() + b.area() - inter)


def _sort_key(d: Detection):
    # confidence descending, then smaller label, then bbox fields
    return (-d.confidence, d.label_id, d.bbox.x_min, d.bbox.y_min, d.bbox.x_max, d.bbox.y_max)


def nms(dets: Iterable[Detection], iou_threshold: float, max_out: int) -> list[Detection]:
    """Greedy per-label suppression.

    Keeps detections in descending-confidence order; a detection is dropped
    when an already-kept detection of the same label overlaps it with
    iou > iou_threshold. Output is truncated to max_out.
    """
    kept: list[Detection] = []
    kept_by_label: dict[int, list[Detection]] = {}
    for det in sorted(dets, key=_sort_key):
        if len(kept) >= max_out:
            break
        rivals = kept_by_label.get(det.label_id, ())
        if any(iou(k.bbox, det.bbox) > iou_threshold for k in rivals):
            continue
        kept.append(det)
        kept_by_label.setdefault(det.label_id, []).append(det)
    return kept


def postprocess(
    raw: Iterable[Detection],
    min_confidence: float,
    iou_threshold: float,
    max_out: int,
) -> list[Detection]:
    """Confidence filter followed by NMS; the final guidance list."""
    return nms((d for d in raw if d.confidence >= min_confidence), iou_threshold, max_out)
