"""The deterministic reference detection engine, engine id "refdet/1".

The image is divided into an S x S grid; each cell is scored per label by
how close its mean RGB is to that label's prototype color:

    score = max(0, 1 - dist / sqrt(195075))

where dist is the Euclidean RGB distance and sqrt(195075) = sqrt(3 * 255^2)
is the largest distance possible. Cells at or above the model's score
threshold become candidate detections with the cell bounds as their box;
the candidates then go through greedy NMS.

Pixel sums are integers, so results are bit-reproducible across machines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from .detection import BBox, Detection, nms
from .errors import ImageDecodeError, MalformedArchive
from .jsoncanon import canonical_json, parse_json

ENGINE_ID = "refdet/1"
MAX_RGB_DIST = math.sqrt(195075.0)

GRID_MIN, GRID_MAX = 2, 64


@dataclass(frozen=True)
class RefDetModel:
    grid: int
    prototypes: tuple[tuple[int, int, int], ...]
    score_threshold: float
    nms_iou_threshold: float
    max_detections: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "grid": self.grid,
            "prototypes": [list(p) for p in self.prototypes],
            "score_threshold": self.score_threshold,
            "nms_iou_threshold": self.nms_iou_threshold,
            "max_detections": self.max_detections,
        }

    @classmethod
    def from_dict(cls, d: Any) -> "RefDetModel":
        return cls(
            grid=d["grid"],
            prototypes=tuple(tuple(p) for p in d["prototypes"]),
            score_threshold=d["score_threshold"],
            nms_iou_threshold=d["nms_iou_threshold"],
            max_detections=d["max_detections"],
        )


def validate_model(model: RefDetModel, label_count: int) -> None:
    if not (GRID_MIN <= model.grid <= GRID_MAX):
        raise MalformedArchive(f"grid must be in [{GRID_MIN},{GRID_MAX}], got {model.grid}")
    if len(model.prototypes) != label_count:
        raise MalformedArchive(
            f"expected {label_count} prototypes, got {len(model.prototypes)}"
        )
    for i, proto in enumerate(model.prototypes):
        if len(proto) != 3 or any(not (0 <= c <= 255) for c in proto):
            raise MalformedArchive(f"prototype {i} is not an RGB triple")
    for name in ("score_threshold", "nms_iou_threshold"):
        v = getattr(model, name)
        if not (0.0 <= v <= 1.0):
            raise MalformedArchive(f"{name} must be in [0,1], got {v}")
    if model.max_detections < 1:
        raise MalformedArchive("max_detections must be >= 1")


def encode_payload(model: RefDetModel) -> bytes:
    return canonical_json(model.to_dict())


def decode_payload(payload: bytes, label_count: int) -> RefDetModel:
    try:
        model = RefDetModel.from_dict(parse_json(payload))
    except (ValueError, KeyError, TypeError) as exc:
        raise MalformedArchive(f"cannot decode refdet payload: {exc}") from exc
    validate_model(model, label_count)
    return model


def refdet_infer(model: RefDetModel, image: np.ndarray) -> list[Detection]:
    """Run the grid/prototype engine over an RGB raster (H, W, 3) uint8."""
    if not isinstance(image, np.ndarray) or image.ndim != 3 or image.shape[2] != 3:
        raise ImageDecodeError("expected an RGB raster of shape (H, W, 3)")
    height, width = image.shape[0], image.shape[1]
    if height == 0 or width == 0:
        raise ImageDecodeError("empty image")

    grid = model.grid
    cells = image.astype(np.int64)
    candidates: list[Detection] = []
    for row in range(grid):
        y0, y1 = row * height // grid, (row + 1) * height // grid
        for col in range(grid):
            x0, x1 = col * width // grid, (col + 1) * width // grid
            count = (y1 - y0) * (x1 - x0)
            if count == 0:
                continue
            sums = cells[y0:y1, x0:x1].sum(axis=(0, 1))
            # exact integer sums, then one float division: bit-stable
            mean = (int(sums[0]) / count, int(sums[1]) / count, int(sums[2]) / count)
            for label_id, proto in enumerate(model.prototypes):
                dist_sq = (
                    (mean[0] - proto[0]) ** 2
                    + (mean[1] - proto[1]) ** 2
                    + (mean[2] - proto[2]) ** 2
                )
                score = max(0.0, 1.0 - math.sqrt(dist_sq) / MAX_RGB_DIST)
                if score >= model.score_threshold:
                    candidates.append(Detection(
                        label_id=label_id,
                        bbox=BBox(col / grid, row / grid, (col + 1) / grid, (row + 1) / grid),
                        confidence=score,
                    ))
    return nms(candidates, model.nms_iou_threshold, model.max_detections)
