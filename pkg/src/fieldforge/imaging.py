"""Raster decode/encode at the I/O boundary (PNG via Pillow)."""

from __future__ import annotations

import io

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ImageDecodeError


def decode_image(data: bytes) -> np.ndarray:
    """Decode media bytes to an RGB raster (H, W, 3) uint8."""
    try:
        with Image.open(io.BytesIO(data)) as img:
            return np.asarray(img.convert("RGB"), dtype=np.uint8)
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise ImageDecodeError(f"cannot decode image: {exc}") from exc


def encode_png(raster: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(raster, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()
