"""PNG loading and saving for float channel-first images in [0, 1]."""

from __future__ import annotations

import io

import numpy as np
from PIL import Image


def to_uint8(image) -> np.ndarray:
    """(3, H, W) float in [0, 1] -> (H, W, 3) uint8."""
    arr = np.asarray(image.detach().cpu() if hasattr(image, "detach") else image)
    arr = np.clip(arr, 0.0, 1.0)
    return np.round(arr.transpose(1, 2, 0) * 255.0).astype(np.uint8)


def from_uint8(arr: np.ndarray) -> np.ndarray:
    """(H, W, 3) uint8 -> (3, H, W) float32 in [0, 1]."""
    return (arr.astype(np.float32) / 255.0).transpose(2, 0, 1)


def png_bytes(image) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(to_uint8(image)).save(buf, format="PNG")
    return buf.getvalue()


def save_png(image, path) -> None:
    Image.fromarray(to_uint8(image)).save(path, format="PNG")


def load_png(path) -> np.ndarray:
    with Image.open(path) as im:
        return from_uint8(np.asarray(im.convert("RGB")))
