"""Raster read/write with deterministic encoding."""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from PIL import Image


def read_image(path, mode: str = "RGBA") -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert(mode))


def encode_png(image) -> bytes:
    arr = np.asarray(image)
    if arr.dtype != np.uint8:
        arr = np.clip(np.rint(arr), 0, 255).astype(np.uint8)
    buf = io.BytesIO()
    # no metadata chunks, fixed compression: same pixels -> same bytes
    Image.fromarray(arr).save(buf, format="PNG", compress_level=6)
    return buf.getvalue()


def write_png(path, image) -> bytes:
    data = encode_png(image)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_bytes(data)
    return data


def resize(image: np.ndarray, width: int, height: int) -> np.ndarray:
    """Area resampling for downscale, bilinear for upscale (OpenCV)."""
    import cv2

    arr = np.ascontiguousarray(image)
    if arr.shape[1] == width and arr.shape[0] == height:
        return arr.copy()
    shrink = width < arr.shape[1] and height < arr.shape[0]
    interp = cv2.INTER_AREA if shrink else cv2.INTER_LINEAR
    return cv2.resize(arr, (int(width), int(height)), interpolation=interp)
