"""Input validation helpers shared by the estimators and pipeline stages."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from numbers import Real

import numpy as np


@dataclass(frozen=True)
class Violation:
    """One failed check in a validation report.

    ``code`` is a short machine-readable tag (``"z_order"``, ``"expiry"``, ...),
    ``where`` names the offending element (layer id, MRZ field, record field).
    """

    code: str
    where: str
    message: str

    def __str__(self) -> str:
        return f"[{self.code}] {self.where}: {self.message}"


def check_image(image, *, name: str = "image", allow_alpha: bool = True) -> np.ndarray:
    """Return ``image`` as an ndarray of shape (H, W), (H, W, 3) or (H, W, 4)."""
    arr = np.asarray(image)
    if arr.ndim not in (2, 3):
        raise ValueError(f"{name} must be 2-D or 3-D, got shape {arr.shape}")
    if arr.ndim == 3 and arr.shape[2] not in ((1, 3, 4) if allow_alpha else (1, 3)):
        raise ValueError(f"{name} has unsupported channel count {arr.shape[2]}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError(f"{name} is empty")
    return arr


def check_mask(mask, *, name: str = "mask") -> np.ndarray:
    """Return ``mask`` as float32 alpha in [0, 1]; uint8 masks are scaled by 1/255."""
    arr = np.asarray(mask)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[..., 0]
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.dtype == np.uint8:
        return arr.astype(np.float32) / 255.0
    if arr.dtype == bool:
        return arr.astype(np.float32)
    out = arr.astype(np.float32)
    if out.size and (out.min() < 0.0 or out.max() > 1.0):
        raise ValueError(f"{name} values must lie in [0, 1]")
    return out


def check_fraction(value, name: str) -> float:
    if not isinstance(value, Real) or not 0.0 <= float(value) <= 1.0:
        raise ValueError(f"{name} must be a fraction in [0, 1], got {value!r}")
    return float(value)


def to_gray(image) -> np.ndarray:
    """Luma (ITU-R BT.601) as float64, on the input's 0-255 scale."""
    arr = check_image(image)
    if arr.ndim == 2:
        return arr.astype(np.float64)
    if arr.shape[2] == 1:
        return arr[..., 0].astype(np.float64)
    rgb = arr[..., :3].astype(np.float64)
    return rgb @ np.array([0.299, 0.587, 0.114])


def raster_hash(image) -> str:
    """SHA-256 over shape, dtype and pixel bytes of a raster."""
    arr = np.ascontiguousarray(image)
    h = hashlib.sha256()
    h.update(f"{arr.shape}|{arr.dtype.str}|".encode())
    h.update(arr.tobytes())
    return h.hexdigest()


def file_hash(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()
