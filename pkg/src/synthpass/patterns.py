"""Logo and security-pattern extraction: colour thresholding, connected
components and k-means palette estimation."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage
from sklearn.base import BaseEstimator, ClusterMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ._validation import check_image
from .imageio import write_png
from .template import Rect

EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


def _rgb(image) -> np.ndarray:
    arr = check_image(image)
    if arr.ndim == 2:
        arr = np.repeat(arr[..., None], 3, axis=2)
    return arr[..., :3].astype(np.int32)


def threshold_extract(image, color_center, tolerance: float) -> np.ndarray:
    """Boolean mask of pixels whose every channel is within ``tolerance`` of
    ``color_center`` (Chebyshev distance)."""
    if tolerance < 0:
        raise ValueError("tolerance must be >= 0")
    center = np.asarray(color_center, dtype=np.int32).reshape(1, 1, 3)
    return np.abs(_rgb(image) - center).max(axis=2) <= tolerance


class ColorThresholdMasker(BaseEstimator, TransformerMixin):
    """Transformer form of :func:`threshold_extract` over a batch of images."""

    def __init__(self, color_center=(0, 0, 0), tolerance=30):
        self.color_center = color_center
        self.tolerance = tolerance

    def fit(self, X=None, y=None):
        if self.tolerance < 0:
            raise ValueError("tolerance must be >= 0")
        return self

    def transform(self, X):
        return [threshold_extract(img, self.color_center, self.tolerance) for img in X]


@dataclass
class Component:
    mask: np.ndarray
    bounds: Rect
    area: int


def contour_components(mask, min_area: int = 0) -> list[Component]:
    """8-connected components with at least ``min_area`` pixels, largest first.

    Equal areas keep raster-scan order of their first pixel.
    """
    m = np.asarray(mask)
    if m.ndim != 2:
        raise ValueError("mask must be 2-D")
    labels, n = ndimage.label(m.astype(bool), structure=EIGHT_CONNECTED)
    if n == 0:
        return []
    areas = np.bincount(labels.ravel(), minlength=n + 1)
    slices = ndimage.find_objects(labels)
    comps = []
    for lab in range(1, n + 1):
        area = int(areas[lab])
        if area < min_area:
            continue
        sy, sx = slices[lab - 1]
        comps.append(
            Component(
                mask=labels == lab,
                bounds=Rect(sx.start, sy.start, sx.stop - sx.start, sy.stop - sy.start),
                area=area,
            )
        )
    comps.sort(key=lambda c: -c.area)
    return comps


# ---------------------------------------------------------------- palette


def _farthest_point_init(colors: np.ndarray, weights: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    # first center: a weight-proportional draw; then repeatedly the farthest color
    first = rng.choice(len(colors), p=weights / weights.sum())
    centers = [colors[first]]
    d2 = ((colors - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        nxt = int(np.argmax(d2))
        centers.append(colors[nxt])
        d2 = np.minimum(d2, ((colors - colors[nxt]) ** 2).sum(axis=1))
    return np.array(centers, dtype=np.float64)


class PaletteEstimator(BaseEstimator, ClusterMixin):
    """Weighted k-means over RGB colors with farthest-point seeding.

    ``fit`` takes an (n, 3) array of colors (optionally with ``sample_weight``).
    When fewer distinct colors than ``n_colors`` exist, the distinct colors
    themselves become the palette and ``degenerate_`` is set.
    """

    def __init__(self, n_colors=3, max_iter=20, random_state=0):
        self.n_colors = n_colors
        self.max_iter = max_iter
        self.random_state = random_state

    def fit(self, X, y=None, sample_weight=None):
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != 3:
            raise ValueError("expected (n, 3) RGB colors")
        if self.n_colors < 1:
            raise ValueError("n_colors must be >= 1")
        w = np.ones(len(X)) if sample_weight is None else np.asarray(sample_weight, dtype=np.float64)
        colors, inverse = np.unique(X, axis=0, return_inverse=True)
        counts = np.bincount(inverse.ravel(), weights=w, minlength=len(colors))

        self.degenerate_ = len(colors) < self.n_colors
        if self.degenerate_:
            centers = colors.copy()
        else:
            rng = np.random.default_rng(self.random_state)
            centers = _farthest_point_init(colors, counts, self.n_colors, rng)
            for _ in range(self.max_iter):
                assign = self._nearest(colors, centers)
                new = centers.copy()
                for j in range(len(centers)):
                    sel = assign == j
                    if counts[sel].sum() > 0:
                        new[j] = np.average(colors[sel], axis=0, weights=counts[sel])
                if np.array_equal(new, centers):
                    break
                centers = new
        assign = self._nearest(colors, centers)
        weights = np.bincount(assign, weights=counts, minlength=len(centers)) / counts.sum()
        order = sorted(range(len(centers)), key=lambda j: (-weights[j], tuple(centers[j])))
        self.cluster_centers_ = centers[order]
        self.weights_ = weights[order]
        self.n_colors_ = len(centers)
        return self

    @staticmethod
    def _nearest(colors: np.ndarray, centers: np.ndarray) -> np.ndarray:
        d2 = ((colors[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        return np.argmin(d2, axis=1)

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "cluster_centers_")
        return self._nearest(check_array(X, dtype=np.float64), self.cluster_centers_)

    def quantize(self, X) -> np.ndarray:
        """Replace each color with its palette color."""
        return self.cluster_centers_[self.predict(X)]


@dataclass
class Palette:
    colors: list[tuple[float, float, float]]
    weights: list[float]
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {
            "colors": [[round(c, 4) for c in col] for col in self.colors],
            "weights": [round(w, 6) for w in self.weights],
            "degenerate": self.degenerate,
        }


def _masked_pixels(image, mask) -> np.ndarray:
    rgb = _rgb(image)
    m = np.asarray(mask).astype(bool)
    if m.shape != rgb.shape[:2]:
        raise ValueError("mask shape does not match image")
    if not m.any():
        raise ValueError("mask selects no pixels")
    return rgb[m].astype(np.float64)


def estimate_palette(image, mask, k: int, seed: int = 0, max_iter: int = 20) -> Palette:
    """Dominant colors of the masked pixels with their pixel fractions."""
    if k < 1:
        raise ValueError("k must be >= 1")
    est = PaletteEstimator(n_colors=k, max_iter=max_iter, random_state=seed).fit(_masked_pixels(image, mask))
    return Palette(
        colors=[tuple(float(v) for v in c) for c in est.cluster_centers_],
        weights=[float(w) for w in est.weights_],
        degenerate=est.degenerate_,
    )


def recolor_to_palette(image, mask, palette: Palette) -> np.ndarray:
    """Snap masked pixels to their nearest palette color (color correction)."""
    rgb = _rgb(image)
    m = np.asarray(mask).astype(bool)
    centers = np.asarray(palette.colors, dtype=np.float64)
    out = np.asarray(image).copy()
    idx = PaletteEstimator._nearest(rgb[m].astype(np.float64), centers)
    out[..., :3][m] = np.clip(np.rint(centers[idx]), 0, 255).astype(out.dtype)
    return out


@dataclass
class PatternAsset:
    image: np.ndarray  # (h, w, 4) uint8
    palette: Palette
    source_bounds: Rect
    flags: list[str] = field(default_factory=list)

    def save(self, path) -> tuple[Path, Path]:
        path = Path(path)
        write_png(path, self.image)
        side = path.with_suffix(".palette.json")
        payload = {"source_bounds": self.source_bounds.as_list(), **self.palette.to_dict(), "flags": self.flags}
        side.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
        return path, side


def extract_pattern(image, color_center, tolerance: float, min_area: int = 0, k: int = 3, seed: int = 0) -> PatternAsset:
    """Threshold, keep components above ``min_area``, crop to their union and
    attach the estimated palette."""
    mask = threshold_extract(image, color_center, tolerance)
    comps = contour_components(mask, min_area)
    flags: list[str] = []
    if not comps:
        raise ValueError("no component survives the thresholds")
    keep = np.zeros(mask.shape, bool)
    for c in comps:
        keep |= c.mask
    ys, xs = np.nonzero(keep)
    bounds = Rect(int(xs.min()), int(ys.min()), int(xs.max() - xs.min() + 1), int(ys.max() - ys.min() + 1))
    sl = (slice(bounds.y, bounds.bottom), slice(bounds.x, bounds.right))
    rgb = _rgb(image)[sl].astype(np.uint8)
    alpha = keep[sl].astype(np.uint8) * 255
    if alpha.min() == 255:
        flags.append("alpha fully opaque")
    palette = estimate_palette(image, keep, k, seed=seed)
    if palette.degenerate:
        flags.append(f"only {len(palette.colors)} distinct colors for k={k}")
    return PatternAsset(np.dstack([rgb, alpha]), palette, bounds, flags)
