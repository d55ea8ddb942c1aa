"""Face image quality filtering, ICAO-style portrait cropping and signature extraction.

Face detection is not done here. Landmarks come from a provider; the bundled
:class:`SidecarLandmarkProvider` reads ``<image>.landmarks.json`` files, and any
callable ``provider(path) -> Landmarks`` (e.g. a wrapper around a mesh
detector) can be used instead.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import cv2
import numpy as np
from scipy.ndimage import convolve
from sklearn.base import BaseEstimator

from ._validation import check_image, to_gray

LAPLACIAN_3X3 = np.array([[0, 1, 0], [1, -4, 1], [0, 1, 0]], dtype=np.float64)


@dataclass(frozen=True)
class Landmarks:
    left_eye: tuple[float, float]
    right_eye: tuple[float, float]
    face_bbox: tuple[float, float, float, float]  # x, y, width, height
    source: str = "unknown"

    def problems(self) -> list[str]:
        x, y, w, h = self.face_bbox
        out = []
        for name, (ex, ey) in (("left_eye", self.left_eye), ("right_eye", self.right_eye)):
            if not (x <= ex <= x + w and y <= ey <= y + h):
                out.append(f"{name} outside face_bbox")
        if not self.left_eye[0] < self.right_eye[0]:
            out.append("left eye x must be smaller than right eye x")
        return out

    @property
    def eye_distance(self) -> float:
        return math.dist(self.left_eye, self.right_eye)

    def to_dict(self) -> dict:
        return {
            "left_eye": list(self.left_eye),
            "right_eye": list(self.right_eye),
            "face_bbox": list(self.face_bbox),
            "source": self.source,
        }

    @classmethod
    def from_dict(cls, d) -> "Landmarks":
        return cls(
            left_eye=tuple(float(v) for v in d["left_eye"]),
            right_eye=tuple(float(v) for v in d["right_eye"]),
            face_bbox=tuple(float(v) for v in d["face_bbox"]),
            source=str(d.get("source", "sidecar")),
        )


def sidecar_path(image_path) -> Path:
    p = Path(image_path)
    return p.with_name(p.stem + ".landmarks.json")


class SidecarLandmarkProvider:
    """Landmark provider backed by JSON files stored next to each image."""

    def __call__(self, image_path) -> Landmarks:
        path = sidecar_path(image_path)
        with open(path, encoding="utf-8") as fh:
            lm = Landmarks.from_dict(json.load(fh))
        return Landmarks(lm.left_eye, lm.right_eye, lm.face_bbox, source=lm.source or "sidecar")

    @staticmethod
    def write(image_path, landmarks: Landmarks) -> Path:
        path = sidecar_path(image_path)
        path.write_text(json.dumps(landmarks.to_dict(), indent=2) + "\n", encoding="utf-8")
        return path


LandmarkProvider = Callable[[Path], Landmarks]


@dataclass(frozen=True)
class QualityThresholds:
    min_bbox_pixels: int = 180
    min_eye_distance_ratio: float = 0.12
    min_eye_margin_ratio: float = 0.10
    min_sharpness: float = 10.0

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not value > 0:
                raise ValueError(f"{name} must be strictly positive, got {value}")


@dataclass(frozen=True)
class Criterion:
    value: float
    threshold: float
    passed: bool


@dataclass(frozen=True)
class QualityReport:
    bbox_pixels: Criterion
    eye_distance_ratio: Criterion
    eye_margin_ratio: Criterion
    sharpness: Criterion
    rank_score: float

    @property
    def overall_pass(self) -> bool:
        return all(c.passed for c in (self.bbox_pixels, self.eye_distance_ratio, self.eye_margin_ratio, self.sharpness))

    def to_dict(self) -> dict:
        d = {name: asdict(getattr(self, name)) for name in ("bbox_pixels", "eye_distance_ratio", "eye_margin_ratio", "sharpness")}
        d["rank_score"] = self.rank_score if math.isfinite(self.rank_score) else None
        d["overall_pass"] = self.overall_pass
        return d


def laplacian_variance(gray: np.ndarray) -> float:
    """Variance of the 3x3 Laplacian response over the interior of ``gray``.

    Border pixels, whose response would depend on a padding convention, are
    excluded.
    """
    g = np.asarray(gray, dtype=np.float64)
    if g.shape[0] < 3 or g.shape[1] < 3:
        return 0.0
    response = convolve(g, LAPLACIAN_3X3, mode="nearest")[1:-1, 1:-1]
    return float(response.var())


def _bbox_slice(bbox, shape) -> tuple[slice, slice]:
    x, y, w, h = bbox
    x0, y0 = max(int(math.floor(x)), 0), max(int(math.floor(y)), 0)
    x1, y1 = min(int(math.ceil(x + w)), shape[1]), min(int(math.ceil(y + h)), shape[0])
    return slice(y0, y1), slice(x0, x1)


def sharpness(image, bbox=None) -> float:
    gray = to_gray(image)
    if bbox is not None:
        gray = gray[_bbox_slice(bbox, gray.shape)]
    return laplacian_variance(gray)


def assess(image, landmarks: Landmarks, thresholds: QualityThresholds | None = None) -> QualityReport:
    """Measure one face image against the four quality criteria.

    Eye distance is relative to image width. The eye margin is the smallest
    distance from either eye center to an image edge, divided by the image
    dimension along that axis. ``rank_score`` is the sharpness for passing
    images and ``-inf`` otherwise.
    """
    t = thresholds or QualityThresholds()
    arr = check_image(image)
    problems = landmarks.problems()
    if problems:
        raise ValueError("invalid landmarks: " + "; ".join(problems))
    H, W = arr.shape[:2]
    _, _, bw, bh = landmarks.face_bbox
    if bw <= 0 or bh <= 0:
        raise ValueError("degenerate face bbox (zero area)")

    bbox_px = float(min(bw, bh))
    eye_ratio = landmarks.eye_distance / W
    margins = []
    for ex, ey in (landmarks.left_eye, landmarks.right_eye):
        margins += [ex / W, (W - ex) / W, ey / H, (H - ey) / H]
    margin_ratio = float(min(margins))
    sharp = sharpness(arr, landmarks.face_bbox)

    crit = (
        Criterion(bbox_px, t.min_bbox_pixels, bbox_px >= t.min_bbox_pixels),
        Criterion(eye_ratio, t.min_eye_distance_ratio, eye_ratio >= t.min_eye_distance_ratio),
        Criterion(margin_ratio, t.min_eye_margin_ratio, margin_ratio >= t.min_eye_margin_ratio),
        Criterion(sharp, t.min_sharpness, sharp >= t.min_sharpness),
    )
    ok = all(c.passed for c in crit)
    return QualityReport(*crit, rank_score=sharp if ok else -math.inf)


@dataclass
class Selection:
    """Result of :func:`rank_and_select`.

    ``indices`` point into the candidate list, best first.
    """

    indices: list[int]
    images: list[np.ndarray]
    reports: list[QualityReport]
    k: int
    flags: list[str] = field(default_factory=list)

    @property
    def short(self) -> bool:
        return len(self.indices) < self.k


def rank_and_select(candidates: Sequence, thresholds: QualityThresholds | None = None, k: int = 3) -> Selection:
    """Keep the ``k`` sharpest passing candidates, ties in input order.

    ``candidates`` is a sequence of ``(image, Landmarks)`` pairs.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    reports = [assess(img, lm, thresholds) for img, lm in candidates]
    passing = [i for i, r in enumerate(reports) if r.overall_pass]
    # sorted() is stable, so equal scores keep input order
    ranked = sorted(passing, key=lambda i: -reports[i].rank_score)[:k]
    flags = []
    if not passing:
        flags.append("no passing candidates")
    elif len(ranked) < k:
        flags.append(f"only {len(ranked)} of {k} requested candidates passed")
    return Selection(ranked, [candidates[i][0] for i in ranked], reports, k, flags)


class FaceQualityFilter(BaseEstimator):
    """Estimator-style wrapper around :func:`assess` / :func:`rank_and_select`.

    Stateless: ``fit`` only validates parameters.
    """

    def __init__(
        self,
        min_bbox_pixels=180,
        min_eye_distance_ratio=0.12,
        min_eye_margin_ratio=0.10,
        min_sharpness=10.0,
        k=3,
    ):
        self.min_bbox_pixels = min_bbox_pixels
        self.min_eye_distance_ratio = min_eye_distance_ratio
        self.min_eye_margin_ratio = min_eye_margin_ratio
        self.min_sharpness = min_sharpness
        self.k = k

    @property
    def thresholds(self) -> QualityThresholds:
        return QualityThresholds(
            self.min_bbox_pixels, self.min_eye_distance_ratio, self.min_eye_margin_ratio, self.min_sharpness
        )

    def fit(self, X=None, y=None):
        self.thresholds_ = self.thresholds
        if self.k < 1:
            raise ValueError("k must be >= 1")
        return self

    def score_samples(self, X) -> np.ndarray:
        """Rank scores (sharpness, or -inf when a criterion fails) per candidate."""
        return np.array([assess(img, lm, self.thresholds).rank_score for img, lm in X])

    def predict(self, X) -> np.ndarray:
        return np.array([assess(img, lm, self.thresholds).overall_pass for img, lm in X])

    def select(self, X) -> Selection:
        return rank_and_select(X, self.thresholds, self.k)


# ---------------------------------------------------------------- cropping


@dataclass(frozen=True)
class CropGeometry:
    """Target eye placement as fractions of the output size."""

    eye_line_from_bottom: float = 0.55
    eye_distance: float = 0.25

    def targets(self, out_size: tuple[int, int]) -> tuple[tuple[float, float], tuple[float, float]]:
        w, h = out_size
        y = h * (1.0 - self.eye_line_from_bottom)
        half = self.eye_distance * w / 2.0
        return (w / 2.0 - half, y), (w / 2.0 + half, y)


def icao_transform(landmarks: Landmarks, out_size: tuple[int, int], geometry: CropGeometry | None = None) -> np.ndarray:
    """2x3 similarity transform taking the source eyes onto the target eye positions."""
    if landmarks.eye_distance == 0:
        raise ValueError("eye distance is zero")
    (tlx, tly), (trx, try_) = (geometry or CropGeometry()).targets(out_size)
    src = np.array([landmarks.left_eye, landmarks.right_eye], dtype=np.float64)
    dst = np.array([(tlx, tly), (trx, try_)], dtype=np.float64)
    # similarity: [a -b; b a] plus translation, from two point pairs
    s = complex(*(src[1] - src[0]))
    d = complex(*(dst[1] - dst[0]))
    z = d / s
    a, b = z.real, z.imag
    tx = dst[0, 0] - (a * src[0, 0] - b * src[0, 1])
    ty = dst[0, 1] - (b * src[0, 0] + a * src[0, 1])
    return np.array([[a, -b, tx], [b, a, ty]], dtype=np.float64)


def crop_icao(image, landmarks: Landmarks, out_size: tuple[int, int] = (413, 531), geometry: CropGeometry | None = None):
    """Portrait crop with eyes level, centered, at the configured eye line and spacing.

    Areas outside the source are filled by edge replication.
    """
    arr = check_image(image)
    M = icao_transform(landmarks, out_size, geometry)
    return cv2.warpAffine(
        np.ascontiguousarray(arr),
        M,
        (int(out_size[0]), int(out_size[1])),
        flags=cv2.INTER_LINEAR,
        borderMode=cv2.BORDER_REPLICATE,
    )


# ---------------------------------------------------------------- signatures


@dataclass
class SignatureResult:
    binary: np.ndarray  # (H, W, 4) uint8: black ink, transparent background
    mask: np.ndarray  # (H, W) bool, True on ink
    threshold: float
    blank: bool


def signature_extract(image, min_contrast: int = 32) -> SignatureResult:
    """Otsu-binarize a signature scan; dark ink becomes the opaque foreground.

    Scans whose gray range is below ``min_contrast`` (paper texture only) are
    reported blank instead of thresholding noise.
    """
    gray = np.clip(np.rint(to_gray(image)), 0, 255).astype(np.uint8)
    if int(gray.max()) - int(gray.min()) < max(min_contrast, 1):
        mask = np.zeros(gray.shape, bool)
        thr = float(gray.min())
    else:
        thr, _ = cv2.threshold(gray, 0, 255, cv2.THRESH_BINARY + cv2.THRESH_OTSU)
        mask = gray <= thr
    out = np.zeros(gray.shape + (4,), np.uint8)
    out[..., 3] = mask.astype(np.uint8) * 255
    return SignatureResult(out, mask, float(thr), blank=not mask.any())
