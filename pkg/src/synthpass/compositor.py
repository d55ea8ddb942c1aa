"""Layer compositing: text rendering, masked source-over blending, full documents.

Canvases are (H, W, 3) arrays on the 0-255 scale. Internally everything is
float32 so repeated blends do not accumulate rounding; the public functions
return the dtype they were given.
"""

from __future__ import annotations

import datetime as dt
import math
import time
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Mapping

import numpy as np
from PIL import Image, ImageDraw, ImageFont
from scipy.ndimage import gaussian_filter

from ._validation import check_image, check_mask
from .imageio import read_image, resize
from .template import (
    CountryConfig,
    ImagePlacement,
    LayerClass,
    LayerSpec,
    Rect,
    Template,
    TextStyle,
)

BLUR_TRUNCATE = 3.0


class RenderError(RuntimeError):
    def __init__(self, layer_id: str, message: str):
        self.layer_id = layer_id
        super().__init__(f"layer {layer_id!r}: {message}")


class TextOverflowError(ValueError):
    def __init__(self, layer_id: str, measured: float, available: int):
        self.layer_id = layer_id
        self.measured = measured
        self.available = available
        super().__init__(f"text in layer {layer_id!r} is {measured:.1f}px wide, bounds allow {available}px")


def blur_radius(sigma: float) -> int:
    """Pixel reach of the edge blur; never exceeds ceil(3 * sigma)."""
    return int(BLUR_TRUNCATE * sigma + 0.5) if sigma > 0 else 0


# ---------------------------------------------------------------- text


@lru_cache(maxsize=64)
def get_font(family: str, size_px: float) -> ImageFont.FreeTypeFont:
    if family in ("", "default"):
        return ImageFont.load_default(size=size_px)
    return ImageFont.truetype(family, size=size_px)


def font_pixels(style: TextStyle, dpi: float) -> float:
    return style.font_size * dpi / 72.0


@dataclass(frozen=True)
class Glyph:
    char: str
    x: float  # pen position of the glyph origin, layer coordinates
    baseline: float
    advance: float


@dataclass(frozen=True)
class TextLayout:
    glyphs: tuple[Glyph, ...]
    line_widths: tuple[float, ...]

    @property
    def width(self) -> float:
        return max(self.line_widths, default=0.0)


def layout_text(
    text: str,
    style: TextStyle,
    dpi: float,
    box: tuple[int, int],
    *,
    kerning: bool = True,
    curvature: bool = True,
) -> TextLayout:
    """Place glyphs left to right inside a ``box = (width, height)`` area.

    Glyph i sits at the sum of the preceding font advances plus the cumulative
    kerning offsets up to and including i. With curvature ``c`` its baseline is
    raised by ``c * (center_i - line_mid)**2``.
    """
    if style.uppercase:
        text = text.upper()
    font = get_font(style.font_family, font_pixels(style, dpi))
    chars = text.replace("\n", "")
    offsets = style.kerning_offsets if kerning else ()
    if offsets and len(offsets) != len(chars):
        raise ValueError(f"{len(offsets)} kerning offsets for a {len(chars)}-character string")

    ascent, descent = font.getmetrics()
    line_height = font_pixels(style, dpi) * style.line_spacing
    lines = text.split("\n")
    box_w, box_h = box
    glyphs: list[Glyph] = []
    widths = []
    k = 0
    for li, line in enumerate(lines):
        pen, shift = 0.0, 0.0
        placed = []
        for ch in line:
            shift += offsets[k] if offsets else 0.0
            adv = font.getlength(ch)
            placed.append((ch, pen + shift, adv))
            pen += adv
            k += 1
        width = pen + shift
        widths.append(width)
        if style.alignment == "center":
            x0 = (box_w - width) / 2.0
        elif style.alignment == "right":
            x0 = box_w - width
        else:
            x0 = 0.0
        base = box_h / 2.0 + (li - (len(lines) - 1) / 2.0) * line_height + (ascent - descent) / 2.0
        mid = width / 2.0
        c = style.baseline_curvature if curvature else 0.0
        for ch, x, adv in placed:
            lift = c * (x + adv / 2.0 - mid) ** 2
            glyphs.append(Glyph(ch, x0 + x, base - lift, adv))
    return TextLayout(tuple(glyphs), tuple(widths))


def rasterize_text(layout: TextLayout, style: TextStyle, dpi: float, box: tuple[int, int], rotate: bool = True):
    """Coverage of the laid-out glyphs as float32 alpha in [0, 1], shape (h, w)."""
    font = get_font(style.font_family, font_pixels(style, dpi))
    w, h = box
    cov = Image.new("L", (w, h), 0)
    draw = ImageDraw.Draw(cov)
    for g in layout.glyphs:
        if not g.char.isspace():
            draw.text((g.x, g.baseline), g.char, font=font, fill=255, anchor="ls")
    if rotate and style.rotation:
        cov = cov.rotate(style.rotation, resample=Image.BICUBIC, center=(w / 2.0, h / 2.0))
    return np.asarray(cov, dtype=np.float32) / 255.0


def _text_rgba(layer: LayerSpec, text: str, dpi: float, tuning: "CharacterTuning") -> tuple[np.ndarray, np.ndarray]:
    style = layer.render_params
    if not isinstance(style, TextStyle):
        raise RenderError(layer.id, "text layer without a text style")
    box = (layer.bounds.width, layer.bounds.height)
    lay = layout_text(text, style, dpi, box, kerning=tuning.kerning, curvature=tuning.curvature)
    if lay.width > box[0] + 1e-6:
        raise TextOverflowError(layer.id, lay.width, box[0])
    alpha = rasterize_text(lay, style, dpi, box, rotate=tuning.rotation)
    alpha *= style.color[3] / 255.0
    rgb = np.empty((box[1], box[0], 3), np.float32)
    rgb[:] = np.asarray(style.color[:3], np.float32)
    return rgb, alpha


# ---------------------------------------------------------------- blending


def _composite_into(canvas: np.ndarray, src: np.ndarray, alpha: np.ndarray, origin: tuple[int, int], sigma: float) -> Rect:
    """Source-over ``src`` onto float32 ``canvas`` in place; returns the touched rect."""
    r = blur_radius(sigma)
    if r:
        alpha = gaussian_filter(np.pad(alpha, r), sigma, mode="constant", truncate=BLUR_TRUNCATE)
        src = np.pad(src, ((r, r), (r, r), (0, 0)), mode="edge")
    ox, oy = origin[0] - r, origin[1] - r
    h, w = alpha.shape
    H, W = canvas.shape[:2]
    area = Rect(ox, oy, w, h).clip(W, H)
    if area.area == 0:
        return area
    sy, sx = area.y - oy, area.x - ox
    a = alpha[sy : sy + area.height, sx : sx + area.width, None]
    s = src[sy : sy + area.height, sx : sx + area.width]
    dst = canvas[area.y : area.bottom, area.x : area.right]
    dst[...] = a * s + (1.0 - a) * dst
    return area


def _as_rgb_float(image: np.ndarray) -> np.ndarray:
    arr = np.asarray(image)
    if arr.ndim == 2:
        arr = np.repeat(arr[..., None], 3, axis=2)
    return arr[..., :3].astype(np.float32)


def _alpha_of(image: np.ndarray) -> np.ndarray | None:
    arr = np.asarray(image)
    if arr.ndim == 3 and arr.shape[2] == 4:
        return arr[..., 3].astype(np.float32) / 255.0
    return None


def _restore_dtype(out: np.ndarray, like: np.ndarray) -> np.ndarray:
    if like.dtype == np.uint8:
        return np.clip(np.rint(out), 0, 255).astype(np.uint8)
    return out.astype(like.dtype, copy=False)


def composite_layer(
    canvas,
    asset,
    mask=None,
    opacity: float = 1.0,
    edge_blur_sigma: float = 0.0,
    origin: tuple[int, int] = (0, 0),
) -> np.ndarray:
    """Blend ``asset`` onto a copy of ``canvas`` with its top-left at ``origin``.

    Effective alpha is ``gaussian(mask, edge_blur_sigma) * opacity``. Without a
    mask the asset's own alpha channel is used (or full coverage for RGB).
    The blur spreads alpha at most ``ceil(3 * sigma)`` pixels past the asset.
    """
    canvas = check_image(canvas, name="canvas", allow_alpha=False)
    asset = check_image(asset, name="asset")
    if not 0.0 <= opacity <= 1.0:
        raise ValueError(f"opacity must be in [0, 1], got {opacity}")
    if mask is None:
        alpha = _alpha_of(asset)
        if alpha is None:
            alpha = np.ones(asset.shape[:2], np.float32)
    else:
        alpha = check_mask(mask)
        if alpha.shape != asset.shape[:2]:
            raise ValueError(f"mask shape {alpha.shape} does not match asset shape {asset.shape[:2]}")
    out = _as_rgb_float(canvas)
    if opacity > 0:
        _composite_into(out, _as_rgb_float(asset), alpha * np.float32(opacity), origin, edge_blur_sigma)
    return _restore_dtype(out, canvas)


def render_text_field(canvas, layer: LayerSpec, text: str, dpi: float = 600.0, opacity: float | None = None):
    """Render ``text`` into ``layer.bounds`` on a copy of ``canvas``.

    Raises :class:`TextOverflowError` (canvas untouched) when the laid-out text
    is wider than the bounds.
    """
    if not layer.layer_class.is_text:
        raise ValueError(f"layer {layer.id!r} is {layer.layer_class.value}, not a text layer")
    canvas = check_image(canvas, name="canvas", allow_alpha=False)
    rgb, alpha = _text_rgba(layer, text, dpi, CharacterTuning())
    out = _as_rgb_float(canvas)
    op = layer.opacity if opacity is None else opacity
    _composite_into(out, rgb, alpha * np.float32(op), (layer.bounds.x, layer.bounds.y), 0.0)
    return _restore_dtype(out, canvas)


# ---------------------------------------------------------------- documents


@dataclass(frozen=True)
class CharacterTuning:
    kerning: bool = True
    curvature: bool = True
    rotation: bool = True


@dataclass(frozen=True)
class PostOps:
    """Post-processing controls; ``edge_blur_sigma=None`` takes the config default."""

    edge_blur_sigma: float | None = None
    opacity_overrides: Mapping[str, float] = field(default_factory=dict)
    character_tuning: CharacterTuning = CharacterTuning()
    noise_sigma: float = 0.0


def load_layer_assets(config: CountryConfig) -> dict[str, np.ndarray]:
    """Decode every asset and mask referenced by the config's layers."""
    assets: dict[str, np.ndarray] = {}
    for layer in config.layers:
        params = layer.render_params
        paths = []
        if isinstance(params, ImagePlacement) and params.asset is not None:
            paths.append((params.asset, "RGBA"))
        if layer.mask_ref is not None:
            paths.append((layer.mask_ref, "L"))
        for path, mode in paths:
            key = str(path)
            if key in assets:
                continue
            if not Path(path).is_file():
                raise RenderError(layer.id, f"asset file not found: {path}")
            assets[key] = read_image(path, mode)
    return assets


def _placement_alpha(layer: LayerSpec, assets: Mapping[str, np.ndarray], size: tuple[int, int]) -> np.ndarray:
    w, h = size
    if layer.mask_ref is None:
        return np.ones((h, w), np.float32)
    mask = assets[str(layer.mask_ref)]
    return resize(mask, w, h).astype(np.float32) / 255.0


def _fit(image: np.ndarray, bounds: Rect, mode: str) -> np.ndarray:
    """Resize to the bounds; ``contain`` keeps aspect and pads with transparency."""
    arr = np.asarray(image)
    if arr.ndim == 2:
        arr = np.repeat(arr[..., None], 3, axis=2)
    if arr.shape[2] == 3:
        arr = np.concatenate([arr, np.full(arr.shape[:2] + (1,), 255, arr.dtype)], axis=2)
    if mode == "stretch":
        return resize(arr, bounds.width, bounds.height)
    scale = min(bounds.width / arr.shape[1], bounds.height / arr.shape[0])
    w = max(int(round(arr.shape[1] * scale)), 1)
    h = max(int(round(arr.shape[0] * scale)), 1)
    out = np.zeros((bounds.height, bounds.width, 4), np.uint8)
    y0, x0 = (bounds.height - h) // 2, (bounds.width - w) // 2
    out[y0 : y0 + h, x0 : x0 + w] = resize(arr, w, h)
    return out


@dataclass(frozen=True)
class LayerContent:
    """Subject-specific content for a render: text per layer id, raster per biometric kind."""

    texts: Mapping[str, str] = field(default_factory=dict)
    biometrics: Mapping[str, np.ndarray] = field(default_factory=dict)


def render_layers(
    config: CountryConfig,
    assets: Mapping[str, np.ndarray],
    content: LayerContent | None,
    post_ops: PostOps | None = None,
    seed: int = 0,
) -> tuple[np.ndarray, list[dict]]:
    """Render all layers in z order; subject layers without content are skipped."""
    post = post_ops or PostOps()
    sigma = config.edge_blur_sigma if post.edge_blur_sigma is None else post.edge_blur_sigma
    H, W = config.canvas.height, config.canvas.width
    canvas = np.empty((H, W, 3), np.float32)
    canvas[:] = np.asarray(config.canvas.color, np.float32)
    log: list[dict] = []

    for layer in config.render_order():
        t0 = time.perf_counter()
        opacity = float(post.opacity_overrides.get(layer.id, layer.opacity))
        origin = (layer.bounds.x, layer.bounds.y)
        ops: list[str] = []
        touched = None
        try:
            cls = layer.layer_class
            text = None
            if cls is LayerClass.STATIC_TEXT and layer.text is not None:
                text = layer.text
            elif cls is LayerClass.SUBJECT_TEXT:
                text = (content.texts.get(layer.id) if content else None) or None

            if text is not None:
                rgb, alpha = _text_rgba(layer, text, config.canvas.dpi, post.character_tuning)
                ops.append("text")
                if opacity < 1:
                    ops.append(f"opacity={opacity:g}")
                touched = _composite_into(canvas, rgb, alpha * np.float32(opacity), origin, 0.0)
            elif cls in (LayerClass.LOGO_PATTERN, LayerClass.STATIC_TEXT, LayerClass.BIOMETRIC):
                params = layer.render_params
                if cls is LayerClass.BIOMETRIC:
                    raster = content.biometrics.get(params.biometric) if content else None
                    if raster is None:
                        raster = (
                            assets.get(str(params.asset)) if params.asset is not None and content is not None else None
                        )
                else:
                    raster = assets[str(params.asset)]
                if raster is not None:
                    rgba = _fit(raster, layer.bounds, params.fit)
                    alpha = (rgba[..., 3].astype(np.float32) / 255.0) * _placement_alpha(
                        layer, assets, (layer.bounds.width, layer.bounds.height)
                    )
                    layer_sigma = sigma if params.edge_blur else 0.0
                    ops.append(params.biometric or "image")
                    if layer_sigma:
                        ops.append(f"edge_blur={layer_sigma:g}")
                    if opacity < 1:
                        ops.append(f"opacity={opacity:g}")
                    touched = _composite_into(
                        canvas, rgba[..., :3].astype(np.float32), alpha * np.float32(opacity), origin, layer_sigma
                    )
        except RenderError:
            raise
        except Exception as exc:
            raise RenderError(layer.id, str(exc)) from exc
        log.append(
            {
                "layer_id": layer.id,
                "class": layer.layer_class.value,
                "z_order": layer.z_order,
                "bounds": layer.bounds.as_list(),
                "affected": touched.as_list() if touched is not None else None,
                "ops": ops or ["skip"],
                "ms": round((time.perf_counter() - t0) * 1000.0, 3),
            }
        )

    if post.noise_sigma > 0:
        rng = np.random.default_rng(np.random.SeedSequence([seed & ((1 << 64) - 1), 0x5EED]))
        canvas += rng.normal(0.0, post.noise_sigma, canvas.shape).astype(np.float32)
        log.append({"layer_id": None, "class": None, "ops": [f"noise={post.noise_sigma:g}"]})
    return np.clip(np.rint(canvas), 0, 255).astype(np.uint8), log


def field_text(attribute: str, subject, mrz, config: CountryConfig) -> str:
    if attribute == "mrz":
        return str(mrz) if mrz is not None else ""
    value = getattr(subject, attribute)
    if value is None:
        return ""
    if isinstance(value, dt.date):
        return value.strftime(config.date_format)
    if attribute == "sex":
        return config.sex_labels.get(value, value)
    return str(value)


@dataclass(frozen=True)
class RenderJob:
    """Everything needed to render one document.

    ``assets`` maps biometric kind (``face``, ``signature``, ``fingerprint``)
    to a decoded raster. With ``subject=None`` only the empty template renders.
    """

    template: Template
    subject: object | None
    mrz: object | None = None
    assets: Mapping[str, np.ndarray] = field(default_factory=dict)
    seed: int = 0
    post_ops: PostOps = PostOps()


def check_job(job: RenderJob) -> None:
    if job.subject is None:
        return
    config = job.template.config
    for attr, layer_id in config.field_bindings.items():
        if attr == "mrz":
            if job.mrz is None:
                raise RenderError(layer_id, "no MRZ supplied for the MRZ layer")
        elif not hasattr(job.subject, attr):
            raise RenderError(layer_id, f"subject has no attribute {attr!r}")
    for layer in config.layers_of(LayerClass.BIOMETRIC):
        kind = layer.render_params.biometric
        if kind not in job.assets and layer.render_params.asset is None:
            raise RenderError(layer.id, f"no {kind} asset for biometric area")


@dataclass
class RenderResult:
    image: np.ndarray
    log: list[dict]


def render_document(job: RenderJob) -> RenderResult:
    """Composite subject text, MRZ and biometrics onto the template, in z order."""
    check_job(job)
    config = job.template.config
    content = None
    if job.subject is not None:
        texts = {layer_id: field_text(attr, job.subject, job.mrz, config) for attr, layer_id in config.field_bindings.items()}
        content = LayerContent(texts=texts, biometrics=dict(job.assets))
    image, log = render_layers(config, job.template.assets, content, job.post_ops, job.seed)
    return RenderResult(image, log)


def affected_region(layer: LayerSpec, sigma: float) -> Rect:
    """Bounds dilated by the blur reach: no pixel outside changes."""
    return layer.bounds.dilate(math.ceil(BLUR_TRUNCATE * sigma) if sigma > 0 else 0)
