"""Country configuration files and classified layer templates.

A country template is a directory holding one JSON config plus the pre-exported
layer rasters (PNG with alpha) it references. Every layer belongs to exactly one
of four classes; subject-dependent layers are bound to :class:`SubjectRecord`
attributes through ``field_bindings``. See ``docs/config_schema.md`` for the
file format.
"""

from __future__ import annotations

import datetime as dt
import json
import re
from collections import defaultdict
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Mapping

import numpy as np

from ._validation import Violation, raster_hash

SCHEMA_VERSION = 1
DEFAULT_DPI = 600

BINDABLE_ATTRIBUTES = frozenset(
    {
        "surname",
        "given_name",
        "sex",
        "birth_date",
        "birth_place",
        "nationality",
        "document_number",
        "issue_date",
        "expiry_date",
        "issuing_authority",
        "personal_number",
        "mrz",
    }
)
BIOMETRIC_KINDS = ("face", "signature", "fingerprint")
DICTIONARY_CATEGORIES = ("given_male", "given_female", "surname", "city", "authority")


class LayerClass(str, Enum):
    STATIC_TEXT = "StaticDescriptionText"
    SUBJECT_TEXT = "SubjectTextField"
    BIOMETRIC = "BiometricArea"
    LOGO_PATTERN = "LogoPattern"

    @property
    def is_text(self) -> bool:
        return self in (LayerClass.STATIC_TEXT, LayerClass.SUBJECT_TEXT)

    @property
    def is_subject_specific(self) -> bool:
        return self in (LayerClass.SUBJECT_TEXT, LayerClass.BIOMETRIC)


@dataclass(frozen=True)
class Rect:
    x: int
    y: int
    width: int
    height: int

    @property
    def right(self) -> int:
        return self.x + self.width

    @property
    def bottom(self) -> int:
        return self.y + self.height

    @property
    def area(self) -> int:
        return max(self.width, 0) * max(self.height, 0)

    def within(self, width: int, height: int) -> bool:
        return self.x >= 0 and self.y >= 0 and self.right <= width and self.bottom <= height

    def dilate(self, r: int) -> "Rect":
        return Rect(self.x - r, self.y - r, self.width + 2 * r, self.height + 2 * r)

    def clip(self, width: int, height: int) -> "Rect":
        x0, y0 = max(self.x, 0), max(self.y, 0)
        x1, y1 = min(self.right, width), min(self.bottom, height)
        return Rect(x0, y0, max(x1 - x0, 0), max(y1 - y0, 0))

    def intersect(self, other: "Rect") -> "Rect":
        x0, y0 = max(self.x, other.x), max(self.y, other.y)
        x1, y1 = min(self.right, other.right), min(self.bottom, other.bottom)
        return Rect(x0, y0, max(x1 - x0, 0), max(y1 - y0, 0))

    def scaled(self, f: float) -> "Rect":
        x0, y0 = round(self.x * f), round(self.y * f)
        x1, y1 = round(self.right * f), round(self.bottom * f)
        return Rect(x0, y0, max(x1 - x0, 1), max(y1 - y0, 1))

    def as_list(self) -> list[int]:
        return [self.x, self.y, self.width, self.height]


@dataclass(frozen=True)
class TextStyle:
    """Text rendering attributes.

    ``font_size`` is in points and converted with the canvas DPI.
    ``kerning_offsets`` are extra pixel shifts, one per character of the
    rendered string (cumulative: shifting glyph i also shifts all later ones);
    an empty tuple means font metrics only. ``baseline_curvature`` lifts glyph i
    by ``c * (x_i - x_mid)**2`` pixels, with ``x_i`` the glyph center.
    """

    font_family: str = "default"
    font_size: float = 10.0
    kerning_offsets: tuple[float, ...] = ()
    rotation: float = 0.0
    baseline_curvature: float = 0.0
    color: tuple[int, int, int, int] = (0, 0, 0, 255)
    alignment: str = "left"
    uppercase: bool = False
    line_spacing: float = 1.25


@dataclass(frozen=True)
class ImagePlacement:
    asset: Path | None = None
    fit: str = "stretch"
    biometric: str | None = None
    edge_blur: bool = True


@dataclass(frozen=True)
class LayerSpec:
    id: str
    layer_class: LayerClass
    z_order: int
    bounds: Rect
    render_params: TextStyle | ImagePlacement
    mask_ref: Path | None = None
    opacity: float = 1.0
    text: str | None = None


@dataclass(frozen=True)
class Canvas:
    width: int
    height: int
    dpi: float = DEFAULT_DPI
    color: tuple[int, int, int] = (255, 255, 255)


class FrozenMap(Mapping):
    """Read-only mapping that, unlike ``MappingProxyType``, pickles (worker pools need that)."""

    __slots__ = ("_data",)

    def __init__(self, data=()):
        object.__setattr__(self, "_data", dict(data))

    def __getitem__(self, key):
        return self._data[key]

    def __iter__(self):
        return iter(self._data)

    def __len__(self) -> int:
        return len(self._data)

    def __repr__(self) -> str:
        return f"FrozenMap({self._data!r})"

    def __reduce__(self):
        return (FrozenMap, (self._data,))


def _frozen(mapping) -> Mapping:
    return FrozenMap(mapping)


@dataclass(frozen=True)
class CountryConfig:
    country_code: str
    canvas: Canvas
    layers: tuple[LayerSpec, ...]
    field_bindings: Mapping[str, str]
    mrz_layer_id: str
    dictionaries: Mapping[str, Path] = field(default_factory=lambda: _frozen({}))
    validity_years: int = 10
    document_number_pattern: str = "[A-Z]{2}[0-9]{7}"
    personal_number_scheme: str | None = None
    nationality: str | None = None
    date_format: str = "%d.%m.%Y"
    sex_labels: Mapping[str, str] = field(default_factory=lambda: _frozen({}))
    reference_date: dt.date = dt.date(2025, 1, 1)
    asset_pools: Mapping[str, Path] = field(default_factory=lambda: _frozen({}))
    edge_blur_sigma: float = 1.5
    schema_version: int = SCHEMA_VERSION
    base_dir: Path = Path(".")
    source: Path | None = None

    @property
    def nationality_code(self) -> str:
        return self.nationality or self.country_code

    def layer(self, layer_id: str) -> LayerSpec:
        for layer in self.layers:
            if layer.id == layer_id:
                return layer
        raise KeyError(layer_id)

    def layers_of(self, cls: LayerClass) -> list[LayerSpec]:
        return [layer for layer in self.layers if layer.layer_class is cls]

    def class_counts(self) -> dict[LayerClass, int]:
        counts = {cls: 0 for cls in LayerClass}
        for layer in self.layers:
            counts[layer.layer_class] += 1
        return counts

    def render_order(self) -> list[LayerSpec]:
        return sorted(self.layers, key=lambda layer: layer.z_order)

    def scaled(self, factor: float) -> "CountryConfig":
        """Same document at ``factor`` times the pixel resolution.

        DPI scales with the canvas so point-sized fonts keep their physical size;
        pixel kerning scales by ``factor`` and curvature (1/px) by ``1/factor``.
        """
        if factor <= 0:
            raise ValueError("scale factor must be positive")
        if factor == 1:
            return self
        canvas = replace(
            self.canvas,
            width=max(round(self.canvas.width * factor), 1),
            height=max(round(self.canvas.height * factor), 1),
            dpi=self.canvas.dpi * factor,
        )
        layers = []
        for layer in self.layers:
            params = layer.render_params
            if isinstance(params, TextStyle):
                params = replace(
                    params,
                    kerning_offsets=tuple(k * factor for k in params.kerning_offsets),
                    baseline_curvature=params.baseline_curvature / factor,
                )
            bounds = layer.bounds.scaled(factor).clip(canvas.width, canvas.height)
            layers.append(replace(layer, bounds=bounds, render_params=params))
        return replace(self, canvas=canvas, layers=tuple(layers))


class ConfigError(ValueError):
    """Raised by :func:`load_config`; carries the violations and line context."""

    def __init__(self, message: str, violations=(), line: int | None = None, path=None):
        self.violations = list(violations)
        self.line = line
        self.path = path
        where = f"{path}:{line}: " if path is not None and line is not None else ""
        super().__init__(where + message)


# ---------------------------------------------------------------- validation


def validate_config(config: CountryConfig) -> list[Violation]:
    """Structural checks that do not touch the filesystem."""
    out: list[Violation] = []
    cw, ch = config.canvas.width, config.canvas.height
    if cw <= 0 or ch <= 0 or config.canvas.dpi <= 0:
        out.append(Violation("canvas", "canvas", f"invalid canvas {cw}x{ch} @ {config.canvas.dpi}dpi"))
    if config.validity_years < 1:
        out.append(Violation("validity", "validity_years", "must be >= 1"))

    seen_ids: dict[str, int] = defaultdict(int)
    by_z: dict[int, list[str]] = defaultdict(list)
    for layer in config.layers:
        seen_ids[layer.id] += 1
        by_z[layer.z_order].append(layer.id)
        if not isinstance(layer.layer_class, LayerClass):
            out.append(Violation("layer_class", layer.id, f"unknown layer class {layer.layer_class!r}"))
            continue
        b = layer.bounds
        if b.width <= 0 or b.height <= 0 or not b.within(cw, ch):
            out.append(
                Violation(
                    "bounds",
                    layer.id,
                    f"bounds {b.as_list()} not contained in canvas {cw}x{ch}",
                )
            )
        if not 0.0 <= layer.opacity <= 1.0:
            out.append(Violation("opacity", layer.id, f"opacity {layer.opacity} outside [0, 1]"))
        params = layer.render_params
        if layer.layer_class.is_text:
            prerendered = layer.layer_class is LayerClass.STATIC_TEXT and isinstance(params, ImagePlacement)
            if not isinstance(params, TextStyle) and not prerendered:
                out.append(Violation("render_params", layer.id, "text layer needs a text style"))
            elif isinstance(params, TextStyle):
                if params.alignment not in ("left", "center", "right"):
                    out.append(Violation("render_params", layer.id, f"bad alignment {params.alignment!r}"))
                if (
                    layer.layer_class is LayerClass.STATIC_TEXT
                    and layer.text is not None
                    and params.kerning_offsets
                    and len(params.kerning_offsets) != len(layer.text.replace("\n", ""))
                ):
                    out.append(Violation("kerning", layer.id, "kerning_offsets length differs from text length"))
            if layer.layer_class is LayerClass.STATIC_TEXT and layer.text is None:
                if not isinstance(params, ImagePlacement) or params.asset is None:
                    out.append(Violation("render_params", layer.id, "static text layer needs text or an asset"))
        else:
            if not isinstance(params, ImagePlacement):
                out.append(Violation("render_params", layer.id, "image layer needs an image placement"))
            elif layer.layer_class is LayerClass.BIOMETRIC and params.biometric not in BIOMETRIC_KINDS:
                out.append(Violation("biometric", layer.id, f"biometric kind must be one of {BIOMETRIC_KINDS}"))
            elif layer.layer_class is LayerClass.LOGO_PATTERN and params.asset is None:
                out.append(Violation("render_params", layer.id, "logo/pattern layer needs an asset"))
            if isinstance(params, ImagePlacement) and params.fit not in ("stretch", "contain"):
                out.append(Violation("render_params", layer.id, f"bad fit {params.fit!r}"))

    for layer_id, count in seen_ids.items():
        if count > 1:
            out.append(Violation("duplicate_id", layer_id, f"layer id used {count} times"))
    for z, ids in sorted(by_z.items()):
        if len(ids) > 1:
            out.append(Violation("z_order", ", ".join(ids), f"layers share z_order {z}: {', '.join(ids)}"))

    ids = {layer.id: layer for layer in config.layers}
    bound_layers: dict[str, list[str]] = defaultdict(list)
    for attr, layer_id in config.field_bindings.items():
        if attr not in BINDABLE_ATTRIBUTES:
            out.append(Violation("binding", attr, f"unknown subject attribute {attr!r}"))
        target = ids.get(layer_id)
        if target is None:
            out.append(Violation("dangling_binding", attr, f"binding targets missing layer {layer_id!r}"))
        elif target.layer_class is not LayerClass.SUBJECT_TEXT:
            out.append(Violation("dangling_binding", attr, f"binding targets non-subject layer {layer_id!r}"))
        else:
            bound_layers[layer_id].append(attr)
    for layer in config.layers:
        if layer.layer_class is LayerClass.SUBJECT_TEXT:
            attrs = bound_layers.get(layer.id, [])
            if not attrs:
                out.append(Violation("unbound_field", layer.id, "subject text layer has no field binding"))
            elif len(attrs) > 1:
                out.append(Violation("binding", layer.id, f"bound more than once: {', '.join(attrs)}"))

    mrz = ids.get(config.mrz_layer_id)
    if mrz is None or mrz.layer_class is not LayerClass.SUBJECT_TEXT:
        out.append(Violation("mrz_layer", config.mrz_layer_id, "mrz_layer_id must name a SubjectTextField layer"))
    elif config.field_bindings.get("mrz") != config.mrz_layer_id:
        out.append(Violation("mrz_layer", config.mrz_layer_id, "mrz layer must be bound to attribute 'mrz'"))
    return out


def _asset_violations(config: CountryConfig) -> list[Violation]:
    out = []
    for layer in config.layers:
        if layer.mask_ref is not None and not Path(layer.mask_ref).is_file():
            out.append(Violation("missing_asset", layer.id, f"mask file not found: {layer.mask_ref}"))
        params = layer.render_params
        if isinstance(params, ImagePlacement) and params.asset is not None and not Path(params.asset).is_file():
            out.append(Violation("missing_asset", layer.id, f"asset file not found: {params.asset}"))
        if isinstance(params, TextStyle) and params.font_family != "default":
            if not Path(params.font_family).is_file():
                out.append(Violation("missing_asset", layer.id, f"font file not found: {params.font_family}"))
    return out


# ---------------------------------------------------------------- loading


def _line_of(text: str, *needles: str) -> int | None:
    for needle in needles:
        m = re.search(needle, text)
        if m:
            return text.count("\n", 0, m.start()) + 1
    return None


def _layer_line(text: str, layer_id: str) -> int | None:
    return _line_of(text, r'"id"\s*:\s*"' + re.escape(layer_id) + '"')


def _resolve(base: Path, value) -> Path | None:
    if value in (None, ""):
        return None
    p = Path(value)
    return p if p.is_absolute() else (base / p)


def _resolve_font(base: Path, value) -> str:
    if value in (None, "", "default"):
        return "default"
    return str(_resolve(base, value))


def _rect(value, where: str) -> Rect:
    if not (isinstance(value, (list, tuple)) and len(value) == 4 and all(isinstance(v, (int, float)) for v in value)):
        raise ValueError(f"{where}: bounds must be [x, y, width, height]")
    return Rect(*(int(round(v)) for v in value))


def _parse_style(raw: Mapping, base: Path) -> TextStyle:
    color = tuple(int(c) for c in raw.get("color", (0, 0, 0, 255)))
    if len(color) == 3:
        color = color + (255,)
    return TextStyle(
        font_family=_resolve_font(base, raw.get("font_family")),
        font_size=float(raw.get("font_size", 10.0)),
        kerning_offsets=tuple(float(k) for k in raw.get("kerning_offsets", ())),
        rotation=float(raw.get("rotation", 0.0)),
        baseline_curvature=float(raw.get("baseline_curvature", 0.0)),
        color=color,
        alignment=str(raw.get("alignment", "left")),
        uppercase=bool(raw.get("uppercase", False)),
        line_spacing=float(raw.get("line_spacing", 1.25)),
    )


def _parse_layer(raw: Mapping, base: Path) -> LayerSpec:
    layer_id = raw.get("id")
    if not isinstance(layer_id, str) or not layer_id:
        raise ValueError("layer without a string 'id'")
    cls_name = raw.get("class")
    try:
        cls = LayerClass(cls_name)
    except ValueError:
        raise ValueError(f"layer {layer_id!r}: unknown layer class {cls_name!r}") from None
    if "z_order" not in raw or not isinstance(raw["z_order"], int):
        raise ValueError(f"layer {layer_id!r}: integer 'z_order' required")
    bounds = _rect(raw.get("bounds"), f"layer {layer_id!r}")
    if cls.is_text and "style" in raw:
        params: TextStyle | ImagePlacement = _parse_style(raw["style"], base)
    elif cls.is_text and raw.get("asset") is None:
        params = _parse_style({}, base)
    else:
        params = ImagePlacement(
            asset=_resolve(base, raw.get("asset")),
            fit=str(raw.get("fit", "stretch")),
            biometric=raw.get("biometric"),
            edge_blur=bool(raw.get("edge_blur", True)),
        )
    return LayerSpec(
        id=layer_id,
        layer_class=cls,
        z_order=raw["z_order"],
        bounds=bounds,
        render_params=params,
        mask_ref=_resolve(base, raw.get("mask")),
        opacity=float(raw.get("opacity", 1.0)),
        text=raw.get("text"),
    )


def load_config(path) -> CountryConfig:
    """Parse and validate a country config file.

    Relative asset, font and dictionary paths resolve against the config's
    directory. Structural problems raise :class:`ConfigError` naming the layer
    (or key) and the line it appears on; missing asset files do not, they are
    reported by :func:`validate_template`.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    base = path.parent.resolve()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"parse error: {exc.msg}", line=exc.lineno, path=path) from None
    if not isinstance(raw, dict):
        raise ConfigError("top level must be an object", line=1, path=path)

    version = raw.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(
            f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})",
            line=_line_of(text, r'"schema_version"') or 1,
            path=path,
        )
    for key in ("country_code", "canvas", "layers", "field_bindings", "mrz_layer_id"):
        if key not in raw:
            raise ConfigError(f"missing required key {key!r}", line=1, path=path)

    layers = []
    for i, layer_raw in enumerate(raw["layers"]):
        try:
            layers.append(_parse_layer(layer_raw, base))
        except (ValueError, TypeError) as exc:
            lid = layer_raw.get("id") if isinstance(layer_raw, dict) else None
            line = _layer_line(text, lid) if isinstance(lid, str) else _line_of(text, r'"layers"')
            raise ConfigError(f"layer #{i}: {exc}", line=line, path=path) from None

    c = raw["canvas"]
    try:
        canvas = Canvas(
            width=int(c["width"]),
            height=int(c["height"]),
            dpi=float(c.get("dpi", DEFAULT_DPI)),
            color=tuple(int(v) for v in c.get("color", (255, 255, 255))),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad canvas: {exc}", line=_line_of(text, r'"canvas"'), path=path) from None

    ref = raw.get("reference_date", "2025-01-01")
    config = CountryConfig(
        country_code=str(raw["country_code"]).upper(),
        canvas=canvas,
        layers=tuple(layers),
        field_bindings=_frozen(raw["field_bindings"]),
        mrz_layer_id=str(raw["mrz_layer_id"]),
        dictionaries=_frozen({k: _resolve(base, v) for k, v in raw.get("dictionaries", {}).items()}),
        validity_years=int(raw.get("validity_years", 10)),
        document_number_pattern=str(raw.get("document_number_pattern", "[A-Z]{2}[0-9]{7}")),
        personal_number_scheme=raw.get("personal_number_scheme"),
        nationality=raw.get("nationality"),
        date_format=str(raw.get("date_format", "%d.%m.%Y")),
        sex_labels=_frozen(raw.get("sex_labels", {})),
        reference_date=dt.date.fromisoformat(ref),
        asset_pools=_frozen({k: _resolve(base, v) for k, v in raw.get("asset_pools", {}).items()}),
        edge_blur_sigma=float(raw.get("edge_blur_sigma", 1.5)),
        schema_version=version,
        base_dir=base,
        source=path,
    )

    violations = validate_config(config)
    if violations:
        first = violations[0]
        line = _layer_line(text, first.where.split(", ")[0]) or _line_of(
            text, r'"' + re.escape(first.where) + r'"\s*:'
        )
        detail = "; ".join(str(v) for v in violations)
        raise ConfigError(detail, violations=violations, line=line, path=path)
    return config


# ---------------------------------------------------------------- templates


@dataclass(frozen=True, eq=False)
class Template:
    """An empty document: static and logo layers rendered, subject layers as slots.

    ``image`` is the rendered empty template (H, W, 3) uint8. ``assets`` caches
    the decoded layer rasters and masks, keyed by file path.
    """

    config: CountryConfig
    image: np.ndarray
    rendered: tuple[str, ...]
    slots: tuple[str, ...]
    assets: Mapping[str, np.ndarray] = field(default_factory=lambda: _frozen({}))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Template):
            return NotImplemented
        return (
            self.config == other.config
            and self.rendered == other.rendered
            and self.slots == other.slots
            and raster_hash(self.image) == raster_hash(other.image)
        )

    __hash__ = None

    @property
    def image_hash(self) -> str:
        return raster_hash(self.image)


def derive_empty_template(config: CountryConfig) -> Template:
    """Render static-description and logo/pattern layers; keep the rest as slots."""
    from .compositor import load_layer_assets, render_layers

    problems = validate_config(config)
    if problems:
        raise ConfigError("; ".join(str(v) for v in problems), violations=problems)
    assets = load_layer_assets(config)
    image, _ = render_layers(config, assets, content=None)
    image.setflags(write=False)
    rendered = tuple(l.id for l in config.render_order() if not l.layer_class.is_subject_specific)
    slots = tuple(l.id for l in config.render_order() if l.layer_class.is_subject_specific)
    frozen_assets = {}
    for key, arr in assets.items():
        arr.setflags(write=False)
        frozen_assets[key] = arr
    return Template(config=config, image=image, rendered=rendered, slots=slots, assets=_frozen(frozen_assets))


def validate_template(template: Template | CountryConfig) -> list[Violation]:
    """Per-layer problems that would block rendering; empty means render-ready."""
    config = template.config if isinstance(template, Template) else template
    return validate_config(config) + _asset_violations(config)
