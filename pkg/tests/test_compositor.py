import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st
from PIL import ImageFont
from scipy.stats import norm

from conftest import golden
from helpers import render_fixture_document
from synthpass import data_dir
from synthpass._validation import raster_hash
from synthpass.compositor import (
    RenderJob,
    TextOverflowError,
    affected_region,
    blur_radius,
    composite_layer,
    font_pixels,
    layout_text,
    render_document,
    render_text_field,
)
from synthpass.template import LayerClass, LayerSpec, Rect, TextStyle

SANS = str(data_dir() / "fonts" / "DejaVuSans.ttf")


def text_layer(width=400, height=60, **style):
    return LayerSpec("surname", LayerClass.SUBJECT_TEXT, 1, Rect(10, 10, width, height),
                     TextStyle(font_family=SANS, font_size=10, **style))


def test_opacity_zero_is_identity(rng):
    canvas = rng.integers(0, 256, (40, 50, 3), dtype=np.uint8)
    asset = rng.integers(0, 256, (20, 20, 3), dtype=np.uint8)
    out = composite_layer(canvas, asset, np.ones((20, 20)), opacity=0.0, edge_blur_sigma=2.0, origin=(5, 5))
    assert np.array_equal(out, canvas)


def test_opacity_one_hard_replacement(rng):
    canvas = rng.integers(0, 256, (40, 50, 3), dtype=np.uint8)
    asset = rng.integers(0, 256, (20, 25, 3), dtype=np.uint8)
    out = composite_layer(canvas, asset, np.ones((20, 25)), opacity=1.0, edge_blur_sigma=0.0, origin=(10, 7))
    assert np.array_equal(out[7:27, 10:35], asset)
    outside = np.ones((40, 50), bool)
    outside[7:27, 10:35] = False
    assert np.array_equal(out[outside], canvas[outside])


def test_blurred_step_follows_gaussian_cdf():
    sigma = 1.5
    canvas = np.zeros((100, 100, 3), np.float32)
    asset = np.full((100, 50, 3), 255.0, np.float32)
    out = composite_layer(canvas, asset, np.ones((100, 50)), opacity=1.0, edge_blur_sigma=sigma, origin=(50, 0))
    row = out[50, :, 0] / 255.0
    # the alpha edge lies between columns 49 and 50
    assert row[49] < 0.5 < row[50]
    x = np.arange(35, 65)  # away from the asset's far edge at column 99
    expected = norm.cdf((x - 49.5) / sigma)
    assert np.max(np.abs(row[35:65] - expected)) < 0.02
    assert np.all(np.diff(row[:90]) >= -1e-6)


def test_blur_radius_bound():
    for sigma in (0.0, 0.3, 1.0, 1.5, 2.2, 4.0):
        assert blur_radius(sigma) <= math.ceil(3 * sigma)


@given(
    x=st.integers(-15, 60), y=st.integers(-15, 45), w=st.integers(1, 30), h=st.integers(1, 30),
    sigma=st.sampled_from([0.0, 0.5, 1.0, 1.5, 2.5]), opacity=st.floats(0.05, 1.0),
)
def test_changes_stay_inside_dilated_bounds(x, y, w, h, sigma, opacity):
    canvas = np.full((50, 70, 3), 30, np.uint8)
    asset = np.full((h, w, 3), 220, np.uint8)
    out = composite_layer(canvas, asset, np.ones((h, w)), opacity=opacity, edge_blur_sigma=sigma, origin=(x, y))
    reach = math.ceil(3 * sigma)
    inside = np.zeros((50, 70), bool)
    inside[max(y - reach, 0) : max(y + h + reach, 0), max(x - reach, 0) : max(x + w + reach, 0)] = True
    assert np.array_equal(out[~inside], canvas[~inside])


def test_affected_region_dilates_by_ceil_3_sigma():
    layer = text_layer()
    r = affected_region(layer, 1.2)
    assert r == Rect(10 - 4, 10 - 4, 400 + 8, 60 + 8)


def test_order_matters():
    canvas = np.zeros((20, 20, 3), np.uint8)
    red = np.zeros((10, 10, 3), np.uint8)
    red[..., 0] = 255
    blue = np.zeros((10, 10, 3), np.uint8)
    blue[..., 2] = 255
    m = np.ones((10, 10))
    ab = composite_layer(composite_layer(canvas, red, m, 0.6), blue, m, 0.6, origin=(5, 5))
    ba = composite_layer(composite_layer(canvas, blue, m, 0.6, origin=(5, 5)), red, m, 0.6)
    assert not np.array_equal(ab, ba)
    assert np.array_equal(ab[:5, :5], ba[:5, :5])


def test_asset_alpha_used_without_mask():
    canvas = np.zeros((4, 4, 3), np.uint8)
    asset = np.zeros((4, 4, 4), np.uint8)
    asset[..., :3] = 200
    asset[:2, :, 3] = 255
    out = composite_layer(canvas, asset)
    assert out[0, 0, 0] == 200 and out[3, 3, 0] == 0


def test_bad_inputs():
    canvas = np.zeros((4, 4, 3), np.uint8)
    with pytest.raises(ValueError):
        composite_layer(canvas, np.zeros((2, 2, 3)), opacity=1.5)
    with pytest.raises(ValueError):
        composite_layer(canvas, np.zeros((2, 2, 3)), mask=np.ones((3, 3)))


def test_identity_layout_uses_font_advances():
    style = TextStyle(font_family=SANS, font_size=10)
    layout = layout_text("KOWALSKA", style, 600, (800, 100))
    font = ImageFont.truetype(SANS, size=font_pixels(style, 600))
    pen = 0.0
    for g in layout.glyphs:
        assert g.x == pytest.approx(pen, abs=1e-9)
        pen += font.getlength(g.char)
    assert layout.width == pytest.approx(pen)
    assert len({g.baseline for g in layout.glyphs}) == 1


def test_kerning_offsets_are_cumulative():
    offsets = (0.0, 2.0, -1.0, 3.0)
    plain = layout_text("ABCD", TextStyle(font_family=SANS), 300, (400, 80))
    kerned = layout_text("ABCD", TextStyle(font_family=SANS, kerning_offsets=offsets), 300, (400, 80))
    for i, (a, b) in enumerate(zip(plain.glyphs, kerned.glyphs)):
        assert b.x - a.x == pytest.approx(sum(offsets[: i + 1]))


def test_curvature_closed_form():
    c = 0.002
    flat = layout_text("CURVATURE", TextStyle(font_family=SANS), 300, (600, 80))
    bent = layout_text("CURVATURE", TextStyle(font_family=SANS, baseline_curvature=c), 300, (600, 80))
    mid = flat.width / 2.0
    for f, b in zip(flat.glyphs, bent.glyphs):
        assert f.baseline - b.baseline == pytest.approx(c * (f.x + f.advance / 2.0 - mid) ** 2)


def test_text_overflow_leaves_canvas_alone():
    canvas = np.full((100, 200, 3), 255, np.uint8)
    before = canvas.copy()
    layer = text_layer(width=60)
    with pytest.raises(TextOverflowError) as info:
        render_text_field(canvas, layer, "WISNIEWSKA-KOWALCZYK", dpi=300)
    assert info.value.layer_id == "surname" and info.value.measured > 60
    assert np.array_equal(canvas, before)


def test_text_field_draws_inside_bounds():
    canvas = np.full((100, 450, 3), 255, np.uint8)
    out = render_text_field(canvas, text_layer(), "NOWAK", dpi=300)
    changed = np.any(out != canvas, axis=2)
    ys, xs = np.nonzero(changed)
    assert changed.any()
    assert xs.min() >= 10 and xs.max() < 410 and ys.min() >= 10 and ys.max() < 70


def test_text_field_rejects_non_text_layer():
    layer = replace(text_layer(), layer_class=LayerClass.BIOMETRIC)
    with pytest.raises(ValueError):
        render_text_field(np.zeros((10, 10, 3), np.uint8), layer, "X")


def test_empty_subject_renders_template(pol_template):
    result = render_document(RenderJob(pol_template, None))
    assert np.array_equal(result.image, pol_template.image)


def test_document_is_deterministic_and_golden(pol_template, pol_dicts, pol_pools):
    a = render_document_hash(pol_template, pol_dicts, pol_pools)
    b = render_document_hash(pol_template, pol_dicts, pol_pools)
    assert a == b == golden()["pol_document_seed0"]


def render_document_hash(template, dicts, pools):
    return raster_hash(render_fixture_document(template, dicts, pools).image)


def test_render_log_lists_every_layer(pol_template, pol_dicts, pol_pools):
    result = render_fixture_document(pol_template, pol_dicts, pol_pools)
    ids = [entry["layer_id"] for entry in result.log]
    assert ids == [layer.id for layer in pol_template.config.render_order()]
    assert all(entry["ops"] != ["skip"] for entry in result.log)
