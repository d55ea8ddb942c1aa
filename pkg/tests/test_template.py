import json
import pickle
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st
from PIL import Image

from conftest import golden
from synthpass import data_dir
from synthpass.template import (
    Canvas,
    CountryConfig,
    ImagePlacement,
    LayerSpec,
    TextStyle,
    ConfigError,
    LayerClass,
    Rect,
    derive_empty_template,
    load_config,
    validate_config,
    validate_template,
)

FONT = str(data_dir() / "fonts" / "DejaVuSans.ttf")


def minimal(tmp_path, **overrides):
    """Four layers: one logo, one static text, the surname field and the MRZ."""
    logo = np.zeros((100, 200, 4), np.uint8)
    logo[..., 2] = 180
    logo[..., 3] = 255
    Image.fromarray(logo, "RGBA").save(tmp_path / "logo.png")
    cfg = {
        "schema_version": 1,
        "country_code": "tst",
        "canvas": {"width": 1024, "height": 724, "dpi": 300},
        "field_bindings": {"surname": "surname", "mrz": "mrz"},
        "mrz_layer_id": "mrz",
        "layers": [
            {"id": "logo", "class": "LogoPattern", "z_order": 0, "bounds": [20, 20, 200, 100], "asset": "logo.png",
             "edge_blur": False},
            {"id": "title", "class": "StaticDescriptionText", "z_order": 1, "bounds": [300, 20, 500, 60],
             "text": "PASSPORT", "style": {"font_family": FONT, "font_size": 12}},
            {"id": "surname", "class": "SubjectTextField", "z_order": 2, "bounds": [300, 200, 500, 60],
             "style": {"font_family": FONT, "font_size": 10}},
            {"id": "mrz", "class": "SubjectTextField", "z_order": 3, "bounds": [20, 560, 984, 140],
             "style": {"font_family": FONT, "font_size": 9}},
        ],
    }
    for key, value in overrides.items():
        cfg[key] = value
    return cfg


def write(tmp_path, cfg):
    head = {k: v for k, v in cfg.items() if k != "layers"}
    text = json.dumps(head, indent=2)[:-2]
    rows = ",\n".join("    " + json.dumps(layer) for layer in cfg["layers"])
    path = tmp_path / "config.json"
    path.write_text(text + ',\n  "layers": [\n' + rows + "\n  ]\n}\n", encoding="utf-8")
    return path


def test_minimal_config(tmp_path):
    config = load_config(write(tmp_path, minimal(tmp_path)))
    assert (config.canvas.width, config.canvas.height, config.canvas.dpi) == (1024, 724, 300)
    assert config.country_code == "TST"
    template = derive_empty_template(config)
    assert template.rendered == ("logo", "title")
    assert template.slots == ("surname", "mrz")
    assert template.image.shape == (724, 1024, 3)
    assert validate_template(template) == []
    # logo drawn, field area untouched
    assert tuple(template.image[50, 100]) == (0, 0, 180)
    assert np.all(template.image[200:260, 300:800] == 255)


def test_out_of_bounds_names_layer_and_line(tmp_path):
    cfg = minimal(tmp_path)
    cfg["layers"][2]["bounds"] = [900, 200, 500, 60]
    path = write(tmp_path, cfg)
    with pytest.raises(ConfigError) as info:
        load_config(path)
    lines = path.read_text().splitlines()
    assert '"surname"' in lines[info.value.line - 1]
    assert "surname" in str(info.value) and f":{info.value.line}:" in str(info.value)
    assert [v.code for v in info.value.violations] == ["bounds"]


def test_shared_z_order(tmp_path):
    cfg = minimal(tmp_path)
    cfg["layers"][1]["z_order"] = 5
    cfg["layers"][2]["z_order"] = 5
    with pytest.raises(ConfigError) as info:
        load_config(write(tmp_path, cfg))
    (v,) = info.value.violations
    assert v.code == "z_order" and "title" in v.message and "surname" in v.message


def test_parse_error_line(tmp_path):
    path = tmp_path / "config.json"
    path.write_text('{\n  "schema_version": 1,\n  "layers": [,]\n}\n')
    with pytest.raises(ConfigError) as info:
        load_config(path)
    assert info.value.line == 3


def test_unknown_layer_class(tmp_path):
    cfg = minimal(tmp_path)
    cfg["layers"][1]["class"] = "Hologram"
    path = write(tmp_path, cfg)
    with pytest.raises(ConfigError, match="Hologram") as info:
        load_config(path)
    assert '"title"' in path.read_text().splitlines()[info.value.line - 1]


def test_schema_version_checked(tmp_path):
    with pytest.raises(ConfigError, match="schema_version"):
        load_config(write(tmp_path, minimal(tmp_path, schema_version=7)))


def test_dangling_and_unbound(tmp_path):
    cfg = minimal(tmp_path, field_bindings={"given_name": "nowhere", "mrz": "mrz"})
    with pytest.raises(ConfigError) as info:
        load_config(write(tmp_path, cfg))
    codes = sorted(v.code for v in info.value.violations)
    assert codes == ["dangling_binding", "unbound_field"]


def test_missing_mask_reported(tmp_path):
    cfg = minimal(tmp_path)
    cfg["layers"][0]["mask"] = "nope.png"
    config = load_config(write(tmp_path, cfg))
    (v,) = validate_template(config)
    assert v.code == "missing_asset" and v.where == "logo"


def test_derive_is_idempotent(tmp_path):
    config = load_config(write(tmp_path, minimal(tmp_path)))
    a, b = derive_empty_template(config), derive_empty_template(config)
    assert a == b and a.image_hash == b.image_hash
    assert not a.image.flags.writeable


def test_pol_layers(pol_config, pol_template):
    assert len(pol_config.layers) == 14
    assert len(pol_config.field_bindings) == 9
    counts = pol_config.class_counts()
    assert counts[LayerClass.SUBJECT_TEXT] == 9 and counts[LayerClass.BIOMETRIC] == 2
    assert counts[LayerClass.LOGO_PATTERN] == 2 and counts[LayerClass.STATIC_TEXT] == 1
    assert validate_template(pol_template) == []
    assert pol_template.image_hash == golden()["pol_empty_template"]


@pytest.mark.parametrize("code", ["esp", "prt"])
def test_other_countries_golden(data, code):
    template = derive_empty_template(load_config(data / code / "config.json"))
    assert validate_template(template) == []
    assert template.image_hash == golden()[f"{code}_empty_template"]


def test_no_logo_layers(tmp_path):
    cfg = minimal(tmp_path)
    cfg["layers"] = cfg["layers"][1:]
    template = derive_empty_template(load_config(write(tmp_path, cfg)))
    assert template.rendered == ("title",)


def test_partition_covers_all_layers(pol_template):
    ids = {layer.id for layer in pol_template.config.layers}
    assert set(pol_template.rendered) | set(pol_template.slots) == ids
    assert not set(pol_template.rendered) & set(pol_template.slots)
    for lid in pol_template.slots:
        assert pol_template.config.layer(lid).layer_class.is_subject_specific


def test_config_pickles(pol_config):
    assert pickle.loads(pickle.dumps(pol_config)) == pol_config


@given(st.integers(-50, 1100), st.integers(-50, 800), st.integers(0, 1200), st.integers(0, 900))
def test_bounds_rule(x, y, w, h):
    layer_bounds_ok = w > 0 and h > 0 and x >= 0 and y >= 0 and x + w <= 1024 and y + h <= 724
    config = CountryConfig(
        "TST",
        Canvas(1024, 724, 300),
        (
            LayerSpec("logo", LayerClass.LOGO_PATTERN, 0, Rect(x, y, w, h), ImagePlacement(asset="a.png")),
            LayerSpec("mrz", LayerClass.SUBJECT_TEXT, 1, Rect(0, 600, 1000, 100), TextStyle()),
        ),
        {"mrz": "mrz"},
        "mrz",
    )
    codes = [v.code for v in validate_config(config)]
    assert ("bounds" in codes) == (not layer_bounds_ok)


def test_scaled_config(pol_config):
    half = pol_config.scaled(0.5)
    assert half.canvas.width == round(pol_config.canvas.width / 2)
    assert half.canvas.dpi == pol_config.canvas.dpi / 2
    assert validate_config(half) == []
    assert pol_config.scaled(1) is pol_config
    with pytest.raises(ValueError):
        pol_config.scaled(0)
    assert replace(pol_config) == pol_config
