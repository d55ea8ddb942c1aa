"""Recompute tests/golden/hashes.json from the bundled fixtures.

Run only after an intentional rendering change; the hashes depend on the
installed Pillow and FreeType builds.
"""

import json
import sys
from pathlib import Path

import PIL
from PIL import features

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "tests"))

from helpers import render_fixture_document  # noqa: E402
from synthpass import data_dir  # noqa: E402
from synthpass._validation import raster_hash  # noqa: E402
from synthpass.subjects import AssetPools, load_dictionaries  # noqa: E402
from synthpass.template import derive_empty_template, load_config  # noqa: E402


def main():
    out = {"pillow": PIL.__version__, "freetype": features.version("freetype2")}
    for code in ("pol", "esp", "prt"):
        config = load_config(data_dir() / code / "config.json")
        template = derive_empty_template(config)
        out[f"{code}_empty_template"] = template.image_hash
        if code == "pol":
            result = render_fixture_document(template, load_dictionaries(config), AssetPools.from_config(config))
            out["pol_document_seed0"] = raster_hash(result.image)
    path = ROOT / "tests" / "golden" / "hashes.json"
    path.write_text(json.dumps(out, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(path)


if __name__ == "__main__":
    main()
