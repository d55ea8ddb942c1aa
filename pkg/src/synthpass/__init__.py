"""Synthetic passport generation and presentation attack detection evaluation."""

from importlib import resources
from pathlib import Path

__version__ = "0.1.0"


def data_dir() -> Path:
    """Directory holding the bundled country templates and fixtures."""
    return Path(str(resources.files(__name__) / "data"))


from .compositor import RenderJob, composite_layer, render_document, render_text_field  # noqa: E402
from .face import FaceQualityFilter, assess, crop_icao, rank_and_select, signature_extract  # noqa: E402
from .metrics import PadEvaluator, ScoreSet, apcer, bpcer, bpcer_at_apcer, det_curve, eer  # noqa: E402
from .mrz import build_td3, check_digit, encode_name, validate_td3  # noqa: E402
from .patterns import PaletteEstimator, contour_components, estimate_palette, threshold_extract  # noqa: E402
from .protocols import split_intra, split_loo  # noqa: E402
from .subjects import generate_subjects, validate_subject  # noqa: E402
from .template import derive_empty_template, load_config, validate_template  # noqa: E402

__all__ = [
    "PadEvaluator",
    "FaceQualityFilter",
    "PaletteEstimator",
    "RenderJob",
    "ScoreSet",
    "apcer",
    "assess",
    "bpcer",
    "bpcer_at_apcer",
    "build_td3",
    "check_digit",
    "composite_layer",
    "contour_components",
    "crop_icao",
    "data_dir",
    "derive_empty_template",
    "det_curve",
    "eer",
    "encode_name",
    "estimate_palette",
    "generate_subjects",
    "load_config",
    "rank_and_select",
    "render_document",
    "render_text_field",
    "signature_extract",
    "split_intra",
    "split_loo",
    "threshold_extract",
    "validate_subject",
    "validate_td3",
]
