"""Command-line front end: ``synthpass generate | filter | split | evaluate | inspect``.

Results go to files (and the evaluate report to stdout); diagnostics go to
stderr. Exit status is 0 iff no errors occurred. A config argument may be a
path to a ``config.json`` or a country code, looked up first under
``$SYNTHPASS_CONFIG_DIR/<code>/config.json`` and then in the bundled data.
"""

from __future__ import annotations

import hashlib
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import __version__, data_dir
from ._validation import file_hash
from .compositor import RenderJob, render_document
from .imageio import encode_png, read_image, write_png
from .metrics import ScoreFileError, compute_metrics, det_table, read_score_file
from .mrz import build_td3, validate_td3
from .protocols import (
    ManifestEntry,
    ManifestError,
    read_manifest,
    split_intra,
    split_loo,
    write_exclusions,
    write_manifest,
)
from .subjects import AssetPools, SubjectRecord, generate_subjects, load_dictionaries, validate_subject
from .template import ConfigError, derive_empty_template, load_config, validate_template

CONFIG_ENV = "SYNTHPASS_CONFIG_DIR"


class CommandError(click.ClickException):
    """Reported on stderr with exit status 1."""


def warn(message: str) -> None:
    click.echo(message, err=True)


def resolve_config(value: str) -> Path:
    p = Path(value)
    if p.is_dir():
        p = p / "config.json"
    if p.is_file():
        return p
    roots = [Path(os.environ[CONFIG_ENV])] if os.environ.get(CONFIG_ENV) else []
    roots.append(data_dir())
    for root in roots:
        candidate = root / value.lower() / "config.json"
        if candidate.is_file():
            return candidate
    raise CommandError(f"config {value!r} is neither a file nor a known country code (searched {', '.join(map(str, roots))})")


def _load(value: str):
    path = resolve_config(value)
    try:
        return load_config(path)
    except ConfigError as exc:
        raise CommandError(str(exc)) from None


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _versions() -> dict:
    import cv2
    import PIL
    import scipy
    import sklearn

    return {
        "synthpass": __version__,
        "python": "%d.%d.%d" % sys.version_info[:3],
        "numpy": np.__version__,
        "Pillow": PIL.__version__,
        "opencv": cv2.__version__,
        "scipy": scipy.__version__,
        "scikit-learn": sklearn.__version__,
    }


@click.group()
@click.version_option(__version__, prog_name="synthpass")
def main():
    """Synthetic passport generation and PAD evaluation toolkit."""


# ---------------------------------------------------------------- generate

_WORKER: dict = {}


def _init_worker(config_paths: list[str], scale: float) -> None:
    _WORKER.clear()
    for path in config_paths:
        config = load_config(path).scaled(scale)
        _WORKER[config.country_code] = derive_empty_template(config)


def _render_one(country: str, subject, seed: int):
    """Render one document; returns (png bytes, mrz lines, log) or raises with the subject id."""
    template = _WORKER[country]
    config = template.config
    try:
        mrz = build_td3(subject, issuing_state=config.country_code)
        assets = {}
        for kind, ref in (("face", subject.face_asset), ("signature", subject.signature_asset),
                          ("fingerprint", subject.fingerprint_asset)):
            if ref is not None:
                assets[kind] = read_image(config.base_dir / ref, "RGB")
        result = render_document(RenderJob(template, subject, mrz, assets, seed=seed ^ subject.subject_id))
        return encode_png(result.image), [mrz.line1, mrz.line2], result.log
    except Exception as exc:  # noqa: BLE001 - reported with the subject id
        raise RuntimeError(f"{country} subject {subject.subject_id}: {type(exc).__name__}: {exc}") from exc


def _render_star(args):
    return _render_one(*args)


@main.command()
@click.option("--config", "configs", multiple=True, required=True, help="Config path or country code; repeatable.")
@click.option("-n", "--count", "n", type=click.IntRange(min=1), required=True, help="Documents per country.")
@click.option("--seed", type=int, default=0, show_default=True, help="Master seed.")
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), required=True, help="Output directory.")
@click.option("--workers", type=click.IntRange(min=1), default=1, show_default=True, help="Worker processes.")
@click.option("--scale", type=click.FloatRange(min=0.05, max=4.0), default=1.0, show_default=True,
              help="Canvas resolution factor (0.5 = half resolution).")
@click.option("--subject-scope", type=click.Choice(["per-country", "shared"]), default="per-country", show_default=True,
              help="per-country: disjoint subject ids per country; shared: the same ids in every country.")
def generate(configs, n, seed, out, workers, scale, subject_scope):
    """Generate subjects and render bona fide documents."""
    paths = [resolve_config(c) for c in configs]
    loaded = []
    for path in paths:
        try:
            config = load_config(path)
        except ConfigError as exc:
            raise CommandError(str(exc)) from None
        problems = validate_template(config)
        if problems:
            raise CommandError(f"{path}: " + "; ".join(str(v) for v in problems))
        loaded.append((path, config))
    codes = [c.country_code for _, c in loaded]
    if len(set(codes)) != len(codes):
        raise CommandError(f"duplicate country in --config: {', '.join(codes)}")

    out.mkdir(parents=True, exist_ok=True)
    (out / "images").mkdir(exist_ok=True)
    subjects, jobs = [], []
    receipt_configs = {}
    for ci, (path, config) in enumerate(loaded):
        dicts = load_dictionaries(config)
        pools = AssetPools.from_config(config)
        first_id = ci * n if subject_scope == "per-country" else 0
        try:
            records = generate_subjects(n, seed, config, dicts, pools, first_id=first_id, workers=workers)
        except ValueError as exc:
            raise CommandError(f"{config.country_code}: {exc}") from None
        for rec in records:
            subjects.append((config.country_code, rec))
            jobs.append((config.country_code, rec, seed))
        receipt_configs[config.country_code] = {
            "config": str(path),
            "config_sha256": file_hash(path),
            "dictionaries": {cat: file_hash(p) for cat, p in sorted(config.dictionaries.items())},
        }

    init_args = ([str(p) for p, _ in loaded], scale)
    try:
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker, initargs=init_args) as ex:
                rendered = list(ex.map(_render_star, jobs, chunksize=4))
        else:
            _init_worker(*init_args)
            rendered = [_render_one(*job) for job in jobs]
    except RuntimeError as exc:
        raise CommandError(f"generation aborted: {exc}") from None

    entries, image_hashes, mrz_by_key = [], {}, {}
    with open(out / "render_log.jsonl", "w", encoding="utf-8") as log_fh:
        for (country, rec), (png, mrz, log) in zip(subjects, rendered):
            rel = f"images/{country}_{rec.subject_id:05d}.png"
            (out / rel).write_bytes(png)
            image_hashes[rel] = _sha256(png)
            mrz_by_key[(country, rec.subject_id)] = mrz
            entries.append(ManifestEntry(rel, country, rec.subject_id, "bonafide", "none", "render"))
            for row in log:
                row = {k: v for k, v in row.items() if k != "ms"}  # timings would break byte-identical reruns
                log_fh.write(json.dumps({"image": rel, **row}, sort_keys=True) + "\n")

    write_manifest(out / "manifest.csv", entries)
    with open(out / "subjects.jsonl", "w", encoding="utf-8") as fh:
        for country, rec in subjects:
            line = {"country": country, **rec.to_dict(), "mrz": mrz_by_key[(country, rec.subject_id)]}
            fh.write(json.dumps(line, ensure_ascii=False) + "\n")

    receipt = {
        "seed": seed,
        "count_per_country": n,
        "scale": scale,
        "subject_scope": subject_scope,
        "countries": receipt_configs,
        "versions": _versions(),
        "outputs": {
            "manifest.csv": file_hash(out / "manifest.csv"),
            "subjects.jsonl": file_hash(out / "subjects.jsonl"),
            "images_digest": _sha256("\n".join(f"{k} {v}" for k, v in sorted(image_hashes.items())).encode()),
        },
        "images": dict(sorted(image_hashes.items())),
    }
    (out / "receipt.json").write_text(json.dumps(receipt, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    warn(f"rendered {len(entries)} documents for {', '.join(codes)} into {out}")


# ---------------------------------------------------------------- filter


def _parse_size(value: str) -> tuple[int, int]:
    try:
        w, h = (int(v) for v in value.lower().split("x"))
    except ValueError:
        raise click.BadParameter("expected WIDTHxHEIGHT, e.g. 413x531") from None
    if w < 8 or h < 8:
        raise click.BadParameter("crop size too small")
    return w, h


@main.command(name="filter")
@click.argument("candidates", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), required=True)
@click.option("-k", type=click.IntRange(min=1), default=3, show_default=True, help="Images kept per subject.")
@click.option("--crop-size", default="413x531", show_default=True, help="ICAO crop WIDTHxHEIGHT in pixels.")
@click.option("--min-bbox", type=float, default=180, show_default=True)
@click.option("--min-eye-ratio", type=float, default=0.12, show_default=True)
@click.option("--min-margin", type=float, default=0.10, show_default=True)
@click.option("--min-sharpness", type=float, default=10.0, show_default=True)
def filter_cmd(candidates, out, k, crop_size, min_bbox, min_eye_ratio, min_margin, min_sharpness):
    """Rank candidate face images per subject directory and keep the top k as ICAO crops.

    CANDIDATES holds one subdirectory per subject; each image needs a
    ``<stem>.landmarks.json`` sidecar.
    """
    from .face import QualityThresholds, SidecarLandmarkProvider, crop_icao, rank_and_select

    size = _parse_size(crop_size)
    try:
        thresholds = QualityThresholds(min_bbox, min_eye_ratio, min_margin, min_sharpness)
    except ValueError as exc:
        raise click.BadParameter(str(exc)) from None
    provider = SidecarLandmarkProvider()
    out.mkdir(parents=True, exist_ok=True)
    report, errors = {}, 0
    subject_dirs = sorted(p for p in candidates.iterdir() if p.is_dir())
    if not subject_dirs:
        raise CommandError(f"no subject directories under {candidates}")
    for sdir in subject_dirs:
        files = sorted(p for p in sdir.iterdir() if p.suffix.lower() in (".png", ".jpg", ".jpeg"))
        cands, names = [], []
        for f in files:
            try:
                cands.append((read_image(f, "RGB"), provider(f)))
                names.append(f.name)
            except (OSError, KeyError, ValueError) as exc:
                warn(f"error: {f}: {exc}")
                errors += 1
        if not cands:
            warn(f"warning: {sdir.name}: no usable candidates")
            report[sdir.name] = {"selected": [], "flags": ["no usable candidates"], "candidates": {}}
            continue
        sel = rank_and_select(cands, thresholds, k)
        kept = []
        for rank, idx in enumerate(sel.indices):
            name = f"{sdir.name}_r{rank}.png"
            write_png(out / name, crop_icao(cands[idx][0], cands[idx][1], out_size=size))
            kept.append({"rank": rank, "source": names[idx], "output": name})
        for flag in sel.flags:
            warn(f"warning: {sdir.name}: {flag}")
        report[sdir.name] = {
            "selected": kept,
            "flags": sel.flags,
            "candidates": {names[i]: r.to_dict() for i, r in enumerate(sel.reports)},
        }
    (out / "filter_report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    if errors:
        raise CommandError(f"{errors} candidate image(s) could not be assessed")


# ---------------------------------------------------------------- split


def _parse_ratios(value: str) -> tuple[float, float, float]:
    try:
        parts = tuple(float(v) for v in value.split(","))
    except ValueError:
        raise click.BadParameter("expected three comma-separated fractions") from None
    if len(parts) != 3:
        raise click.BadParameter("expected three comma-separated fractions")
    return parts


@main.command()
@click.argument("manifest", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--mode", type=click.Choice(["intra", "loo"]), required=True)
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--ratios", default="0.6,0.2,0.2", show_default=True, help="intra: train,validation,test fractions.")
@click.option("--test-country", help="loo: held-out country code.")
@click.option("--test-pai", type=click.Choice(["print", "screen"]), help="loo: attack species under test.")
@click.option("--val-fraction", type=float, default=0.2, show_default=True, help="loo: validation share of the rest.")
def split(manifest, mode, out, seed, ratios, test_country, test_pai, val_fraction):
    """Subject-disjoint train/validation/test split of a manifest."""
    try:
        entries = read_manifest(manifest)
        if mode == "intra":
            result = split_intra(entries, _parse_ratios(ratios), seed=seed)
        else:
            if not test_country or not test_pai:
                raise click.UsageError("--mode loo needs --test-country and --test-pai")
            result = split_loo(entries, test_country, test_pai, val_fraction=val_fraction, seed=seed)
    except ManifestError as exc:
        raise CommandError(str(exc)) from None
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(out / "train.csv", result.train)
    write_manifest(out / "val.csv", result.validation)
    write_manifest(out / "test.csv", result.test)
    if mode == "loo":
        write_exclusions(out / "excluded.csv", result.excluded)
    tr, va, te = result.sizes()
    warn(f"train={tr} validation={va} test={te}" + (f" excluded={len(result.excluded)}" if mode == "loo" else ""))


# ---------------------------------------------------------------- evaluate


@main.command()
@click.argument("scores", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--pai", "pai_mode", default="worst", show_default=True,
              help="PAI selection: worst, all, or a species name (print, screen).")
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), required=True)
def evaluate(scores, pai_mode, out):
    """EER, BPCER10/20/100 and per-PAI APCER for a score file; writes metrics.json and det.csv."""
    try:
        score_set = read_score_file(scores)
    except ScoreFileError as exc:
        raise CommandError(f"{scores}: {exc}") from None
    try:
        score_set.require_both_classes()
        metrics = compute_metrics(score_set, pai_mode)
    except ValueError as exc:
        raise CommandError(f"{scores}: {exc}") from None
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.json").write_text(json.dumps(metrics.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    (out / "det.csv").write_text(det_table(metrics.det_points), encoding="utf-8")
    click.echo(metrics.to_text(), nl=False)
    for name, op in metrics.operating_points.items():
        if not op.attainable:
            warn(f"warning: {name} is not attainable with the available attack samples")


# ---------------------------------------------------------------- inspect


@main.command()
@click.argument("config")
@click.option("--subjects", "subjects_file", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="Also validate a subjects.jsonl (records and MRZ) against the config.")
@click.option("--empty", "empty_png", type=click.Path(dir_okay=False, path_type=Path),
              help="Write the empty template image here.")
def inspect(config, subjects_file, empty_png):
    """Validate a country config (and optionally generated subjects); print a layer table."""
    cfg = _load(config)
    problems = validate_template(cfg)
    click.echo(f"{cfg.country_code}  canvas {cfg.canvas.width}x{cfg.canvas.height} @ {cfg.canvas.dpi:g} dpi  "
               f"{len(cfg.layers)} layers  validity {cfg.validity_years}y")
    for layer in cfg.render_order():
        bound = [a for a, lid in cfg.field_bindings.items() if lid == layer.id]
        click.echo(f"  z={layer.z_order:<3} {layer.id:<22} {layer.layer_class.value:<22} {layer.bounds.as_list()}"
                   + (f"  <- {bound[0]}" if bound else ""))
    counts = ", ".join(f"{cls.value}={n}" for cls, n in cfg.class_counts().items())
    click.echo(f"  classes: {counts}")
    for v in problems:
        warn(f"error: {v}")
    errors = len(problems)

    if empty_png is not None and not problems:
        write_png(empty_png, derive_empty_template(cfg).image)

    if subjects_file is not None:
        checked = 0
        with open(subjects_file, encoding="utf-8") as fh:
            rows = [json.loads(line) for line in fh if line.strip()]
        for row in rows:
            if row.get("country", cfg.country_code) != cfg.country_code:
                continue
            record = SubjectRecord.from_dict(row)
            checked += 1
            for v in validate_subject(record, cfg):
                warn(f"error: subject {record.subject_id}: {v}")
                errors += 1
            if "mrz" in row:
                for v in validate_td3(*row["mrz"]):
                    warn(f"error: subject {record.subject_id}: mrz {v}")
                    errors += 1
        click.echo(f"  subjects checked: {checked}")
    if errors:
        raise CommandError(f"{errors} problem(s) found")


if __name__ == "__main__":  # pragma: no cover
    main()
