"""Test-data builders shared between the unit and acceptance suites."""

from synthpass.protocols import ManifestEntry


def synthetic_manifest(countries=("POL", "ESP", "PRT"), subjects_per_country=1000, shared_ids=False):
    """One bona fide, one print and one screen entry per subject."""
    entries = []
    for ci, country in enumerate(countries):
        for s in range(subjects_per_country):
            sid = s if shared_ids else ci * subjects_per_country + s
            for label, pai in (("bonafide", "none"), ("attack", "print"), ("attack", "screen")):
                entries.append(ManifestEntry(f"{country}/{pai}/{sid:05d}.png", country, sid, label, pai))
    return entries


def subject_sets(result):
    return [{e.subject_id for e in part} for part in (result.train, result.validation, result.test)]


def render_fixture_document(template, dicts, pools, seed=0, subject_id=0):
    """Render one subject of the bundled country through the public API."""
    from synthpass.compositor import RenderJob, render_document
    from synthpass.imageio import read_image
    from synthpass.mrz import build_td3
    from synthpass.subjects import generate_subjects

    config = template.config
    (subject,) = generate_subjects(1, seed, config, dicts, pools, first_id=subject_id)
    mrz = build_td3(subject, issuing_state=config.country_code)
    assets = {
        "face": read_image(config.base_dir / subject.face_asset, "RGB"),
        "signature": read_image(config.base_dir / subject.signature_asset, "RGB"),
    }
    return render_document(RenderJob(template, subject, mrz, assets, seed=seed))
