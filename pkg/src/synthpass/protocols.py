"""Dataset manifests and subject-disjoint splits (intra-dataset and leave-one-out).

Manifest files are UTF-8 CSV with the header ``path,country,subject_id,label,pai,device``
(``device`` is optional free text). ``subject_id`` is the identity key: all
entries sharing it always land in the same partition.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

LABELS = ("bonafide", "attack")
PAIS = ("none", "print", "screen")
MANIFEST_COLUMNS = ("path", "country", "subject_id", "label", "pai", "device")


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    country: str
    subject_id: int
    label: str
    pai: str = "none"
    device: str = ""

    def __post_init__(self):
        if self.label not in LABELS:
            raise ManifestError(f"{self.path}: label must be one of {LABELS}, got {self.label!r}")
        if self.pai not in PAIS:
            raise ManifestError(f"{self.path}: pai must be one of {PAIS}, got {self.pai!r}")
        if (self.label == "bonafide") != (self.pai == "none"):
            raise ManifestError(f"{self.path}: label={self.label} is inconsistent with pai={self.pai}")


@dataclass
class SplitResult:
    train: list[ManifestEntry]
    validation: list[ManifestEntry]
    test: list[ManifestEntry]
    excluded: list[tuple[ManifestEntry, str]] = field(default_factory=list)

    def partitions(self) -> dict[str, list[ManifestEntry]]:
        return {"train": self.train, "validation": self.validation, "test": self.test}

    def sizes(self) -> tuple[int, int, int]:
        return len(self.train), len(self.validation), len(self.test)


# ---------------------------------------------------------------- io


def read_manifest(path) -> list[ManifestEntry]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ManifestError(f"{path}:1: empty manifest") from None
        header = [h.strip() for h in header]
        required = MANIFEST_COLUMNS[:5]
        missing = [c for c in required if c not in header]
        if missing:
            raise ManifestError(f"{path}:1: missing columns {missing}")
        idx = {name: header.index(name) for name in header}
        out = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                out.append(
                    ManifestEntry(
                        path=row[idx["path"]],
                        country=row[idx["country"]].strip().upper(),
                        subject_id=int(row[idx["subject_id"]]),
                        label=row[idx["label"]].strip(),
                        pai=row[idx["pai"]].strip(),
                        device=row[idx["device"]] if "device" in idx and idx["device"] < len(row) else "",
                    )
                )
            except (IndexError, ValueError) as exc:
                raise ManifestError(f"{path}:{lineno}: {exc}") from None
    return out


def write_manifest(path, entries: Iterable[ManifestEntry]) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MANIFEST_COLUMNS)
        for e in entries:
            w.writerow([e.path, e.country, e.subject_id, e.label, e.pai, e.device])


def write_exclusions(path, excluded: Sequence[tuple[ManifestEntry, str]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MANIFEST_COLUMNS + ("reason",))
        for e, reason in excluded:
            w.writerow([e.path, e.country, e.subject_id, e.label, e.pai, e.device, reason])


# ---------------------------------------------------------------- splitting


def allocate(n_groups: int, ratios: Sequence[float]) -> list[int]:
    """Integer group counts per partition by largest remainder, at least one each.

    Every count stays within one group of ``ratio * n_groups``.
    """
    quotas = [r * n_groups for r in ratios]
    counts = [math.floor(q) for q in quotas]
    for i, r in enumerate(ratios):
        if r > 0 and counts[i] == 0:
            counts[i] = 1
    while sum(counts) > n_groups:
        # take back from the partition furthest above its quota
        i = max(range(len(counts)), key=lambda j: (counts[j] - quotas[j], -j))
        counts[i] -= 1
    while sum(counts) < n_groups:
        i = max(range(len(counts)), key=lambda j: (quotas[j] - counts[j], -j))
        counts[i] += 1
    return counts


def _shuffled_subjects(entries: Sequence[ManifestEntry], seed: int) -> list[int]:
    subjects = sorted({e.subject_id for e in entries})
    rng = np.random.default_rng(seed)
    return [subjects[i] for i in rng.permutation(len(subjects))]


def _check_disjoint(entries: Sequence[ManifestEntry]) -> None:
    seen = set()
    for e in entries:
        if e.path in seen:
            raise ManifestError(f"duplicate path in manifest: {e.path}")
        seen.add(e.path)


def split_intra(entries: Sequence[ManifestEntry], ratios=(0.6, 0.2, 0.2), seed: int = 0) -> SplitResult:
    """Subject-grouped train/validation/test split at ``ratios``."""
    if len(ratios) != 3 or any(r < 0 for r in ratios) or not math.isclose(sum(ratios), 1.0, abs_tol=1e-9):
        raise ManifestError(f"ratios must be three non-negative fractions summing to 1, got {ratios}")
    if not entries:
        raise ManifestError("empty manifest")
    _check_disjoint(entries)
    subjects = _shuffled_subjects(entries, seed)
    if len(subjects) < 3:
        raise ManifestError(f"need at least 3 subjects for a three-way split, got {len(subjects)}")
    n_train, n_val, _ = allocate(len(subjects), ratios)
    part = {}
    for i, s in enumerate(subjects):
        part[s] = 0 if i < n_train else (1 if i < n_train + n_val else 2)
    buckets: list[list[ManifestEntry]] = [[], [], []]
    for e in entries:
        buckets[part[e.subject_id]].append(e)
    return SplitResult(*buckets)


def split_loo(
    entries: Sequence[ManifestEntry],
    test_country: str,
    test_pai: str,
    val_fraction: float = 0.2,
    seed: int = 0,
) -> SplitResult:
    """Hold out one country; test on its bona fide plus one attack species.

    The other species of the test country goes to ``excluded``. Remaining
    countries are split by subject into train and validation. Entries of other
    countries whose subject also appears in the test set are excluded too, so
    partitions stay subject-disjoint.
    """
    if test_pai not in ("print", "screen"):
        raise ManifestError(f"test_pai must be 'print' or 'screen', got {test_pai!r}")
    if not 0.0 <= val_fraction < 1.0:
        raise ManifestError("val_fraction must be in [0, 1)")
    _check_disjoint(entries)
    test_country = test_country.upper()
    countries = {e.country for e in entries}
    if test_country not in countries:
        raise ManifestError(f"test country {test_country} not present in manifest")
    if len(countries) < 2:
        raise ManifestError("leave-one-out needs at least one country besides the test country")

    test, excluded, rest = [], [], []
    for e in entries:
        if e.country == test_country:
            if e.label == "bonafide" or e.pai == test_pai:
                test.append(e)
            else:
                excluded.append((e, f"pai {e.pai} not under test"))
        else:
            rest.append(e)
    if not test:
        raise ManifestError("test set is empty")
    test_subjects = {e.subject_id for e in test}
    pool = []
    for e in rest:
        if e.subject_id in test_subjects:
            excluded.append((e, "subject also in test set"))
        else:
            pool.append(e)

    train, val = [], []
    if pool:
        subjects = _shuffled_subjects(pool, seed)
        if val_fraction > 0 and len(subjects) >= 2:
            n_train, n_val = allocate(len(subjects), (1.0 - val_fraction, val_fraction))
        else:
            n_train, n_val = len(subjects), 0
        val_set = set(subjects[n_train : n_train + n_val])
        for e in pool:
            (val if e.subject_id in val_set else train).append(e)
    return SplitResult(train, val, test, excluded)
