"""Synthetic subject records drawn from per-country dictionaries.

Each subject is generated from its own random stream seeded by
``(master_seed, subject_id)``, so records can be produced in any order or in
parallel and still come out identical.
"""

from __future__ import annotations

import datetime as dt
import json
import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from ._validation import Violation
from .template import DICTIONARY_CATEGORIES, CountryConfig

SUBJECT_FIELDS = (
    "subject_id",
    "given_name",
    "surname",
    "sex",
    "birth_date",
    "birth_place",
    "nationality",
    "document_number",
    "issue_date",
    "expiry_date",
    "issuing_authority",
    "personal_number",
    "face_asset",
    "signature_asset",
    "fingerprint_asset",
)
_DATE_FIELDS = ("birth_date", "issue_date", "expiry_date")
MIN_AGE, MAX_AGE = 18, 80
ISSUE_WINDOW_YEARS = 5
_UINT64 = (1 << 64) - 1


@dataclass(frozen=True)
class SubjectRecord:
    subject_id: int
    given_name: str
    surname: str
    sex: str
    birth_date: dt.date
    birth_place: str
    nationality: str
    document_number: str
    issue_date: dt.date
    expiry_date: dt.date
    issuing_authority: str
    personal_number: str | None = None
    face_asset: str | None = None
    signature_asset: str | None = None
    fingerprint_asset: str | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        out = {}
        for key in SUBJECT_FIELDS:
            value = d[key]
            out[key] = value.isoformat() if isinstance(value, dt.date) else value
        return out

    @classmethod
    def from_dict(cls, d: Mapping) -> "SubjectRecord":
        kwargs = {k: d.get(k) for k in SUBJECT_FIELDS}
        for key in _DATE_FIELDS:
            kwargs[key] = dt.date.fromisoformat(kwargs[key])
        kwargs["subject_id"] = int(kwargs["subject_id"])
        return cls(**kwargs)


@dataclass(frozen=True)
class Dictionary:
    category: str
    entries: tuple[str, ...]

    def __post_init__(self):
        if self.category not in DICTIONARY_CATEGORIES:
            raise ValueError(f"unknown dictionary category {self.category!r}")
        deduped = tuple(dict.fromkeys(e.strip() for e in self.entries if e.strip()))
        if not deduped:
            raise ValueError(f"dictionary {self.category!r} is empty")
        object.__setattr__(self, "entries", deduped)

    @classmethod
    def from_file(cls, category: str, path) -> "Dictionary":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return cls(category, tuple(line for line in lines if not line.lstrip().startswith("#")))


def load_dictionaries(config: CountryConfig) -> dict[str, Dictionary]:
    missing = [c for c in DICTIONARY_CATEGORIES if c not in config.dictionaries]
    if missing:
        raise ValueError(f"config {config.country_code} lacks dictionaries: {', '.join(missing)}")
    return {c: Dictionary.from_file(c, config.dictionaries[c]) for c in DICTIONARY_CATEGORIES}


@dataclass(frozen=True)
class AssetPools:
    """Candidate biometric asset references, assigned to subjects at random."""

    faces: tuple[str, ...] = ()
    signatures: tuple[str, ...] = ()
    fingerprints: tuple[str, ...] = ()

    @classmethod
    def from_dirs(cls, base: Path | None = None, **dirs) -> "AssetPools":
        pools = {}
        for name in ("faces", "signatures", "fingerprints"):
            d = dirs.get(name)
            if d is None:
                pools[name] = ()
                continue
            files = sorted(p for p in Path(d).iterdir() if p.suffix.lower() in (".png", ".jpg", ".jpeg"))
            pools[name] = tuple(_relative(p, base) for p in files)
        return cls(**pools)

    @classmethod
    def from_config(cls, config: CountryConfig) -> "AssetPools":
        return cls.from_dirs(config.base_dir, **dict(config.asset_pools))


def _relative(path: Path, base: Path | None) -> str:
    if base is None:
        return str(path)
    try:
        return os.path.relpath(path.resolve(), Path(base).resolve())
    except ValueError:
        return str(path.resolve())


# ---------------------------------------------------------------- document numbers

_TOKEN = re.compile(r"(\[[^\]]+\]|[A-Z0-9])(?:\{(\d+)\})?")


def _expand_class(body: str) -> str:
    chars = []
    i = 0
    while i < len(body):
        if i + 2 < len(body) and body[i + 1] == "-":
            chars.extend(chr(c) for c in range(ord(body[i]), ord(body[i + 2]) + 1))
            i += 3
        else:
            chars.append(body[i])
            i += 1
    return "".join(dict.fromkeys(chars))


def parse_number_pattern(pattern: str) -> list[str]:
    """Expand a pattern like ``[A-Z]{2}[0-9]{7}`` into one alphabet per position."""
    positions: list[str] = []
    pos = 0
    while pos < len(pattern):
        m = _TOKEN.match(pattern, pos)
        if not m:
            raise ValueError(f"unsupported document number pattern {pattern!r} at offset {pos}")
        atom, count = m.group(1), int(m.group(2) or 1)
        alphabet = _expand_class(atom[1:-1]) if atom.startswith("[") else atom
        positions.extend([alphabet] * count)
        pos = m.end()
    if not positions:
        raise ValueError("empty document number pattern")
    return positions


def number_space(pattern: str) -> int:
    total = 1
    for alphabet in parse_number_pattern(pattern):
        total *= len(alphabet)
    return total


def _draw_number(rng: np.random.Generator, positions: list[str]) -> str:
    return "".join(alphabet[rng.integers(len(alphabet))] for alphabet in positions)


# ---------------------------------------------------------------- dates


def add_years(d: dt.date, years: int) -> dt.date:
    try:
        return d.replace(year=d.year + years)
    except ValueError:  # 29 February
        return d.replace(year=d.year + years, day=28)


def age_on(birth: dt.date, on: dt.date) -> int:
    return on.year - birth.year - ((on.month, on.day) < (birth.month, birth.day))


def _uniform_date(rng: np.random.Generator, lo: dt.date, hi: dt.date) -> dt.date:
    """Uniform over the inclusive day range [lo, hi]."""
    span = (hi - lo).days
    return lo + dt.timedelta(days=int(rng.integers(span + 1)))


def pesel(birth: dt.date, sex: str, rng: np.random.Generator) -> str:
    """Polish national identification number (PESEL) for a birth date and sex."""
    month = birth.month + {18: 80, 19: 0, 20: 20, 21: 40, 22: 60}[birth.year // 100]
    serial = int(rng.integers(1000))
    sex_digit = int(rng.integers(5)) * 2 + (1 if sex == "M" else 0)
    digits = f"{birth.year % 100:02d}{month:02d}{birth.day:02d}{serial:03d}{sex_digit}"
    weights = (1, 3, 7, 9, 1, 3, 7, 9, 1, 3)
    check = (10 - sum(int(c) * w for c, w in zip(digits, weights)) % 10) % 10
    return digits + str(check)


# ---------------------------------------------------------------- generation


def _stream(seed: int, subject_id: int, purpose: int, attempt: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed & _UINT64, subject_id, purpose, attempt]))


def _gendered(entry: str, sex: str) -> str:
    # "Kowalski|Kowalska" holds male|female forms
    if "|" in entry:
        male, female = entry.split("|", 1)
        return male if sex == "M" else female
    return entry


def _draw_subject(
    subject_id: int, seed: int, config: CountryConfig, dicts: Mapping[str, Dictionary], pools: AssetPools
) -> SubjectRecord:
    rng = _stream(seed, subject_id, 0)
    sex = "M" if rng.integers(2) == 0 else "F"
    given_dict = dicts["given_male"] if sex == "M" else dicts["given_female"]
    given = given_dict.entries[rng.integers(len(given_dict.entries))]
    surname = _gendered(dicts["surname"].entries[rng.integers(len(dicts["surname"].entries))], sex)
    city = dicts["city"].entries[rng.integers(len(dicts["city"].entries))]
    authority = dicts["authority"].entries[rng.integers(len(dicts["authority"].entries))]

    ref = config.reference_date
    issue = _uniform_date(rng, add_years(ref, -ISSUE_WINDOW_YEARS), ref)
    oldest = add_years(issue, -(MAX_AGE + 1)) + dt.timedelta(days=1)
    birth = _uniform_date(rng, oldest, add_years(issue, -MIN_AGE))
    expiry = add_years(issue, config.validity_years)

    personal = None
    if config.personal_number_scheme == "pesel":
        personal = pesel(birth, sex, rng)
    elif config.personal_number_scheme not in (None, "none"):
        raise ValueError(f"unknown personal_number_scheme {config.personal_number_scheme!r}")

    def pick(pool: tuple[str, ...]) -> str | None:
        return pool[rng.integers(len(pool))] if pool else None

    face, signature, fingerprint = pick(pools.faces), pick(pools.signatures), pick(pools.fingerprints)
    number = _draw_number(_stream(seed, subject_id, 1), parse_number_pattern(config.document_number_pattern))
    return SubjectRecord(
        subject_id=subject_id,
        given_name=given,
        surname=surname,
        sex=sex,
        birth_date=birth,
        birth_place=city,
        nationality=config.nationality_code,
        document_number=number,
        issue_date=issue,
        expiry_date=expiry,
        issuing_authority=authority,
        personal_number=personal,
        face_asset=face,
        signature_asset=signature,
        fingerprint_asset=fingerprint,
    )


def _draw_star(args):
    return _draw_subject(*args)


def generate_subjects(
    n: int,
    seed: int,
    config: CountryConfig,
    dicts: Mapping[str, Dictionary],
    pools: AssetPools | None = None,
    *,
    first_id: int = 0,
    workers: int = 1,
) -> list[SubjectRecord]:
    """Generate ``n`` subjects with ids ``first_id .. first_id + n - 1``.

    Document numbers are made pairwise distinct: when a drawn number collides
    with one held by a lower subject id, the later subject redraws from its own
    number stream. The result depends only on the arguments, not on ``workers``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    missing = [c for c in DICTIONARY_CATEGORIES if c not in dicts or not dicts[c].entries]
    if missing:
        raise ValueError(f"missing dictionary categories: {', '.join(missing)}")
    positions = parse_number_pattern(config.document_number_pattern)
    space = number_space(config.document_number_pattern)
    if n > space:
        raise ValueError(f"n={n} exceeds the document number space ({space}) of {config.document_number_pattern!r}")
    pools = pools or AssetPools()

    ids = range(first_id, first_id + n)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            records = list(ex.map(_draw_star, [(i, seed, config, dicts, pools) for i in ids], chunksize=64))
    else:
        records = [_draw_subject(i, seed, config, dicts, pools) for i in ids]

    used: set[str] = set()
    out = []
    for rec in records:
        number, attempt = rec.document_number, 0
        while number in used:
            attempt += 1
            number = _draw_number(_stream(seed, rec.subject_id, 1, attempt), positions)
        used.add(number)
        out.append(rec if attempt == 0 else replace(rec, document_number=number))
    return out


def validate_subject(record: SubjectRecord, config: CountryConfig) -> list[Violation]:
    out: list[Violation] = []
    if not record.given_name or not record.surname:
        out.append(Violation("name", "given_name/surname", "names must be non-empty"))
    if record.sex not in ("M", "F"):
        out.append(Violation("sex", "sex", f"sex must be M or F, got {record.sex!r}"))
    if not re.fullmatch(r"[A-Z]{3}", record.nationality or ""):
        out.append(Violation("nationality", "nationality", f"not an alpha-3 code: {record.nationality!r}"))
    if not record.birth_date < record.issue_date:
        out.append(Violation("birth_date", "birth_date", "birth date must precede issue date"))
    expected = add_years(record.issue_date, config.validity_years)
    if record.expiry_date != expected:
        out.append(
            Violation(
                "expiry",
                "expiry_date",
                f"expiry {record.expiry_date} != issue + {config.validity_years}y ({expected})",
            )
        )
    age = age_on(record.birth_date, record.issue_date)
    if age < MIN_AGE:
        out.append(Violation("age_at_issue", "birth_date", f"age at issue {age} < {MIN_AGE}"))
    positions = parse_number_pattern(config.document_number_pattern)
    number = record.document_number or ""
    if len(number) != len(positions) or any(ch not in alpha for ch, alpha in zip(number, positions)):
        out.append(
            Violation(
                "document_number",
                "document_number",
                f"{number!r} does not match {config.document_number_pattern!r}",
            )
        )
    return out


# ---------------------------------------------------------------- manifests


def subject_line(record: SubjectRecord, mrz=None) -> str:
    d = record.to_dict()
    if mrz is not None:
        d["mrz"] = [mrz.line1, mrz.line2]
    return json.dumps(d, ensure_ascii=False)


def write_subject_manifest(path, records: Iterable[SubjectRecord], mrz: Mapping[int, object] | None = None) -> None:
    """One JSON object per line, keys in :data:`SUBJECT_FIELDS` order (+ ``mrz``)."""
    mrz = mrz or {}
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(subject_line(rec, mrz.get(rec.subject_id)) + "\n")


def read_subject_manifest(path) -> list[SubjectRecord]:
    with open(path, encoding="utf-8") as fh:
        return [SubjectRecord.from_dict(json.loads(line)) for line in fh if line.strip()]
