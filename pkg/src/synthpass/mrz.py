"""ICAO 9303 TD3 (passport) machine-readable zone: encoding, check digits, validation.

Line layout (1-based positions)::

    line 1: P | type | issuing state (3-5) | name field (6-44)
    line 2: document number (1-9) | cd (10) | nationality (11-13)
            | birth YYMMDD (14-19) | cd (20) | sex (21) | expiry YYMMDD (22-27)
            | cd (28) | personal number (29-42) | cd (43) | composite cd (44)
"""

from __future__ import annotations

import datetime as dt
import string
import unicodedata
from dataclasses import dataclass
from typing import NamedTuple

from ._validation import Violation

LINE_LENGTH = 44
NAME_LENGTH = 39
FILLER = "<"
ALPHABET = frozenset(string.ascii_uppercase + string.digits + FILLER)
WEIGHTS = (7, 3, 1)

# Latin transliterations for the Polish, Spanish and Portuguese repertoire;
# remaining accented vowels are handled by stripping combining marks.
_TRANSLITERATION = {
    "Ł": "L",
    "Ø": "O",
    "Đ": "D",
    "ß": "SS",
    "Æ": "AE",
    "Œ": "OE",
    "Þ": "TH",
}
_DROPPED = {"'", "’", ".", ","}
_SEPARATORS = {" ", "-", "‐"}


class MrzError(ValueError):
    def __init__(self, message: str, position: int | None = None):
        self.position = position
        super().__init__(message if position is None else f"{message} (position {position})")


def char_value(ch: str) -> int:
    if ch.isdigit():
        return int(ch)
    if "A" <= ch <= "Z":
        return ord(ch) - ord("A") + 10
    if ch == FILLER:
        return 0
    raise MrzError(f"illegal MRZ character {ch!r}")


def check_digit(field: str) -> int:
    """7-3-1 weighted checksum over MRZ characters, modulo 10.

    >>> check_digit("520727")
    3
    """
    total = 0
    for i, ch in enumerate(field):
        try:
            value = char_value(ch)
        except MrzError:
            raise MrzError(f"illegal MRZ character {ch!r}", position=i + 1) from None
        total += value * WEIGHTS[i % 3]
    return total % 10


def transliterate(text: str) -> str:
    """Upper-case MRZ transliteration; separators become '<'.

    Raises :class:`MrzError` for characters outside the supported repertoire.
    """
    out = []
    for i, ch in enumerate(text.upper()):
        if ch in _SEPARATORS:
            out.append(FILLER)
        elif ch in _DROPPED:
            continue
        elif ch in _TRANSLITERATION:
            out.append(_TRANSLITERATION[ch])
        elif ch in ALPHABET:
            out.append(ch)
        else:
            base = "".join(c for c in unicodedata.normalize("NFD", ch) if not unicodedata.combining(c))
            if len(base) == 1 and base in ALPHABET and base != FILLER:
                out.append(base)
            else:
                raise MrzError(f"no transliteration for {ch!r}", position=i + 1)
    return "".join(out)


class EncodedName(NamedTuple):
    field: str
    truncated: bool


def encode_name(surname: str, given: str) -> EncodedName:
    """Build the 39-character name field: ``SURNAME<<GIVEN<NAMES`` padded with '<'.

    Over-long names are cut at 39 characters and flagged via ``truncated``.
    """
    if not surname.strip() or not given.strip():
        raise MrzError("surname and given name must be non-empty")
    primary = transliterate(surname.strip())
    secondary = transliterate(given.strip())
    raw = f"{primary}{FILLER * 2}{secondary}"
    truncated = len(raw) > NAME_LENGTH
    return EncodedName(raw[:NAME_LENGTH].ljust(NAME_LENGTH, FILLER), truncated)


def _pad(value: str, width: int, what: str) -> str:
    encoded = transliterate(value) if value else ""
    if len(encoded) > width:
        raise MrzError(f"{what} longer than {width} characters after encoding: {encoded!r}")
    return encoded.ljust(width, FILLER)


def format_date(value: dt.date) -> str:
    return value.strftime("%y%m%d")


@dataclass(frozen=True)
class MrzTd3:
    line1: str
    line2: str

    def __str__(self) -> str:
        return f"{self.line1}\n{self.line2}"

    @property
    def lines(self) -> tuple[str, str]:
        return self.line1, self.line2


def build_td3(record, issuing_state: str | None = None, document_type: str = "P") -> MrzTd3:
    """Encode a subject record as a TD3 MRZ.

    ``record`` needs the :class:`~synthpass.subjects.SubjectRecord` attributes
    (names, nationality, dates, sex, document and personal numbers).
    """
    state = _pad(issuing_state or record.nationality, 3, "issuing state")
    name = encode_name(record.surname, record.given_name).field
    doc_type = (document_type or "P").upper()
    if not doc_type.startswith("P") or len(doc_type) > 2:
        raise MrzError(f"TD3 document type must start with 'P', got {document_type!r}")
    line1 = doc_type.ljust(2, FILLER) + state + name

    number = _pad(record.document_number, 9, "document number")
    nationality = _pad(record.nationality, 3, "nationality")
    birth = format_date(record.birth_date)
    expiry = format_date(record.expiry_date)
    if record.sex not in ("M", "F"):
        raise MrzError(f"sex must be 'M' or 'F', got {record.sex!r}")
    personal = _pad(record.personal_number or "", 14, "personal number")

    head = number + str(check_digit(number))
    mid = birth + str(check_digit(birth))
    tail = expiry + str(check_digit(expiry)) + personal + str(check_digit(personal))
    composite = check_digit(head + mid + tail)
    line2 = head + nationality + mid + record.sex + tail + str(composite)
    assert len(line1) == LINE_LENGTH and len(line2) == LINE_LENGTH
    return MrzTd3(line1, line2)


# (field name, data slice, check digit index), 0-based
_CHECKED_FIELDS = (
    ("document_number", slice(0, 9), 9),
    ("birth_date", slice(13, 19), 19),
    ("expiry_date", slice(21, 27), 27),
    ("personal_number", slice(28, 42), 42),
)
COMPOSITE_SPAN = (slice(0, 10), slice(13, 20), slice(21, 43))


def composite_input(line2: str) -> str:
    return "".join(line2[s] for s in COMPOSITE_SPAN)


def validate_td3(line1: str, line2: str | None = None) -> list[Violation]:
    """Report length, alphabet and check-digit failures. Empty list means valid.

    Accepts either two strings or an :class:`MrzTd3` as the first argument.
    """
    if isinstance(line1, MrzTd3):
        line1, line2 = line1.line1, line1.line2
    if line2 is None:
        raise TypeError("validate_td3 needs two lines")
    out: list[Violation] = []
    for name, line in (("line1", line1), ("line2", line2)):
        if len(line) != LINE_LENGTH:
            out.append(Violation("length", name, f"expected {LINE_LENGTH} characters, got {len(line)}"))
        bad = [i + 1 for i, ch in enumerate(line) if ch not in ALPHABET]
        if bad:
            out.append(Violation("alphabet", name, f"characters outside A-Z0-9< at positions {bad}"))
    if not line1.startswith("P"):
        out.append(Violation("document_type", "line1", "TD3 line 1 must start with 'P'"))
    if len(line2) != LINE_LENGTH or any(ch not in ALPHABET for ch in line2):
        return out

    if line2[20] not in ("M", "F", FILLER):
        out.append(Violation("sex", "sex", f"invalid sex marker {line2[20]!r}"))
    for name, data, cd in _CHECKED_FIELDS:
        expected = check_digit(line2[data])
        got = line2[cd]
        # an all-filler personal number may carry '<' instead of 0
        filler_ok = name == "personal_number" and got == FILLER and set(line2[data]) == {FILLER}
        if not filler_ok and got != str(expected):
            out.append(
                Violation("check_digit", name, f"check digit {got!r} at position {cd + 1}, expected {expected}")
            )
    expected = check_digit(composite_input(line2))
    if line2[43] != str(expected):
        out.append(Violation("check_digit", "composite", f"composite check digit {line2[43]!r}, expected {expected}"))
    return out
