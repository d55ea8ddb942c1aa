"""ISO/IEC 30107-3 presentation attack detection metrics.

Decision rule: a presentation is classified as an attack when its decision
score is ``>= threshold`` (ties go to attack). For score files with
``polarity=lower`` the scores are negated on load, so every function here works
with "higher means attack"; thresholds are reported in that decision space.

PAI selectors accepted by the curve functions:

* a species name (``"print"``, ``"screen"``): bona fide vs that species only;
* ``"all"``: bona fide vs every attack, pooled;
* ``"worst"``: per threshold, the maximum APCER over the species present.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

BONAFIDE, ATTACK = "bonafide", "attack"
OPERATING_LEVELS = {"BPCER10": 0.10, "BPCER20": 0.05, "BPCER100": 0.01}
SCORE_COLUMNS = ("path", "label", "pai", "score")


class ScoreFileError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True, eq=False)
class ScoreSet:
    """Labeled decision scores. ``pai`` is ``"none"`` for bona fide entries."""

    scores: np.ndarray
    is_attack: np.ndarray
    pai: np.ndarray
    paths: tuple[str, ...] = ()
    polarity: str = "higher"

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=np.float64).ravel()
        a = np.asarray(self.is_attack, dtype=bool).ravel()
        p = np.asarray(self.pai, dtype=object).ravel()
        if not (len(s) == len(a) == len(p)):
            raise ValueError("scores, labels and pai must have equal length")
        if len(s) == 0:
            raise ValueError("empty score set")
        if not np.all(np.isfinite(s)):
            raise ValueError("scores must be finite")
        bad = np.flatnonzero(a == (p == "none"))
        if len(bad):
            raise ValueError(f"entry {int(bad[0])}: attack entries need a PAI, bona fide entries pai=none")
        for name, arr in (("scores", s), ("is_attack", a), ("pai", p)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_entries(cls, entries: Sequence[tuple[float, str, str]], polarity: str = "higher") -> "ScoreSet":
        scores = [float(s) for s, _, _ in entries]
        labels = [lab for _, lab, _ in entries]
        for lab in labels:
            if lab not in (BONAFIDE, ATTACK):
                raise ValueError(f"label must be bonafide or attack, got {lab!r}")
        return cls(np.array(scores), np.array([lab == ATTACK for lab in labels]), np.array([p for _, _, p in entries], dtype=object), polarity=polarity)

    @property
    def bonafide_scores(self) -> np.ndarray:
        return self.scores[~self.is_attack]

    @property
    def n_bf(self) -> int:
        return int((~self.is_attack).sum())

    def species(self) -> list[str]:
        return sorted({str(p) for p in self.pai[self.is_attack]})

    def attack_scores(self, pai: str) -> np.ndarray:
        if pai == "all":
            return self.scores[self.is_attack]
        return self.scores[self.is_attack & (self.pai == pai)]

    def n_pais(self, pai: str) -> int:
        return len(self.attack_scores(pai))

    def require_both_classes(self) -> None:
        if self.n_bf == 0 or not self.is_attack.any():
            raise ValueError("score set must contain both bona fide and attack entries")


# ---------------------------------------------------------------- point metrics


def apcer(scores: ScoreSet, pai: str, threshold: float) -> float:
    """Proportion of ``pai`` attacks classified bona fide (score < threshold).

    ``pai="worst"`` returns the maximum over the species present.
    """
    if pai == "worst":
        return max(apcer(scores, p, threshold) for p in scores.species())
    attacks = scores.attack_scores(pai)
    if len(attacks) == 0:
        raise ValueError(f"no attack entries for PAI {pai!r}")
    detected = np.count_nonzero(attacks >= threshold)
    return 1.0 - detected / len(attacks)


def bpcer(scores: ScoreSet, threshold: float) -> float:
    """Proportion of bona fide presentations classified as attacks."""
    bf = scores.bonafide_scores
    if len(bf) == 0:
        raise ValueError("no bona fide entries")
    return np.count_nonzero(bf >= threshold) / len(bf)


# ---------------------------------------------------------------- curves


class DetPoint(NamedTuple):
    apcer: float
    bpcer: float
    threshold: float


def _species_for(scores: ScoreSet, pai: str) -> list[str]:
    if pai == "worst":
        species = scores.species()
    elif pai == "all":
        species = ["all"]
    else:
        species = [pai]
    for p in species:
        if scores.n_pais(p) == 0:
            raise ValueError(f"no attack entries for PAI {pai!r}")
    return species


def _det_arrays(scores: ScoreSet, pai: str = "worst"):
    """Thresholds (ascending) with APCER and BPCER at each, vectorized."""
    scores.require_both_classes()
    species = _species_for(scores, pai)
    bf = np.sort(scores.bonafide_scores)
    relevant = [bf] + [scores.attack_scores(p) for p in species]
    values = np.unique(np.concatenate(relevant))
    mids = values[:-1] / 2.0 + values[1:] / 2.0
    thresholds = np.concatenate([[-np.inf], mids, [np.inf]])
    # bona fide with score >= t count as rejected
    bp = (len(bf) - np.searchsorted(bf, thresholds, side="left")) / len(bf)
    ap = np.zeros_like(thresholds)
    for p in species:
        att = np.sort(scores.attack_scores(p))
        ap = np.maximum(ap, np.searchsorted(att, thresholds, side="left") / len(att))
    return ap, bp, thresholds


def det_curve(scores: ScoreSet, pai: str = "worst") -> list[DetPoint]:
    """One point per threshold: -inf, midpoints between distinct scores, +inf.

    Along ascending thresholds APCER is non-decreasing and BPCER non-increasing.
    """
    ap, bp, th = _det_arrays(scores, pai)
    return [DetPoint(float(a), float(b), float(t)) for a, b, t in zip(ap, bp, th)]


def eer(scores: ScoreSet, pai: str = "worst") -> tuple[float, float]:
    """Equal error rate and its threshold.

    Walks the DET polyline to the first point with APCER >= BPCER. An exact tie
    is returned as is; otherwise the crossing is linearly interpolated on the
    segment from the previous point. Thresholds are interpolated the same way
    unless an end of the segment is infinite, in which case the finite end is
    returned.
    """
    ap, bp, th = _det_arrays(scores, pai)
    d = ap - bp
    i = int(np.argmax(d >= 0))  # d[-1] = 1 > 0, so a crossing always exists
    if d[i] == 0:
        return float(ap[i]), float(th[i])
    a0, a1, d0, d1 = ap[i - 1], ap[i], d[i - 1], d[i]
    s = -d0 / (d1 - d0)
    rate = a0 + s * (a1 - a0)
    t0, t1 = th[i - 1], th[i]
    if np.isfinite(t0) and np.isfinite(t1):
        thr = t0 + s * (t1 - t0)
    elif np.isfinite(t0):
        thr = t0
    elif np.isfinite(t1):
        thr = t1
    else:
        thr = float(scores.scores[0])
    return float(rate), float(thr)


@dataclass(frozen=True)
class OperatingPoint:
    level: float
    bpcer: float
    apcer: float
    threshold: float
    attainable: bool


def bpcer_at_apcer(scores: ScoreSet, apcer_levels=(0.10, 0.05, 0.01), pai: str = "worst") -> dict[float, OperatingPoint]:
    """BPCER at the largest DET threshold whose APCER does not exceed each level.

    ``attainable`` is False when the attack count cannot resolve the level
    (fewer than ``1 / level`` attacks of the limiting species), in which case
    the reported point is the APCER = 0 operating point.
    """
    ap, bp, th = _det_arrays(scores, pai)
    n_min = min(scores.n_pais(p) for p in _species_for(scores, pai))
    out = {}
    for level in apcer_levels:
        ok = np.flatnonzero(ap <= level + 1e-12)
        j = int(ok[-1])  # ap[0] == 0, so never empty
        out[level] = OperatingPoint(
            level=float(level),
            bpcer=float(bp[j]),
            apcer=float(ap[j]),
            threshold=float(th[j]),
            attainable=n_min * level >= 1.0 - 1e-9,
        )
    return out


# ---------------------------------------------------------------- reports


@dataclass
class PadMetrics:
    pai_mode: str
    eer: float
    eer_threshold: float
    operating_points: dict[str, OperatingPoint]
    apcer_per_pai: dict[str, float]
    bpcer_at_eer: float
    det_points: list[DetPoint] = field(repr=False, default_factory=list)
    counts: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "pai_mode": self.pai_mode,
            "eer": self.eer,
            "eer_threshold": self.eer_threshold,
            "bpcer_at_eer_threshold": self.bpcer_at_eer,
            "operating_points": {
                name: {
                    "apcer_level": op.level,
                    "bpcer": op.bpcer,
                    "apcer": op.apcer,
                    "threshold": op.threshold,
                    "attainable": op.attainable,
                }
                for name, op in self.operating_points.items()
            },
            "apcer_per_pai_at_eer_threshold": self.apcer_per_pai,
            "counts": self.counts,
            "det_points": len(self.det_points),
        }

    def to_text(self) -> str:
        lines = [
            f"PAI mode        {self.pai_mode}",
            f"EER             {100 * self.eer:.2f}%  (threshold {self.eer_threshold:.6g})",
            f"BPCER at EER    {100 * self.bpcer_at_eer:.2f}%",
            "",
            "operating point   APCER level   BPCER     APCER     threshold",
        ]
        for name, op in self.operating_points.items():
            note = "" if op.attainable else "  (not attainable with this attack count)"
            lines.append(
                f"{name:<17} {100 * op.level:>10.1f}%  {100 * op.bpcer:>7.2f}%  {100 * op.apcer:>7.2f}%  {op.threshold:.6g}{note}"
            )
        lines += ["", "PAI        count   APCER at EER threshold"]
        for pai, value in self.apcer_per_pai.items():
            lines.append(f"{pai:<10} {self.counts.get(pai, 0):>5}   {100 * value:.2f}%")
        lines.append(f"{'bonafide':<10} {self.counts.get('bonafide', 0):>5}")
        return "\n".join(lines) + "\n"


def compute_metrics(scores: ScoreSet, pai: str = "worst") -> PadMetrics:
    rate, thr = eer(scores, pai)
    ops = bpcer_at_apcer(scores, tuple(OPERATING_LEVELS.values()), pai)
    per_pai = {p: apcer(scores, p, thr) for p in scores.species()}
    counts = {"bonafide": scores.n_bf, **{p: scores.n_pais(p) for p in scores.species()}}
    return PadMetrics(
        pai_mode=pai,
        eer=rate,
        eer_threshold=thr,
        operating_points={name: ops[level] for name, level in OPERATING_LEVELS.items()},
        apcer_per_pai=per_pai,
        bpcer_at_eer=bpcer(scores, thr),
        det_points=det_curve(scores, pai),
        counts=counts,
    )


def _probit(p: float) -> float:
    from scipy.stats import norm

    return float(norm.ppf(min(max(p, 1e-6), 1 - 1e-6)))


def det_table(points: Sequence[DetPoint]) -> str:
    """CSV text for plotting: raw rates plus normal-deviate coordinates."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["apcer", "bpcer", "threshold", "apcer_probit", "bpcer_probit"])
    for p in points:
        w.writerow([repr(p.apcer), repr(p.bpcer), repr(p.threshold), repr(_probit(p.apcer)), repr(_probit(p.bpcer))])
    return buf.getvalue()


# ---------------------------------------------------------------- score files


def read_score_file(path) -> ScoreSet:
    """Parse ``path,label,pai,score`` CSV, optionally preceded by a
    ``# polarity=higher|lower`` pragma line."""
    with open(path, encoding="utf-8", newline="") as fh:
        lines = fh.read().splitlines()
    if not any(line.strip() for line in lines):
        raise ScoreFileError("empty score file", line=1)
    polarity = "higher"
    start = 0
    while start < len(lines) and (not lines[start].strip() or lines[start].lstrip().startswith("#")):
        text = lines[start].lstrip("# ").strip()
        if text.startswith("polarity="):
            polarity = text.split("=", 1)[1].strip()
            if polarity not in ("higher", "lower"):
                raise ScoreFileError(f"polarity must be 'higher' or 'lower', got {polarity!r}", line=start + 1)
        start += 1
    if start >= len(lines):
        raise ScoreFileError("missing header", line=start + 1)
    header = [h.strip() for h in next(csv.reader([lines[start]]))]
    if header[:4] != list(SCORE_COLUMNS):
        raise ScoreFileError(f"header must be {','.join(SCORE_COLUMNS)}, got {lines[start]!r}", line=start + 1)

    paths, scores, attack, pais = [], [], [], []
    for lineno in range(start + 2, len(lines) + 1):
        raw = lines[lineno - 1]
        if not raw.strip():
            continue
        row = next(csv.reader([raw]))
        if len(row) < 4:
            raise ScoreFileError(f"expected 4 fields, got {len(row)}", line=lineno)
        path, label, pai, score = (c.strip() for c in row[:4])
        if label not in (BONAFIDE, ATTACK):
            raise ScoreFileError(f"label must be bonafide or attack, got {label!r}", line=lineno)
        if pai not in ("none", "print", "screen"):
            raise ScoreFileError(f"pai must be none, print or screen, got {pai!r}", line=lineno)
        if (label == BONAFIDE) != (pai == "none"):
            raise ScoreFileError(f"label {label} inconsistent with pai {pai}", line=lineno)
        try:
            value = float(score)
        except ValueError:
            raise ScoreFileError(f"score is not a number: {score!r}", line=lineno) from None
        if not math.isfinite(value):
            raise ScoreFileError(f"score must be finite: {score!r}", line=lineno)
        paths.append(path)
        scores.append(value if polarity == "higher" else -value)
        attack.append(label == ATTACK)
        pais.append(pai)
    if not scores:
        raise ScoreFileError("no score rows", line=start + 2)
    return ScoreSet(np.array(scores), np.array(attack), np.array(pais, dtype=object), tuple(paths), polarity)


# ---------------------------------------------------------------- estimator


class PadEvaluator(BaseEstimator):
    """Calibrates the EER threshold on labeled scores; predicts attack decisions.

    ``fit(scores, y, pai=None)``: ``y`` is 1 for attack, 0 for bona fide. When
    ``pai`` is omitted all attacks are treated as a single species ``"attack"``.
    """

    def __init__(self, pai_mode="worst"):
        self.pai_mode = pai_mode

    def fit(self, X, y, pai=None):
        s = np.asarray(X, dtype=np.float64).ravel()
        y = np.asarray(y).astype(bool).ravel()
        if pai is None:
            pai = np.where(y, "attack", "none")
        score_set = ScoreSet(s, y, np.asarray(pai, dtype=object))
        mode = self.pai_mode if (self.pai_mode in ("worst", "all") or self.pai_mode in score_set.species()) else "worst"
        self.metrics_ = compute_metrics(score_set, mode)
        self.threshold_ = self.metrics_.eer_threshold
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "threshold_")
        return (np.asarray(X, dtype=np.float64).ravel() >= self.threshold_).astype(int)

    def score(self, X, y) -> float:
        """Negative average classification error rate (higher is better)."""
        pred = self.predict(X).astype(bool)
        y = np.asarray(y).astype(bool).ravel()
        ap = np.mean(~pred[y]) if y.any() else 0.0
        bp = np.mean(pred[~y]) if (~y).any() else 0.0
        return -float(ap + bp) / 2.0
