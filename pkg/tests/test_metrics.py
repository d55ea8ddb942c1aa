import json
import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

import oracles
from synthpass.metrics import (
    PadEvaluator,
    ScoreFileError,
    ScoreSet,
    apcer,
    bpcer,
    bpcer_at_apcer,
    compute_metrics,
    det_curve,
    det_table,
    eer,
    read_score_file,
)


def make(entries):
    """entries: (score, is_attack, pai) triples."""
    return ScoreSet(
        np.array([s for s, _, _ in entries], dtype=float),
        np.array([a for _, a, _ in entries]),
        np.array([p for _, _, p in entries], dtype=object),
    )


def random_entries(rng, n, ties=False):
    n_bf = int(rng.integers(1, n))
    out = [(float(v), False, "none") for v in rng.normal(0.0, 1.0, n_bf)]
    for _ in range(n - n_bf):
        pai = "print" if rng.random() < 0.6 else "screen"
        out.append((float(rng.normal(1.5 if pai == "print" else 1.0, 1.0)), True, pai))
    if ties:
        out = [(round(s, 1), a, p) for s, a, p in out]
    if not any(a for _, a, _ in out):
        out[-1] = (out[-1][0], True, "print")
    return out


entries_strategy = st.lists(
    st.tuples(st.integers(-20, 20).map(lambda v: v / 4), st.booleans(), st.sampled_from(["print", "screen"])),
    min_size=2,
    max_size=40,
).map(lambda rows: [(s, a, p if a else "none") for s, a, p in rows])


def both_classes(entries) -> bool:
    return any(a for _, a, _ in entries) and any(not a for _, a, _ in entries)


# ---------------------------------------------------------------- point metrics


def test_apcer_examples():
    s = make([(0.9, True, "print")] * 4 + [(0.1, False, "none")])
    assert apcer(s, "print", 0.5) == 0.0
    s = make([(0.9, True, "print")] * 3 + [(0.2, True, "print"), (0.1, False, "none")])
    assert apcer(s, "print", 0.5) == pytest.approx(0.25)
    assert apcer(s, "print", 5.0) == 1.0


def test_apcer_tie_counts_as_attack():
    s = make([(0.5, True, "print"), (0.1, False, "none")])
    assert apcer(s, "print", 0.5) == 0.0


def test_apcer_missing_species():
    s = make([(0.5, True, "print"), (0.1, False, "none")])
    with pytest.raises(ValueError):
        apcer(s, "screen", 0.5)


def test_bpcer_examples():
    s = make([(v, False, "none") for v in (0.1, 0.2, 0.3, 0.4, 0.9)] + [(1.0, True, "print")])
    assert bpcer(s, 0.0) == 1.0
    assert bpcer(s, 0.5) == pytest.approx(0.2)
    assert bpcer(s, 2.0) == 0.0


def test_bpcer_needs_bonafide():
    s = make([(0.5, True, "print")])
    with pytest.raises(ValueError):
        bpcer(s, 0.0)


def test_scoreset_rejects_inconsistent_labels():
    with pytest.raises(ValueError):
        make([(0.5, True, "none")])
    with pytest.raises(ValueError):
        make([(0.5, False, "print")])


# ---------------------------------------------------------------- curves


def test_det_separated_contains_origin():
    s = make([(0.1, False, "none"), (0.2, False, "none"), (0.8, True, "print"), (0.9, True, "print")])
    assert (0.0, 0.0) in [(p.apcer, p.bpcer) for p in det_curve(s)]
    rate, thr = eer(s)
    assert rate == 0.0 and 0.2 < thr < 0.8
    ops = bpcer_at_apcer(s)
    assert all(op.bpcer == 0.0 for op in ops.values())


def test_det_identical_scores_two_points():
    s = make([(0.5, False, "none"), (0.5, True, "print"), (0.5, True, "screen")])
    pts = det_curve(s)
    assert {(p.apcer, p.bpcer) for p in pts} == {(1.0, 0.0), (0.0, 1.0)}
    assert len(pts) == 2


def test_det_single_class_is_error():
    with pytest.raises(ValueError):
        det_curve(make([(0.1, False, "none"), (0.2, False, "none")]))
    with pytest.raises(ValueError):
        eer(make([(0.1, True, "print")]))


def test_det_fifty_random_scores_match_sweep(rng):
    entries = random_entries(rng, 50)
    s = make(entries)
    got = det_curve(s)
    want = oracles.det(entries)
    assert len(got) == len(want)
    for p, (a, b, t) in zip(got, want):
        assert p.apcer == pytest.approx(a, abs=1e-12)
        assert p.bpcer == pytest.approx(b, abs=1e-12)
        assert p.threshold == t or math.isclose(p.threshold, t, rel_tol=1e-12, abs_tol=1e-12)


def test_eer_identical_distributions_near_half():
    rng = np.random.default_rng(5)
    entries = [(float(v), False, "none") for v in rng.normal(size=4000)]
    entries += [(float(v), True, "print") for v in rng.normal(size=4000)]
    rate, _ = eer(make(entries))
    # sampling sd of a proportion at n=4000 is about 0.008
    assert abs(rate - 0.5) < 0.03


def test_operating_point_attainability():
    rng = np.random.default_rng(9)
    entries = [(float(v), False, "none") for v in rng.normal(size=200)]
    entries += [(float(v), True, "print") for v in rng.normal(1.0, 1.0, 50)]
    ops = bpcer_at_apcer(make(entries), (0.10, 0.05, 0.01))
    assert ops[0.10].attainable and ops[0.05].attainable
    assert not ops[0.01].attainable  # 50 attacks cannot resolve 1%


@given(entries_strategy)
def test_metrics_match_oracle(entries):
    assume(both_classes(entries))
    s = make(entries)
    for mode in ["worst", "all"] + oracles.species(entries):
        got = det_curve(s, mode)
        want = oracles.det(entries, mode)
        assert [(p.apcer, p.bpcer) for p in got] == pytest.approx([(a, b) for a, b, _ in want], abs=1e-12)
        rate, thr = eer(s, mode)
        orate, othr = oracles.eer(entries, mode)
        assert rate == pytest.approx(orate, abs=1e-9)
        assert thr == pytest.approx(othr, abs=1e-9)
        for level, op in bpcer_at_apcer(s, (0.10, 0.05, 0.01), mode).items():
            ob, oa, ot = oracles.bpcer_at(entries, level, mode)
            assert (op.bpcer, op.apcer) == pytest.approx((ob, oa), abs=1e-12)


@given(entries_strategy, st.floats(-6, 6))
def test_monotone_in_threshold(entries, t):
    assume(both_classes(entries))
    s = make(entries)
    for p in oracles.species(entries):
        assert apcer(s, p, t) <= apcer(s, p, t + 0.25)
    assert bpcer(s, t) >= bpcer(s, t + 0.25)


@given(entries_strategy, st.floats(-6, 6))
def test_complement_identity_naive_recount(entries, t):
    assume(both_classes(entries))
    s = make(entries)
    assert bpcer(s, t) == pytest.approx(oracles.bpcer(entries, t), abs=1e-15)
    for p in oracles.species(entries) + ["all"]:
        assert apcer(s, p, t) == pytest.approx(oracles.apcer(entries, p, t), abs=1e-15)


@given(entries_strategy, st.floats(-6, 6))
def test_worst_case_dominates(entries, t):
    assume(both_classes(entries))
    s = make(entries)
    worst = apcer(s, "worst", t)
    for p in oracles.species(entries):
        assert worst >= apcer(s, p, t)


@given(entries_strategy, st.sampled_from(["exp", "cube", "affine"]))
def test_score_order_invariance(entries, kind):
    assume(both_classes(entries))
    f = {"exp": np.exp, "cube": lambda v: v**3 + v, "affine": lambda v: 3.0 * v - 7.0}[kind]
    a, b = make(entries), make([(float(f(np.float64(sc))), at, p) for sc, at, p in entries])
    pa = [(p.apcer, p.bpcer) for p in det_curve(a)]
    pb = [(p.apcer, p.bpcer) for p in det_curve(b)]
    assert pa == pb
    assert eer(a)[0] == pytest.approx(eer(b)[0], abs=1e-12)
    oa, ob = bpcer_at_apcer(a), bpcer_at_apcer(b)
    assert [(o.bpcer, o.apcer) for o in oa.values()] == [(o.bpcer, o.apcer) for o in ob.values()]


@given(entries_strategy)
def test_det_points_monotone(entries):
    assume(both_classes(entries))
    pts = det_curve(make(entries))
    for p, q in zip(pts, pts[1:]):
        assert q.threshold > p.threshold
        assert q.apcer >= p.apcer and q.bpcer <= p.bpcer
    assert all(0.0 <= p.apcer <= 1.0 and 0.0 <= p.bpcer <= 1.0 for p in pts)


# ---------------------------------------------------------------- score files and reports


def write(tmp_path, text, name="s.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_fixture_scores_match_golden(data):
    golden = json.loads((data / "scores" / "fixture_metrics.json").read_text())
    s = read_score_file(data / "scores" / "fixture_scores.csv")
    for mode, want in golden.items():
        got = compute_metrics(s, mode).to_dict()
        assert got["eer"] == pytest.approx(want["eer"], abs=1e-9)
        assert got["eer_threshold"] == pytest.approx(want["eer_threshold"], abs=1e-9)
        assert got["bpcer_at_eer_threshold"] == pytest.approx(want["bpcer_at_eer_threshold"], abs=1e-9)
        assert got["det_points"] == want["det_points"]
        for name, op in want["operating_points"].items():
            for key in ("bpcer", "apcer", "threshold"):
                assert got["operating_points"][name][key] == pytest.approx(op[key], abs=1e-9)
        assert got["apcer_per_pai_at_eer_threshold"] == pytest.approx(want["apcer_per_pai_at_eer_threshold"], abs=1e-9)


def test_empty_score_file(tmp_path):
    with pytest.raises(ScoreFileError) as err:
        read_score_file(write(tmp_path, ""))
    assert err.value.line == 1


def test_malformed_row_reports_line(tmp_path):
    p = write(tmp_path, "path,label,pai,score\na,bonafide,none,0.1\nb,attack,print,oops\n")
    with pytest.raises(ScoreFileError) as err:
        read_score_file(p)
    assert err.value.line == 3


def test_bad_label_reports_line(tmp_path):
    p = write(tmp_path, "# polarity=higher\npath,label,pai,score\na,genuine,none,0.1\n")
    with pytest.raises(ScoreFileError) as err:
        read_score_file(p)
    assert err.value.line == 3


def test_single_class_file(tmp_path):
    s = read_score_file(write(tmp_path, "path,label,pai,score\na,attack,print,0.9\nb,attack,screen,0.8\n"))
    with pytest.raises(ValueError):
        s.require_both_classes()
    with pytest.raises(ValueError):
        compute_metrics(s)


def test_lower_polarity_negates(tmp_path):
    hi = read_score_file(write(tmp_path, "path,label,pai,score\na,bonafide,none,0.1\nb,attack,print,0.9\n", "h.csv"))
    lo = read_score_file(
        write(tmp_path, "# polarity=lower\npath,label,pai,score\na,bonafide,none,0.9\nb,attack,print,0.1\n", "l.csv")
    )
    assert lo.polarity == "lower"
    assert eer(hi)[0] == eer(lo)[0] == 0.0


def test_unknown_polarity(tmp_path):
    with pytest.raises(ScoreFileError) as err:
        read_score_file(write(tmp_path, "# polarity=sideways\npath,label,pai,score\n"))
    assert err.value.line == 1


def test_det_table_columns(data):
    s = read_score_file(data / "scores" / "fixture_scores.csv")
    text = det_table(det_curve(s))
    header, first = text.splitlines()[:2]
    assert header == "apcer,bpcer,threshold,apcer_probit,bpcer_probit"
    assert first.split(",")[:3] == ["0.0", "1.0", "-inf"]


def test_report_text_lists_operating_points(data):
    text = compute_metrics(read_score_file(data / "scores" / "fixture_scores.csv")).to_text()
    for needle in ("EER", "BPCER10", "BPCER20", "BPCER100", "print", "screen"):
        assert needle in text


# ---------------------------------------------------------------- estimator


def test_pad_evaluator_round_trip(rng):
    bf = rng.normal(0, 1, 300)
    att = rng.normal(3, 1, 300)
    X = np.concatenate([bf, att])
    y = np.r_[np.zeros(300), np.ones(300)]
    est = PadEvaluator().fit(X, y)
    assert est.get_params() == {"pai_mode": "worst"}
    assert est.metrics_.eer < 0.1
    pred = est.predict(X)
    assert set(np.unique(pred)) <= {0, 1}
    assert est.score(X, y) > -0.1


def test_pad_evaluator_unfitted():
    from sklearn.exceptions import NotFittedError

    with pytest.raises(NotFittedError):
        PadEvaluator().predict([0.1])
