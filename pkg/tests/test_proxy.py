import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from conftest import csv_bytes
from raiaudit.dataset import NUMERIC, load_table
from raiaudit.proxy import association, correlation_ratio, cramers_v, proxy_scan


def test_identical_variables():
    s = ["a", "b", "c", "a", "b"]
    assert cramers_v(s, s) == 1.0


def test_hand_chi_square():
    # contingency [[30,10],[10,30]], chi2 = 20, V = sqrt(20/80)
    a = ["r0"] * 40 + ["r1"] * 40
    b = ["c0"] * 30 + ["c1"] * 10 + ["c0"] * 10 + ["c1"] * 30
    assert cramers_v(a, b) == pytest.approx(0.5, abs=1e-12)


def test_equal_group_means():
    assert correlation_ratio([1, 3, 2, 2], ["a", "a", "b", "b"]) == 0.0


def test_undefined_cases():
    assert cramers_v(["x"] * 5, list("abcab")) is None
    assert correlation_ratio([2.0] * 4, list("abab")) is None
    assert correlation_ratio([1.0, 2.0], ["a", "a"]) is None


def test_numeric_missing_dropped_pairwise():
    score, method = association([1.0, None, 3.0, 1.0, 3.0], ["a", "b", "b", "a", "b"], NUMERIC)
    assert method == "correlation_ratio"
    assert score == pytest.approx(1.0)


@given(st.lists(st.tuples(st.sampled_from("xyz"), st.sampled_from("pq")), min_size=2, max_size=100))
def test_cramers_v_matches_oracle(pairs):
    a = [x for x, _ in pairs]
    b = [y for _, y in pairs]
    v = cramers_v(a, b)
    if len(set(a)) < 2 or len(set(b)) < 2:
        assert v is None
        return
    assert v == pytest.approx(oracles.cramers_v(a, b), abs=1e-9)
    assert 0 <= v <= 1
    # transposing and renaming categories leave it unchanged
    assert cramers_v(b, a) == pytest.approx(v, abs=1e-12)
    ren = {"x": "k1", "y": "k2", "z": "k3"}
    assert cramers_v([ren[x] for x in a], b) == pytest.approx(v, abs=1e-12)


@given(
    st.lists(st.tuples(st.integers(-50, 50), st.sampled_from("abc")), min_size=2, max_size=100),
    st.sampled_from([-3.0, -0.5, 2.0, 7.0]),
    st.integers(-10, 10),
)
def test_correlation_ratio_oracle_and_affine(pairs, scale, shift):
    x = [float(v) for v, _ in pairs]
    g = [h for _, h in pairs]
    eta = correlation_ratio(x, g)
    if len(set(g)) < 2 or len(set(x)) < 2:
        assert eta is None
        return
    assert eta == pytest.approx(oracles.correlation_ratio(x, g), abs=1e-9)
    assert correlation_ratio([scale * v + shift for v in x], g) == pytest.approx(eta, abs=1e-9)


def _table(rows, header, roles):
    return load_table(csv_bytes(header, rows), {"roles": roles, "privileged": {"sex": "m"}})


def test_scan_puts_copy_of_sensitive_first():
    rng = random.Random(0)
    rows = []
    for _ in range(200):
        s = rng.choice("mf")
        rows.append((s, s, rng.random(), rng.choice("uvw"), rng.randint(0, 1), rng.randint(0, 1)))
    t = _table(rows, ["sex", "sex_copy", "income", "city", "y", "p"],
               {"sex": "sensitive", "sex_copy": "feature", "income": "feature", "city": "feature", "y": "label", "p": "prediction"})
    scan = proxy_scan(t)
    top = scan.findings[0]
    assert (top.feature, top.score, top.flagged, top.method) == ("sex_copy", 1.0, True, "cramers_v")
    assert [f.score for f in scan.findings] == sorted((f.score for f in scan.findings), reverse=True)


def test_independent_features_not_flagged():
    # simulation: features drawn independently of the sensitive column, n = 5000, seed fixed
    rng = random.Random(1234)
    rows = [(rng.choice("mf"), rng.gauss(0, 1), rng.choice("uvwxyz"), rng.randint(0, 1), rng.randint(0, 1)) for _ in range(5000)]
    t = _table(rows, ["sex", "income", "city", "y", "p"],
               {"sex": "sensitive", "income": "feature", "city": "feature", "y": "label", "p": "prediction"})
    scan = proxy_scan(t, threshold=0.5)
    assert len(scan.findings) == 2
    assert all(f.score < 0.05 for f in scan.findings)
    assert scan.flagged == []


def test_empty_feature_set_and_constant_feature():
    rows = [("m", 1, 1, "k"), ("f", 0, 0, "k")]
    t = _table(rows, ["sex", "y", "p", "const"], {"sex": "sensitive", "y": "label", "p": "prediction", "const": "ignore"})
    assert proxy_scan(t).findings == ()
    t2 = _table(rows, ["sex", "y", "p", "const"], {"sex": "sensitive", "y": "label", "p": "prediction", "const": "feature"})
    scan = proxy_scan(t2)
    assert scan.findings == () and len(scan.warnings) == 1


def test_flag_threshold_is_inclusive():
    rows = [("m", "r", 1, 1)] * 30 + [("m", "s", 1, 1)] * 10 + [("f", "r", 0, 0)] * 10 + [("f", "s", 0, 0)] * 30
    t = _table(rows, ["sex", "f", "y", "p"], {"sex": "sensitive", "f": "feature", "y": "label", "p": "prediction"})
    (finding,) = proxy_scan(t, threshold=0.5).findings
    assert finding.score == pytest.approx(0.5)
    assert finding.flagged == (finding.score >= 0.5)
