import json
import random

import pytest

import oracles
from conftest import SHIFTED_SCORES, csv_bytes
from raiaudit.dataset import binarize, load_table
from raiaudit.metrics import confusion_counts, fairness_report, mutual_information
from raiaudit.mitigate import (
    InfeasibleError,
    ThresholdPolicy,
    UnknownGroupError,
    apply_policy,
    apply_thresholds,
    default_grid,
    fit_thresholds,
    optimize_thresholds,
    reweigh,
    reweigh_arrays,
    weighted_table,
)


# -- reweighing -----------------------------------------------------------------


def test_hand_computed_weights():
    groups = ["a"] * 6 + ["b"] * 4
    labels = [1, 1, 1, 1, 0, 0] + [1, 0, 0, 0]
    w = reweigh_arrays(groups, labels)
    assert w.cell_weights[("a", 1)] == pytest.approx(0.75, abs=1e-12)
    assert w.cell_weights[("a", 0)] == pytest.approx(1.5, abs=1e-12)
    assert w.cell_weights[("b", 1)] == pytest.approx(2.0, abs=1e-12)
    assert w.cell_weights[("b", 0)] == pytest.approx(2 / 3, abs=1e-12)
    assert sum(w.weights) == pytest.approx(10, abs=1e-9)


def test_independent_data_gets_unit_weights():
    groups = ["a"] * 4 + ["b"] * 8
    labels = [1, 0, 1, 0] + [1, 0] * 4
    assert set(reweigh_arrays(groups, labels).weights) == {1.0}


def test_duplication_keeps_cell_weights():
    rng = random.Random(1)
    g = [rng.choice("abc") for _ in range(50)]
    y = [rng.randint(0, 1) for _ in range(50)]
    assert reweigh_arrays(g, y).cell_weights == reweigh_arrays(g * 2, y * 2).cell_weights


def test_single_group_warns():
    w = reweigh_arrays(["a"] * 5, [1, 0, 1, 1, 0])
    assert set(w.weights) == {1.0} and w.warnings


@pytest.mark.parametrize("seed", range(20))
def test_reweigh_removes_dependence(seed):
    rng = random.Random(seed)
    n = rng.randint(5, 200)
    g = [rng.choice("abcd"[: rng.randint(2, 4)]) for _ in range(n)]
    y = [1 if rng.random() < (0.2 if gi == "a" else 0.7) else 0 for gi in g]
    w = reweigh_arrays(g, y)
    assert all(x > 0 for x in w.weights)
    if len(set(zip(g, y))) < len(set(g)) * len(set(y)):
        assert any("empty" in m for m in w.warnings)
        return
    assert abs(sum(w.weights) - n) <= 1e-9
    assert mutual_information(g, y, w.weights) <= 1e-9
    assert oracles.mutual_info(g, y, w.weights) <= 1e-9


def test_empty_cell_is_reported():
    w = reweigh_arrays(["a", "a", "b", "b"], [1, 0, 1, 1])
    assert w.warnings == ("empty group/label cells (b/0); weights cannot make group and label independent",)


def test_weighted_table_round_trip(confusion_table):
    w = reweigh(confusion_table, "group")
    t = weighted_table(confusion_table, w)
    assert t.weight_column == "weight" and t.column("weight") == w.weights


# -- threshold optimizer -----------------------------------------------------------


def _shifted():
    scores, labels, groups = [], [], []
    for g, (pos, neg) in SHIFTED_SCORES.items():
        for s in pos:
            scores.append(s), labels.append(1), groups.append(g)
        for s in neg:
            scores.append(s), labels.append(0), groups.append(g)
    return scores, labels, groups


def test_shifted_fixture_uniform_gap():
    s, y, g = _shifted()
    preds = [1 if x >= 0.5 else 0 for x in s]
    r = fairness_report(confusion_counts(y, preds, g), "a")
    assert abs(r.groups["b"].eod) == pytest.approx(0.25)


def test_shifted_fixture_equalized():
    s, y, g = _shifted()
    p = fit_thresholds(s, y, g, epsilon=0.0)
    assert 0.4 < p.thresholds["a"] <= 0.6
    assert 0.3 < p.thresholds["b"] <= 0.4
    assert p.achieved_tpr == {"a": 1.0, "b": 1.0}
    assert p.accuracy == 1.0 and p.max_tpr_gap == 0.0
    assert oracles.best_policy_bruteforce(s, y, g, 0.0, default_grid()) == 16


def test_single_group_is_plain_accuracy_argmax():
    rng = random.Random(9)
    s = [round(rng.random(), 3) for _ in range(60)]
    y = [1 if x + rng.gauss(0, 0.2) > 0.5 else 0 for x in s]
    p = fit_thresholds(s, y, ["only"] * 60, epsilon=0.0)
    grid = default_grid()
    best = max(sum((x >= t) == bool(l) for x, l in zip(s, y)) for t in grid)
    assert p.accuracy * 60 == best
    assert p.thresholds["only"] == min(t for t in grid if sum((x >= t) == bool(l) for x, l in zip(s, y)) == best)


def test_identical_groups_share_uniform_optimum():
    rng = random.Random(21)
    base = [(round(rng.random(), 2), rng.randint(0, 1)) for _ in range(80)]
    s = [x for x, _ in base] * 2
    y = [l for _, l in base] * 2
    g = ["a"] * 80 + ["b"] * 80
    p = fit_thresholds(s, y, g, epsilon=0.0)
    grid = default_grid()
    acc = [sum((x >= t) == bool(l) for x, l in base) for t in grid]
    uniform = grid[acc.index(max(acc))]
    assert p.thresholds == {"a": uniform, "b": uniform}


@pytest.mark.parametrize("seed", range(12))
def test_matches_brute_force(seed):
    rng = random.Random(seed)
    k = rng.choice([2, 3])
    n = rng.randint(20, 300)
    eps = rng.choice([0.0, 0.02, 0.05, 0.1, 0.2])
    points = rng.choice([11, 21, 101]) if k == 2 else rng.choice([11, 21, 51])
    grid = default_grid(points)
    g = [f"g{rng.randrange(k)}" for _ in range(n)]
    y = [rng.randint(0, 1) for _ in range(n)]
    for i in range(k):
        g[i], y[i] = f"g{i}", 1
    shift = {f"g{i}": rng.uniform(-0.2, 0.2) for i in range(k)}
    s = [min(1.0, max(0.0, round(0.5 + 0.25 * (2 * yi - 1) + shift[gi] + rng.gauss(0, 0.2), 3))) for yi, gi in zip(y, g)]
    best = oracles.best_policy_bruteforce(s, y, g, eps, grid)
    if best is None:
        with pytest.raises(InfeasibleError):
            fit_thresholds(s, y, g, eps, grid)
        return
    p = fit_thresholds(s, y, g, eps, grid)
    assert round(p.accuracy * n) == best
    preds = apply_thresholds(s, g, p.thresholds)
    rep = fairness_report(confusion_counts(y, preds, g), "g0")
    assert rep.max_abs("eod") <= eps
    assert p.max_tpr_gap <= eps


def test_balanced_accuracy_objective():
    s, y, g = _shifted()
    p = fit_thresholds(s, y, g, epsilon=0.0, performance="balanced_accuracy")
    assert p.accuracy == 1.0


def test_infeasible():
    # one threshold grid point, groups with different TPR there
    s = [0.6, 0.4, 0.6, 0.6]
    y = [1, 1, 1, 1]
    g = ["a", "a", "b", "b"]
    with pytest.raises(InfeasibleError, match="epsilon"):
        fit_thresholds(s, y, g, epsilon=0.0, grid=[0.5])


def test_group_without_positives():
    with pytest.raises(ValueError, match="no positive"):
        fit_thresholds([0.1, 0.9, 0.3], [0, 1, 0], ["a", "b", "a"])


def test_bad_grid():
    with pytest.raises(ValueError):
        fit_thresholds([0.5], [1], ["a"], grid=[0.5, 0.2])
    with pytest.raises(ValueError):
        fit_thresholds([0.5], [1], ["a"], grid=[1.5])


def test_deterministic(shifted_table):
    p1 = optimize_thresholds(shifted_table, "group", 0.0)
    p2 = optimize_thresholds(shifted_table, "group", 0.0)
    assert json.dumps(p1.to_dict(), sort_keys=True) == json.dumps(p2.to_dict(), sort_keys=True)


# -- applying policies -------------------------------------------------------------


def _policy(th):
    return ThresholdPolicy(thresholds=th, epsilon=0.0, achieved_tpr={}, accuracy=0.0, max_tpr_gap=0.0, sensitive="g")


def test_apply_rule_and_unknown_group():
    assert apply_thresholds([0.42], ["b"], {"a": 0.5, "b": 0.4}) == (1,)
    with pytest.raises(UnknownGroupError, match="'c'"):
        apply_thresholds([0.42], ["c"], {"a": 0.5, "b": 0.4})


def test_uniform_policy_equals_binarize():
    rows = [("a", 1, 0.5), ("b", 0, 0.49), ("a", 0, 0.7), ("b", 1, 0.1)]
    t = load_table(csv_bytes(["g", "y", "s"], rows), {"roles": {"g": "sensitive", "y": "label", "s": "score"}, "privileged": {"g": "a"}})
    assert apply_policy(t, _policy({"a": 0.5, "b": 0.5})) == binarize(t, 0.5).predictions


def test_policy_document_round_trip(shifted_table):
    p = optimize_thresholds(shifted_table, "group", 0.0)
    again = ThresholdPolicy.from_dict(json.loads(json.dumps(p.to_dict())))
    assert again == p
    assert apply_policy(shifted_table, again) == apply_policy(shifted_table, p)
