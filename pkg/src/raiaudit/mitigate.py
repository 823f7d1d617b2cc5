"""Bias mitigation that needs no retraining.

* :func:`reweigh` assigns each (group, label) cell the weight
  P(s)P(y)/P(s,y), which makes group and label independent under weighting.
* :func:`optimize_thresholds` picks one score threshold per group so that
  true-positive rates agree within ``epsilon`` while overall accuracy is as
  high as possible on the fitting data.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

from .dataset import AuditTable, ColumnRole, SchemaError

ACCURACY = "accuracy"
BALANCED_ACCURACY = "balanced_accuracy"
EQUAL_OPPORTUNITY = "equal_opportunity"


class InfeasibleError(ValueError):
    pass


class UnknownGroupError(ValueError):
    pass


def default_grid(points: int = 101) -> tuple[float, ...]:
    """``points`` evenly spaced thresholds from 0.0 to 1.0 inclusive."""
    if points < 2:
        raise ValueError("a threshold grid needs at least 2 points")
    return tuple(i / (points - 1) for i in range(points))


# ---------------------------------------------------------------------------
# reweighing


@dataclass(frozen=True)
class WeightAssignment:
    sensitive: str
    cell_weights: Mapping[tuple[str, int], float]
    weights: tuple[float, ...]
    warnings: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "sensitive": self.sensitive,
            "cells": [
                {"group": s, "label": y, "weight": w}
                for (s, y), w in sorted(self.cell_weights.items())
            ],
            "total_weight": math.fsum(self.weights),
            "n": len(self.weights),
            "warnings": list(self.warnings),
        }


def reweigh_arrays(groups: Sequence[str], labels: Sequence[int], sensitive: str = "") -> WeightAssignment:
    if len(groups) != len(labels):
        raise ValueError("groups and labels must have equal length")
    n = len(labels)
    ns, ny = Counter(groups), Counter(labels)
    nsy = Counter(zip(groups, labels))
    cells = {(s, y): (ns[s] * ny[y]) / (n * c) for (s, y), c in sorted(nsy.items())}
    warnings = []
    if len(ns) < 2:
        warnings.append(f"only one group in {sensitive or 'sensitive column'}; weights are all 1")
    else:
        empty = [(s, y) for s in sorted(ns) for y in sorted(ny) if (s, y) not in nsy]
        if empty:
            cells_txt = ", ".join(f"{s}/{y}" for s, y in empty)
            warnings.append(f"empty group/label cells ({cells_txt}); weights cannot make group and label independent")
    return WeightAssignment(
        sensitive=sensitive,
        cell_weights=cells,
        weights=tuple(cells[(s, y)] for s, y in zip(groups, labels)),
        warnings=tuple(warnings),
    )


def reweigh(table: AuditTable, sensitive: str) -> WeightAssignment:
    """Kamiran-Calders reweighing over the table's label and one sensitive column."""
    if table.roles.get(sensitive) is not ColumnRole.SENSITIVE:
        raise SchemaError("unknown sensitive column", column=sensitive)
    return reweigh_arrays(table.column(sensitive), table.labels, sensitive)


def weighted_table(table: AuditTable, assignment: WeightAssignment, name: str = "weight") -> AuditTable:
    """Copy of ``table`` with the row weights as its weight column."""
    if table.weight_column is not None:
        name = table.weight_column
    return table.with_column(name, assignment.weights, ColumnRole.WEIGHT)


# ---------------------------------------------------------------------------
# per-group thresholds


@dataclass(frozen=True)
class ThresholdPolicy:
    thresholds: Mapping[str, float]
    epsilon: float
    achieved_tpr: Mapping[str, float]
    accuracy: float
    max_tpr_gap: float
    sensitive: str | None = None
    objective: str = EQUAL_OPPORTUNITY
    performance: str = ACCURACY
    grid: tuple[float, ...] = field(default=(), repr=False)

    def to_dict(self) -> dict[str, Any]:
        return {
            "sensitive": self.sensitive,
            "objective": self.objective,
            "performance": self.performance,
            "epsilon": self.epsilon,
            "thresholds": dict(sorted(self.thresholds.items())),
            "achieved_tpr": dict(sorted(self.achieved_tpr.items())),
            "accuracy": self.accuracy,
            "max_tpr_gap": self.max_tpr_gap,
            "grid": list(self.grid),
        }

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "ThresholdPolicy":
        thresholds = {str(g): float(t) for g, t in doc["thresholds"].items()}
        for g, t in thresholds.items():
            if not 0.0 <= t <= 1.0:
                raise ValueError(f"threshold for group {g!r} outside [0,1]: {t}")
        return cls(
            thresholds=thresholds,
            epsilon=float(doc.get("epsilon", 0.0)),
            achieved_tpr={str(g): float(v) for g, v in doc.get("achieved_tpr", {}).items()},
            accuracy=float(doc.get("accuracy", math.nan)),
            max_tpr_gap=float(doc.get("max_tpr_gap", math.nan)),
            sensitive=doc.get("sensitive"),
            objective=doc.get("objective", EQUAL_OPPORTUNITY),
            performance=doc.get("performance", ACCURACY),
            grid=tuple(float(x) for x in doc.get("grid", ())),
        )


@dataclass(frozen=True)
class _GroupCurve:
    """TPR and objective contribution of one group at every grid threshold."""

    tpr: tuple[float, ...]
    tp: tuple[int, ...]
    correct: tuple[int, ...]
    gain: tuple[int, ...]


def _curve(pos: list[float], neg: list[float], grid: Sequence[float], weight_pos: int, weight_neg: int) -> _GroupCurve:
    pos, neg = sorted(pos), sorted(neg)
    tpr, tps, correct, gain = [], [], [], []
    for theta in grid:
        tp = len(pos) - bisect_left(pos, theta)
        tn = bisect_left(neg, theta)
        tps.append(tp)
        tpr.append(tp / len(pos))
        correct.append(tp + tn)
        gain.append(tp * weight_pos + tn * weight_neg)
    return _GroupCurve(tuple(tpr), tuple(tps), tuple(correct), tuple(gain))


def _check_grid(grid: Sequence[float]) -> tuple[float, ...]:
    grid = tuple(float(g) for g in grid)
    if not grid:
        raise ValueError("empty threshold grid")
    if any(not 0.0 <= g <= 1.0 for g in grid):
        raise ValueError("grid thresholds must lie in [0,1]")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("grid must be strictly increasing")
    return grid


def fit_thresholds(
    scores: Sequence[float],
    labels: Sequence[int],
    groups: Sequence[str],
    epsilon: float = 0.10,
    grid: Sequence[float] | None = None,
    performance: str = ACCURACY,
    sensitive: str | None = None,
) -> ThresholdPolicy:
    """Best per-group thresholds whose TPRs lie within ``epsilon`` of each other.

    Every feasible policy has all its TPRs inside a window ``[t, t + epsilon]``
    where ``t`` is the smallest TPR it uses, and ``t`` is attainable by some
    group on the grid. So the search scans those windows; inside one window
    the objective is a sum over groups and each group simply takes its best
    threshold whose TPR falls in the window (smallest threshold on ties).
    Across windows the winner has the highest objective, then the smallest
    TPR gap, then the lexicographically smallest threshold vector.

    Feasibility is judged on the computed float gap (``max - min <= epsilon``)
    so that re-measuring the policy reproduces it.
    """
    if not len(scores) == len(labels) == len(groups):
        raise ValueError("scores, labels and groups must have equal length")
    if not (epsilon >= 0 and math.isfinite(epsilon)):
        raise ValueError(f"epsilon must be >= 0, got {epsilon}")
    if performance not in (ACCURACY, BALANCED_ACCURACY):
        raise ValueError(f"unknown performance measure {performance!r}")
    grid = _check_grid(default_grid() if grid is None else grid)

    pos: dict[str, list[float]] = {}
    neg: dict[str, list[float]] = {}
    for s, y, g in zip(scores, labels, groups):
        pos.setdefault(g, [])
        neg.setdefault(g, [])
        (pos if y == 1 else neg)[g].append(s)
    names = sorted(pos)
    if not names:
        raise ValueError("no rows to fit thresholds on")
    for g in names:
        if not pos[g]:
            raise ValueError(f"group {g!r} has no positive-label rows; its TPR is undefined")

    n = len(labels)
    n_pos = sum(len(pos[g]) for g in names)
    n_neg = n - n_pos
    if performance == BALANCED_ACCURACY:
        if n_neg == 0:
            raise ValueError("balanced accuracy needs negative-label rows")
        # TP/(2P) + TN/(2N), scaled by 2PN to stay in integers
        w_pos, w_neg = n_neg, n_pos
    else:
        w_pos, w_neg = 1, 1

    curves = {g: _curve(pos[g], neg[g], grid, w_pos, w_neg) for g in names}

    # per group: distinct TPR -> (best gain, grid index of smallest threshold reaching it)
    best_at: dict[str, list[tuple[float, int, int]]] = {}
    for g in names:
        c = curves[g]
        table: dict[float, tuple[int, int]] = {}
        for j, (r, gain) in enumerate(zip(c.tpr, c.gain)):
            if r not in table or gain > table[r][0]:
                table[r] = (gain, j)
        best_at[g] = sorted((r, gain, j) for r, (gain, j) in table.items())

    targets = sorted({r for g in names for r, _, _ in best_at[g]})
    best_key = None
    best_choice = None
    for t in targets:
        choice = []
        for g in names:
            pick = None
            for r, gain, j in best_at[g]:
                if r < t or r - t > epsilon:
                    continue
                if pick is None or gain > pick[0] or (gain == pick[0] and j < pick[1]):
                    pick = (gain, j)
            if pick is None:
                break
            choice.append(pick[1])
        else:
            rates = [curves[g].tpr[j] for g, j in zip(names, choice)]
            gap = max(rates) - min(rates)
            if gap > epsilon:
                continue
            total = sum(curves[g].gain[j] for g, j in zip(names, choice))
            key = (-total, gap, tuple(grid[j] for j in choice))
            if best_key is None or key < best_key:
                best_key, best_choice = key, choice

    if best_choice is None:
        raise InfeasibleError(
            f"no threshold policy on this grid keeps the TPR gap within epsilon={epsilon}; "
            "try a larger epsilon or a finer grid"
        )

    correct = sum(curves[g].correct[j] for g, j in zip(names, best_choice))
    rates = {g: curves[g].tpr[j] for g, j in zip(names, best_choice)}
    return ThresholdPolicy(
        thresholds={g: grid[j] for g, j in zip(names, best_choice)},
        epsilon=epsilon,
        achieved_tpr=rates,
        accuracy=correct / n,
        max_tpr_gap=max(rates.values()) - min(rates.values()),
        sensitive=sensitive,
        performance=performance,
        grid=grid,
    )


def optimize_thresholds(
    table: AuditTable,
    sensitive: str,
    epsilon: float = 0.10,
    grid: Sequence[float] | None = None,
    performance: str = ACCURACY,
) -> ThresholdPolicy:
    if table.scores is None:
        raise SchemaError("threshold optimization needs a score column")
    if table.roles.get(sensitive) is not ColumnRole.SENSITIVE:
        raise SchemaError("unknown sensitive column", column=sensitive)
    return fit_thresholds(
        table.scores, table.labels, table.column(sensitive), epsilon, grid, performance, sensitive
    )


def apply_thresholds(scores: Sequence[float], groups: Sequence[str], thresholds: Mapping[str, float]) -> tuple[int, ...]:
    out = []
    for s, g in zip(scores, groups):
        if g not in thresholds:
            raise UnknownGroupError(f"group {g!r} has no threshold in the policy")
        out.append(1 if s >= thresholds[g] else 0)
    return tuple(out)


def apply_policy(table: AuditTable, policy: ThresholdPolicy, sensitive: str | None = None) -> tuple[int, ...]:
    """Predictions ``score >= threshold[group]`` for every row of ``table``."""
    sensitive = sensitive or policy.sensitive
    if sensitive is None:
        raise ValueError("policy does not name its sensitive column; pass one explicitly")
    if table.scores is None:
        raise SchemaError("applying a threshold policy needs a score column")
    return apply_thresholds(table.scores, table.column(sensitive), policy.thresholds)


def apply_policy_to_table(table: AuditTable, policy: ThresholdPolicy, sensitive: str | None = None) -> AuditTable:
    preds = apply_policy(table, policy, sensitive)
    name = table.prediction_column or "prediction"
    while name in table.data and table.roles[name] is not ColumnRole.PREDICTION:
        name = "_" + name
    return table.with_column(name, preds, ColumnRole.PREDICTION)
