"""Group confusion statistics, fairness metrics and criterion verdicts.

Rates whose denominator is zero are ``None`` ("undefined") and stay that way
through every derived metric; they are never replaced by 0 or 1.
Differences are oriented non-privileged minus privileged, so a negative value
means the non-privileged group is worse off.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Hashable, Mapping, Sequence

from .dataset import AuditTable, ColumnRole, SchemaError

# Slack for comparing a difference of two rates against a tolerance. Rates are
# ratios of integers, so a mathematically exact tie can be off by an ulp.
_SLACK = 1e-12

PASS, FAIL, UNDEFINED = "pass", "fail", "undefined"
METRICS = ("spd", "di", "eod", "aod", "ppd")


def _ratio(num: int, den: int) -> float | None:
    return None if den == 0 else num / den


def _diff(a: float | None, b: float | None) -> float | None:
    return None if a is None or b is None else a - b


@dataclass(frozen=True)
class MetricConfig:
    epsilon: float = 0.10
    alpha: float = 1.0

    def __post_init__(self):
        if not (self.epsilon >= 0 and math.isfinite(self.epsilon)):
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if not (self.alpha >= 0 and math.isfinite(self.alpha)):
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")


@dataclass(frozen=True)
class GroupConfusion:
    group: str
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def base_rate(self) -> float | None:
        return _ratio(self.tp + self.fn, self.n)

    @property
    def selection_rate(self) -> float | None:
        return _ratio(self.tp + self.fp, self.n)

    @property
    def tpr(self) -> float | None:
        return _ratio(self.tp, self.tp + self.fn)

    @property
    def fpr(self) -> float | None:
        return _ratio(self.fp, self.fp + self.tn)

    @property
    def ppv(self) -> float | None:
        return _ratio(self.tp, self.tp + self.fp)

    def to_dict(self) -> dict:
        return {
            "group": self.group,
            "tp": self.tp,
            "fp": self.fp,
            "tn": self.tn,
            "fn": self.fn,
            "n": self.n,
            "base_rate": self.base_rate,
            "selection_rate": self.selection_rate,
            "tpr": self.tpr,
            "fpr": self.fpr,
            "ppv": self.ppv,
        }


def confusion_counts(
    labels: Sequence[int], predictions: Sequence[int], groups: Sequence[str]
) -> dict[str, GroupConfusion]:
    """Per-group confusion cells, keyed by group in sorted order."""
    if not len(labels) == len(predictions) == len(groups):
        raise ValueError("labels, predictions and groups must have equal length")
    cells: dict[str, list[int]] = {}
    for y, p, g in zip(labels, predictions, groups):
        c = cells.setdefault(g, [0, 0, 0, 0])
        c[(1 - y) * 2 + (1 - p)] += 1  # tp, fn, fp, tn
    return {
        g: GroupConfusion(g, tp=c[0], fp=c[2], tn=c[3], fn=c[1])
        for g, c in sorted(cells.items())
    }


def confusion_by_group(table: AuditTable, sensitive: str) -> dict[str, GroupConfusion]:
    if sensitive not in table.data or table.roles[sensitive] is not ColumnRole.SENSITIVE:
        raise SchemaError("unknown sensitive column", column=sensitive)
    if table.predictions is None:
        raise SchemaError("table has no prediction column; binarize the scores first")
    return confusion_counts(table.labels, table.predictions, table.column(sensitive))


@dataclass(frozen=True)
class GroupMetrics:
    group: str
    spd: float | None
    di: float | None
    eod: float | None
    aod: float | None
    ppd: float | None
    tpr_gap: float | None
    fpr_gap: float | None

    def to_dict(self) -> dict:
        return {
            "group": self.group,
            "spd": self.spd,
            "di": self.di,
            "eod": self.eod,
            "aod": self.aod,
            "ppd": self.ppd,
        }


@dataclass(frozen=True)
class FairnessReport:
    privileged: str
    epsilon: float
    groups: Mapping[str, GroupMetrics]
    verdicts: Mapping[str, str]
    summary: Mapping[str, float | None]
    confusions: Mapping[str, GroupConfusion] = field(default_factory=dict)

    def max_abs(self, metric: str) -> float | None:
        """Largest |value| of a difference metric over groups; None if any is undefined."""
        values = [getattr(m, metric) for m in self.groups.values()]
        if any(v is None for v in values):
            return None
        return max((abs(v) for v in values), default=0.0)

    def to_dict(self) -> dict:
        return {
            "privileged": self.privileged,
            "epsilon": self.epsilon,
            "groups": {g: m.to_dict() for g, m in self.groups.items()},
            "verdicts": dict(self.verdicts),
            "summary": dict(self.summary),
            "confusions": {g: c.to_dict() for g, c in self.confusions.items()},
        }


def _worst(values: list[float | None], metric: str) -> float | None:
    # signed value of the group farthest from parity; first group wins ties
    if any(v is None for v in values) or not values:
        return None
    if metric == "di":
        key = lambda v: math.inf if v == 0 else max(v, 1 / v)
    else:
        key = abs
    best = values[0]
    for v in values[1:]:
        if key(v) > key(best):
            best = v
    return best


def _verdict(gaps: list[float | None], epsilon: float) -> str:
    if any(g is None for g in gaps):
        return UNDEFINED
    return PASS if all(abs(g) <= epsilon + _SLACK for g in gaps) else FAIL


def fairness_report(
    confusions: Mapping[str, GroupConfusion],
    privileged: str,
    config: MetricConfig | None = None,
) -> FairnessReport:
    """Compare every group against ``privileged`` and judge the three criteria.

    Independence looks at selection-rate differences, separation at both TPR
    and FPR differences, sufficiency at PPV differences; each passes when the
    worst group is within ``config.epsilon``.
    """
    config = config or MetricConfig()
    if privileged not in confusions:
        raise KeyError(f"privileged group {privileged!r} not present")
    priv = confusions[privileged]
    if priv.selection_rate is None:
        raise ValueError(f"privileged group {privileged!r} has no rows")

    groups = {}
    for g, c in confusions.items():
        if g == privileged:
            continue
        tpr_gap = _diff(c.tpr, priv.tpr)
        fpr_gap = _diff(c.fpr, priv.fpr)
        groups[g] = GroupMetrics(
            group=g,
            spd=_diff(c.selection_rate, priv.selection_rate),
            di=None if c.selection_rate is None or priv.selection_rate == 0 else c.selection_rate / priv.selection_rate,
            eod=tpr_gap,
            aod=None if tpr_gap is None or fpr_gap is None else 0.5 * (fpr_gap + tpr_gap),
            ppd=_diff(c.ppv, priv.ppv),
            tpr_gap=tpr_gap,
            fpr_gap=fpr_gap,
        )

    ms = list(groups.values())
    verdicts = {
        "independence": _verdict([m.spd for m in ms], config.epsilon),
        "separation": _verdict([m.tpr_gap for m in ms] + [m.fpr_gap for m in ms], config.epsilon),
        "sufficiency": _verdict([m.ppd for m in ms], config.epsilon),
    }
    summary = {name: _worst([getattr(m, name) for m in ms], name) for name in METRICS}
    return FairnessReport(
        privileged=privileged,
        epsilon=config.epsilon,
        groups=groups,
        verdicts=verdicts,
        summary=summary,
        confusions=dict(confusions),
    )


def benefits(labels: Sequence[int], predictions: Sequence[int]) -> list[int]:
    """Individual benefit ŷ − y + 1: 0 for a false negative, 2 for a false positive."""
    if len(labels) != len(predictions):
        raise ValueError("labels and predictions must have equal length")
    return [p - y + 1 for y, p in zip(labels, predictions)]


def generalized_entropy(values: Sequence[float], alpha: float = 1.0) -> float | None:
    """Generalized entropy index GE(alpha) of non-negative ``values``.

    Returns None when the mean is zero, or for ``alpha == 0`` when some value
    is zero (the index diverges).
    """
    n = len(values)
    if n == 0:
        raise ValueError("generalized entropy of an empty sequence")
    mu = math.fsum(values) / n
    if mu == 0:
        return None
    ratios = [v / mu for v in values]
    if alpha == 1:
        total = math.fsum(r * math.log(r) for r in ratios if r > 0)
    elif alpha == 0:
        if any(r == 0 for r in ratios):
            return None
        total = -math.fsum(math.log(r) for r in ratios)
    else:
        total = math.fsum(r**alpha - 1 for r in ratios) / (alpha * (alpha - 1))
    return max(0.0, total / n)


def theil_index(
    labels: Sequence[int], predictions: Sequence[int], config: MetricConfig | None = None
) -> float | None:
    """GE index over individual benefits; alpha=1 (the default) is the Theil index."""
    config = config or MetricConfig()
    if len(labels) == 0:
        raise ValueError("theil_index needs at least one row")
    return generalized_entropy(benefits(labels, predictions), config.alpha)


def mutual_information(
    x: Sequence[Hashable], y: Sequence[Hashable], weights: Sequence[float] | None = None
) -> float:
    """Plug-in mutual information in nats between two categorical sequences.

    With ``weights`` the empirical distributions are weighted frequencies.
    Terms are combined with :func:`math.fsum`, so the result does not depend
    on row order and is exactly symmetric in ``x`` and ``y``.
    """
    if len(x) != len(y):
        raise ValueError(f"length mismatch: {len(x)} vs {len(y)}")
    if weights is not None and len(weights) != len(x):
        raise ValueError(f"length mismatch: {len(weights)} weights for {len(x)} rows")
    if len(x) == 0:
        return 0.0

    if weights is None:
        joint = Counter(zip(x, y))
        px, py = Counter(x), Counter(y)
        n = len(x)
        terms = [
            (c / n) * math.log((c * n) / (px[a] * py[b]))
            for (a, b), c in joint.items()
        ]
    else:
        joint_w: dict = {}
        px_w: dict = {}
        py_w: dict = {}
        for a, b, w in zip(x, y, weights):
            joint_w.setdefault((a, b), []).append(w)
            px_w.setdefault(a, []).append(w)
            py_w.setdefault(b, []).append(w)
        total = math.fsum(weights)
        if total <= 0:
            raise ValueError("weights must have a positive sum")
        pa = {a: math.fsum(ws) / total for a, ws in px_w.items()}
        pb = {b: math.fsum(ws) / total for b, ws in py_w.items()}
        terms = []
        for (a, b), ws in joint_w.items():
            p = math.fsum(ws) / total
            if p > 0:
                terms.append(p * math.log(p / (pa[a] * pb[b])))
    return max(0.0, math.fsum(terms))
