"""Proxy-variable detection: association between features and sensitive columns.

Categorical features are scored with Cramér's V (no small-sample bias
correction), numeric features with the correlation ratio eta. Both live in
[0, 1]. Missing numeric values are dropped pairwise; a missing categorical
value is its own category.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

from .dataset import CATEGORICAL, AuditTable

CRAMERS_V = "cramers_v"
CORRELATION_RATIO = "correlation_ratio"


def cramers_v(a: Sequence[str], b: Sequence[str]) -> float | None:
    """sqrt(chi2 / (n * (min(r, c) - 1))); None when either side is constant."""
    if len(a) != len(b):
        raise ValueError("length mismatch")
    n = len(a)
    rows, cols = Counter(a), Counter(b)
    k = min(len(rows), len(cols))
    if n == 0 or k < 2:
        return None
    joint = Counter(zip(a, b))
    # chi2 = n * (sum_ij O_ij^2 / (R_i C_j) - 1); only observed cells contribute
    s = math.fsum(o * o / (rows[i] * cols[j]) for (i, j), o in joint.items())
    chi2 = n * (s - 1.0)
    v2 = chi2 / (n * (k - 1))
    return min(1.0, math.sqrt(max(0.0, v2)))


def correlation_ratio(values: Sequence[float], groups: Sequence[str]) -> float | None:
    """sqrt(SS_between / SS_total); None for a constant feature or a single group."""
    if len(values) != len(groups):
        raise ValueError("length mismatch")
    n = len(values)
    if n == 0:
        return None
    by_group: dict[str, list[float]] = {}
    for x, g in zip(values, groups):
        by_group.setdefault(g, []).append(x)
    if len(by_group) < 2:
        return None
    mean = math.fsum(values) / n
    ss_total = math.fsum((x - mean) ** 2 for x in values)
    if ss_total == 0:
        return None
    ss_between = math.fsum(
        len(xs) * (math.fsum(xs) / len(xs) - mean) ** 2 for xs in by_group.values()
    )
    return min(1.0, math.sqrt(ss_between / ss_total))


def association(
    feature: Sequence, sensitive: Sequence[str], kind: str = CATEGORICAL
) -> tuple[float | None, str]:
    """Score a feature column against a categorical sensitive column.

    ``kind`` is the feature's column kind; numeric features may contain None,
    which drops the row from this pair only.
    """
    if kind == CATEGORICAL:
        return cramers_v(feature, sensitive), CRAMERS_V
    pairs = [(x, s) for x, s in zip(feature, sensitive) if x is not None]
    return correlation_ratio([x for x, _ in pairs], [s for _, s in pairs]), CORRELATION_RATIO


@dataclass(frozen=True)
class ProxyFinding:
    feature: str
    sensitive: str
    score: float
    method: str
    flagged: bool

    def to_dict(self) -> dict:
        return {
            "feature": self.feature,
            "sensitive": self.sensitive,
            "score": self.score,
            "method": self.method,
            "flagged": self.flagged,
        }


@dataclass(frozen=True)
class ProxyScan:
    threshold: float
    findings: tuple[ProxyFinding, ...]
    warnings: tuple[str, ...] = field(default=())

    @property
    def flagged(self) -> list[ProxyFinding]:
        return [f for f in self.findings if f.flagged]

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "findings": [f.to_dict() for f in self.findings],
            "warnings": list(self.warnings),
        }


def proxy_scan(table: AuditTable, threshold: float = 0.5) -> ProxyScan:
    """Score every (feature, sensitive) pair and flag those at or above ``threshold``.

    Pairs with an undefined score are left out and reported in ``warnings``.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"proxy threshold must lie in [0,1], got {threshold}")
    findings, warnings = [], []
    for feat in table.feature_columns:
        for sens in table.sensitive_columns:
            score, method = association(table.column(feat), table.column(sens), table.kinds[feat])
            if score is None:
                warnings.append(f"{feat} vs {sens}: association undefined (constant column)")
                continue
            findings.append(ProxyFinding(feat, sens, score, method, score >= threshold))
    findings.sort(key=lambda f: (-f.score, f.feature, f.sensitive))
    return ProxyScan(threshold=threshold, findings=tuple(findings), warnings=tuple(warnings))
