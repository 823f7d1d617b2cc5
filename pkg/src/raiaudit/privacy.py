"""Re-identification risk scan over quasi-identifier columns.

Rows are grouped by their exact quasi-identifier tuple, after optional
binning. Any class smaller than ``k`` violates k-anonymity. The report lists
violating row indices but not the values that make them identifiable, unless
``include_values`` is set.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

from .dataset import MISSING, AuditTable, SchemaError


@dataclass(frozen=True)
class Binning:
    """How to coarsen one column before grouping.

    ``edges`` (ascending) cut a numeric column into half-open intervals
    ``[e_i, e_i+1)``; ``merge`` maps categorical values onto coarser labels
    (unmapped values pass through).
    """

    edges: tuple[float, ...] = ()
    merge: Mapping[str, str] | None = None

    def __post_init__(self):
        edges = tuple(float(e) for e in self.edges)
        if any(b <= a for a, b in zip(edges, edges[1:])):
            raise ValueError("bin edges must be strictly increasing")
        object.__setattr__(self, "edges", edges)

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "Binning":
        return cls(edges=tuple(doc.get("edges", ())), merge=dict(doc["merge"]) if doc.get("merge") else None)

    def apply(self, value: Any) -> Any:
        if value is None or value == MISSING:
            return MISSING
        if self.merge is not None and isinstance(value, str):
            return self.merge.get(value, value)
        if self.edges and isinstance(value, (int, float)):
            i = bisect_right(self.edges, value)
            lo = "-inf" if i == 0 else repr(self.edges[i - 1])
            hi = "inf" if i == len(self.edges) else repr(self.edges[i])
            return f"[{lo}, {hi})"
        return value


def _sort_key(key: tuple) -> tuple:
    # numbers before strings, numbers compared numerically
    return tuple((0, v, "") if isinstance(v, (int, float)) else (1, 0, str(v)) for v in key)


@dataclass(frozen=True)
class EquivalenceClass:
    key: tuple
    rows: tuple[int, ...]

    @property
    def size(self) -> int:
        return len(self.rows)


@dataclass(frozen=True)
class RiskScan:
    quasi_identifiers: tuple[str, ...]
    k: int
    n: int
    classes: tuple[EquivalenceClass, ...]

    @property
    def unique_rate(self) -> float:
        return sum(1 for c in self.classes if c.size == 1) / self.n if self.n else 0.0

    def violating_rows_at(self, k: int) -> list[int]:
        return sorted(i for c in self.classes if c.size < k for i in c.rows)

    @property
    def violating_rows(self) -> list[int]:
        return self.violating_rows_at(self.k)

    @property
    def min_class_size(self) -> int:
        return min((c.size for c in self.classes), default=0)

    def to_dict(self, include_values: bool = False) -> dict:
        classes = []
        for c in self.classes:
            entry: dict[str, Any] = {"size": c.size}
            if include_values:
                entry["values"] = list(c.key)
            classes.append(entry)
        return {
            "quasi_identifiers": list(self.quasi_identifiers),
            "k": self.k,
            "n": self.n,
            "n_classes": len(self.classes),
            "min_class_size": self.min_class_size,
            "unique_rate": self.unique_rate,
            "violating_rows": self.violating_rows,
            "n_violating": len(self.violating_rows),
            "classes": classes,
            "values_included": include_values,
        }


def scan_rows(
    columns: Mapping[str, Sequence], quasi_identifiers: Sequence[str], k: int = 5,
    binning: Mapping[str, Binning] | None = None,
) -> RiskScan:
    qis = tuple(quasi_identifiers)
    if not qis:
        raise ValueError("re-identification scan needs at least one quasi-identifier")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    binning = binning or {}
    for q in qis:
        if q not in columns:
            raise SchemaError("quasi-identifier not in table", column=q)
    n = len(columns[qis[0]])
    groups: dict[tuple, list[int]] = {}
    for i in range(n):
        key = tuple(binning[q].apply(columns[q][i]) if q in binning else columns[q][i] for q in qis)
        key = tuple(MISSING if v is None else v for v in key)
        groups.setdefault(key, []).append(i)
    classes = sorted(
        (EquivalenceClass(key, tuple(rows)) for key, rows in groups.items()),
        key=lambda c: (c.size, _sort_key(c.key)),
    )
    return RiskScan(quasi_identifiers=qis, k=k, n=n, classes=tuple(classes))


def reidentification_scan(
    table: AuditTable,
    quasi_identifiers: Sequence[str] | None = None,
    k: int = 5,
    binning: Mapping[str, Binning | Mapping[str, Any]] | None = None,
) -> RiskScan:
    """Group rows by quasi-identifier tuple; defaults to the table's quasi-identifier columns."""
    qis = list(quasi_identifiers) if quasi_identifiers is not None else table.quasi_identifiers
    bins = {c: b if isinstance(b, Binning) else Binning.from_dict(b) for c, b in (binning or {}).items()}
    return scan_rows(table.data, qis, k, bins)
