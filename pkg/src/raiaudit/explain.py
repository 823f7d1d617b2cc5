"""Global surrogate explanations.

A shallow CART-style tree is grown on the black box's *predictions* (never the
true labels) using the same input features. Its fidelity says how far the
tree can be trusted as a description of the black box; its impurity-based
feature importances say which inputs drive the black box's decisions.

Splits are binary: ``x < v`` for numeric columns, with ``v`` the midpoint of
two consecutive distinct values, and ``x == c`` versus the rest for
categorical columns. A missing numeric value always goes to the ``>=`` side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Mapping, Sequence, Union

from .dataset import CATEGORICAL, NUMERIC, AuditTable


def gini(n0: int, n1: int) -> float:
    n = n0 + n1
    if n == 0:
        return 0.0
    return 1.0 - (n0 * n0 + n1 * n1) / (n * n)


@dataclass(frozen=True)
class Leaf:
    prediction: int
    counts: tuple[int, int]

    @property
    def n(self) -> int:
        return self.counts[0] + self.counts[1]

    @property
    def impurity(self) -> float:
        return gini(*self.counts)


@dataclass(frozen=True)
class Split:
    feature: str
    kind: str
    value: Union[float, str]
    left: "Node"
    right: "Node"
    counts: tuple[int, int]

    @property
    def n(self) -> int:
        return self.counts[0] + self.counts[1]

    @property
    def impurity(self) -> float:
        return gini(*self.counts)

    @property
    def impurity_decrease(self) -> float:
        n = self.n
        return self.impurity - (self.left.n / n) * self.left.impurity - (self.right.n / n) * self.right.impurity

    def goes_left(self, x: Any) -> bool:
        if self.kind == NUMERIC:
            return x is not None and x < self.value
        return x == self.value

    def condition(self, left: bool) -> str:
        if self.kind == NUMERIC:
            return f"{self.feature} {'<' if left else '>='} {self.value:.6g}"
        return f"{self.feature} {'==' if left else '!='} {self.value}"


Node = Union[Leaf, Split]


@dataclass(frozen=True)
class SurrogateTree:
    root: Node
    features: tuple[str, ...]
    kinds: Mapping[str, str]
    max_depth: int
    min_leaf: int

    @property
    def n(self) -> int:
        return self.root.n

    @property
    def depth(self) -> int:
        def _depth(node: Node) -> int:
            return 0 if isinstance(node, Leaf) else 1 + max(_depth(node.left), _depth(node.right))

        return _depth(self.root)

    def leaf_for(self, row: Mapping[str, Any]) -> Leaf:
        node = self.root
        while isinstance(node, Split):
            node = node.left if node.goes_left(row[node.feature]) else node.right
        return node

    def predict(self, features: Mapping[str, Sequence]) -> list[int]:
        missing = [f for f in self.features if f not in features]
        if missing:
            raise ValueError(f"feature columns missing from evaluation data: {missing}")
        n = len(features[self.features[0]]) if self.features else 0
        cols = [features[f] for f in self.features]
        return [self.leaf_for(dict(zip(self.features, (c[i] for c in cols)))).prediction for i in range(n)]

    def rules(self) -> list[str]:
        """One line per leaf: the path conditions and the predicted class."""
        lines = []

        def walk(node: Node, path: list[str]):
            if isinstance(node, Leaf):
                cond = " and ".join(path) if path else "always"
                lines.append(f"{cond} → class {node.prediction} (n={node.n})")
                return
            walk(node.left, path + [node.condition(True)])
            walk(node.right, path + [node.condition(False)])

        walk(self.root, [])
        return lines

    def to_dict(self) -> dict:
        def dump(node: Node) -> dict:
            if isinstance(node, Leaf):
                return {"class": node.prediction, "n": node.n, "counts": list(node.counts)}
            rule = {"threshold": node.value} if node.kind == NUMERIC else {"category": node.value}
            return {
                "feature": node.feature,
                "kind": node.kind,
                **rule,
                "n": node.n,
                "counts": list(node.counts),
                "left": dump(node.left),
                "right": dump(node.right),
            }

        return {
            "max_depth": self.max_depth,
            "min_leaf": self.min_leaf,
            "features": list(self.features),
            "tree": dump(self.root),
        }


def _infer_kind(values: Sequence) -> str:
    ok = all(v is None or (isinstance(v, (int, float)) and not isinstance(v, bool)) for v in values)
    return NUMERIC if ok else CATEGORICAL


def _leaf(n0: int, n1: int) -> Leaf:
    # ties go to the positive class, matching the >= binarization rule
    return Leaf(prediction=1 if n1 >= n0 else 0, counts=(n0, n1))


class _Best:
    """Running best split, compared exactly as the fraction num/den."""

    def __init__(self, num: int, den: int):
        self.num, self.den = num, den
        self.split: tuple[str, str, Any] | None = None

    def offer(self, nl: tuple[int, int], nr: tuple[int, int], split: tuple[str, str, Any]):
        # maximize ssq_l/n_l + ssq_r/n_r, i.e. minimize weighted Gini
        n_l, n_r = nl[0] + nl[1], nr[0] + nr[1]
        num = (nl[0] ** 2 + nl[1] ** 2) * n_r + (nr[0] ** 2 + nr[1] ** 2) * n_l
        den = n_l * n_r
        if num * self.den > self.num * den:
            self.num, self.den, self.split = num, den, split


def fit_surrogate(
    features: Mapping[str, Sequence],
    predictions: Sequence[int],
    max_depth: int = 4,
    min_leaf: int = 5,
    kinds: Mapping[str, str] | None = None,
) -> SurrogateTree:
    """Grow a Gini tree that mimics ``predictions`` from ``features``.

    Column order of ``features`` is the tie-break order between equally good
    splits; within a column the smaller split value wins.
    """
    names = tuple(features)
    if not names:
        raise ValueError("at least one feature column is required")
    if max_depth < 0 or min_leaf < 1:
        raise ValueError("max_depth must be >= 0 and min_leaf >= 1")
    n = len(predictions)
    if any(len(features[f]) != n for f in names):
        raise ValueError("feature columns and predictions differ in length")
    if any(p not in (0, 1) for p in predictions):
        raise ValueError("black-box predictions must be binary")
    if n < min_leaf:
        raise ValueError(f"need at least min_leaf={min_leaf} rows, got {n}")
    kinds = dict(kinds or {})
    for f in names:
        kinds.setdefault(f, _infer_kind(features[f]))
    cols = [features[f] for f in names]
    y = list(predictions)

    def grow(idx: list[int], depth: int) -> Node:
        n1 = sum(y[i] for i in idx)
        n0 = len(idx) - n1
        m = len(idx)
        if depth >= max_depth or n0 == 0 or n1 == 0 or m < 2 * min_leaf:
            return _leaf(n0, n1)
        # parent score ssq/m; a split must beat it strictly
        best = _Best(n0 * n0 + n1 * n1, m)
        for name, col in zip(names, cols):
            if kinds[name] == NUMERIC:
                _numeric_candidates(name, col, idx, y, n0, n1, min_leaf, best)
            else:
                _categorical_candidates(name, col, idx, y, n0, n1, min_leaf, best)
        if best.split is None:
            return _leaf(n0, n1)
        name, kind, value = best.split
        col = features[name]
        probe = Split(name, kind, value, _leaf(0, 0), _leaf(0, 0), (0, 0))
        left = [i for i in idx if probe.goes_left(col[i])]
        right = [i for i in idx if not probe.goes_left(col[i])]
        return Split(name, kind, value, grow(left, depth + 1), grow(right, depth + 1), (n0, n1))

    root = grow(list(range(n)), 0)
    return SurrogateTree(root=root, features=names, kinds=kinds, max_depth=max_depth, min_leaf=min_leaf)


def _numeric_candidates(name, col, idx, y, n0, n1, min_leaf, best: _Best) -> None:
    present = sorted((col[i], y[i]) for i in idx if col[i] is not None)
    l0 = l1 = 0
    for k in range(len(present) - 1):
        v, label = present[k]
        if label:
            l1 += 1
        else:
            l0 += 1
        nxt = present[k + 1][0]
        if nxt == v:
            continue
        n_left = l0 + l1
        if n_left < min_leaf or len(idx) - n_left < min_leaf:
            continue
        cut = (v + nxt) / 2
        if not v < cut <= nxt:
            cut = nxt
        best.offer((l0, l1), (n0 - l0, n1 - l1), (name, NUMERIC, cut))


def _categorical_candidates(name, col, idx, y, n0, n1, min_leaf, best: _Best) -> None:
    counts: dict[str, list[int]] = {}
    for i in idx:
        counts.setdefault(col[i], [0, 0])[y[i]] += 1
    if len(counts) < 2:
        return
    for cat in sorted(counts):
        c0, c1 = counts[cat]
        if c0 + c1 < min_leaf or len(idx) - (c0 + c1) < min_leaf:
            continue
        best.offer((c0, c1), (n0 - c0, n1 - c1), (name, CATEGORICAL, cat))


def surrogate_fidelity(tree: SurrogateTree, features: Mapping[str, Sequence], predictions: Sequence[int]) -> float:
    """Share of rows on which the tree agrees with the black box."""
    if len(predictions) == 0:
        raise ValueError("fidelity of an empty evaluation set is undefined")
    surrogate = tree.predict(features)
    if len(surrogate) != len(predictions):
        raise ValueError("feature columns and predictions differ in length")
    return sum(a == b for a, b in zip(surrogate, predictions)) / len(predictions)


def feature_importance(tree: SurrogateTree) -> list[tuple[str, float]]:
    """Normalized impurity-decrease importances, largest first; empty for a single leaf."""
    raw: dict[str, list[float]] = {}
    total_n = tree.n

    def walk(node: Node):
        if isinstance(node, Leaf):
            return
        raw.setdefault(node.feature, []).append((node.n / total_n) * node.impurity_decrease)
        walk(node.left)
        walk(node.right)

    walk(tree.root)
    sums = {f: math.fsum(v) for f, v in raw.items()}
    total = math.fsum(sums.values())
    if not sums or total <= 0:
        return []
    order = {f: i for i, f in enumerate(tree.features)}
    ranked = sorted(sums.items(), key=lambda kv: (-kv[1], order[kv[0]]))
    return [(f, v / total) for f, v in ranked]


@dataclass(frozen=True)
class SurrogateExplanation:
    tree: SurrogateTree
    fidelity: float
    importances: tuple[tuple[str, float], ...]

    def to_dict(self) -> dict:
        return {
            "fidelity": self.fidelity,
            "depth": self.tree.depth,
            "importances": [{"feature": f, "importance": v} for f, v in self.importances],
            "rules": self.tree.rules(),
            "tree": self.tree.to_dict(),
        }


def explain_table(table: AuditTable, max_depth: int = 4, min_leaf: int = 5) -> SurrogateExplanation:
    """Fit a surrogate on the table's feature columns against its predictions."""
    if table.predictions is None:
        raise ValueError("explaining needs a prediction column; binarize the scores first")
    feats = {f: table.column(f) for f in table.feature_columns}
    if not feats:
        raise ValueError("the table has no feature columns to explain with")
    kinds = {f: table.kinds[f] for f in feats}
    tree = fit_surrogate(feats, table.predictions, max_depth, min_leaf, kinds)
    fidelity = surrogate_fidelity(tree, feats, table.predictions)
    return SurrogateExplanation(tree, fidelity, tuple(feature_importance(tree)))
