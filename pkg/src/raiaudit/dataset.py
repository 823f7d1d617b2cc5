"""Loading and validation of tabular prediction files.

An :class:`AuditTable` is the immutable, fully validated view of a prediction
file that every other module works on. Tables are built by :func:`load_table`
(or :meth:`AuditTable.with_column`) and validate themselves on construction,
so a table that exists is a table that satisfies its invariants.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import Any, Iterable, Mapping, Sequence

MISSING = "<missing>"

NUMERIC = "numeric"
CATEGORICAL = "categorical"

FORMATS = ("csv", "jsonl")


class ColumnRole(str, Enum):
    LABEL = "label"
    SCORE = "score"
    PREDICTION = "prediction"
    SENSITIVE = "sensitive"
    FEATURE = "feature"
    QUASI_IDENTIFIER = "quasi_identifier"
    WEIGHT = "weight"
    IGNORE = "ignore"


class DatasetError(ValueError):
    """Base error for anything wrong with an input table.

    ``row`` is the 0-based data row index (header excluded) and ``column`` the
    column name, when the problem can be pinned to one.
    """

    def __init__(self, message: str, *, row: int | None = None, column: str | None = None):
        where = []
        if column is not None:
            where.append(f"column {column!r}")
        if row is not None:
            where.append(f"row {row}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.row = row
        self.column = column


class ParseError(DatasetError):
    pass


class SchemaError(DatasetError):
    pass


class ValidationError(DatasetError):
    pass


@dataclass(frozen=True)
class Schema:
    """Column roles plus the privileged category of each sensitive column.

    Columns not named in ``roles`` get the ``ignore`` role. ``categorical``
    forces feature/quasi-identifier columns to be read as categories even
    when every value looks numeric (zip codes, encoded ids).
    """

    roles: Mapping[str, ColumnRole]
    privileged: Mapping[str, str] = field(default_factory=dict)
    invert_label: bool = False
    categorical: tuple[str, ...] = ()

    def __post_init__(self):
        roles = {}
        for name, role in self.roles.items():
            try:
                roles[name] = ColumnRole(role)
            except ValueError:
                raise SchemaError(f"unknown role {role!r}", column=name) from None
        object.__setattr__(self, "roles", MappingProxyType(roles))
        object.__setattr__(
            self, "privileged", MappingProxyType({k: str(v) for k, v in self.privileged.items()})
        )
        object.__setattr__(self, "categorical", tuple(self.categorical))

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "Schema":
        return cls(
            roles=dict(doc.get("roles", {})),
            privileged=dict(doc.get("privileged", {})),
            invert_label=bool(doc.get("invert_label", False)),
            categorical=tuple(doc.get("categorical", ())),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "roles": {k: v.value for k, v in self.roles.items()},
            "privileged": dict(self.privileged),
            "invert_label": self.invert_label,
            "categorical": list(self.categorical),
        }


@dataclass(frozen=True, eq=True)
class AuditTable:
    """Validated, immutable prediction table.

    ``data`` maps each column name to a tuple of values: ``int`` 0/1 for
    label and prediction columns, ``float`` for score, weight and numeric
    feature columns (``None`` where missing), ``str`` for categorical columns
    (:data:`MISSING` where missing).
    """

    columns: tuple[str, ...]
    data: Mapping[str, tuple]
    kinds: Mapping[str, str]
    roles: Mapping[str, ColumnRole]
    privileged: Mapping[str, str]

    __hash__ = None  # type: ignore[assignment]

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "data", MappingProxyType({c: tuple(self.data[c]) for c in self.columns}))
        object.__setattr__(self, "kinds", MappingProxyType(dict(self.kinds)))
        object.__setattr__(self, "roles", MappingProxyType({c: ColumnRole(r) for c, r in self.roles.items()}))
        object.__setattr__(self, "privileged", MappingProxyType(dict(self.privileged)))
        _validate(self)

    @property
    def n_rows(self) -> int:
        return len(self.data[self.columns[0]]) if self.columns else 0

    def column(self, name: str) -> tuple:
        try:
            return self.data[name]
        except KeyError:
            raise SchemaError("unknown column", column=name) from None

    def columns_with(self, role: ColumnRole | str) -> list[str]:
        role = ColumnRole(role)
        return [c for c in self.columns if self.roles[c] is role]

    def _single(self, role: ColumnRole) -> str | None:
        cols = self.columns_with(role)
        return cols[0] if cols else None

    @property
    def label_column(self) -> str:
        return self._single(ColumnRole.LABEL)  # type: ignore[return-value]

    @property
    def score_column(self) -> str | None:
        return self._single(ColumnRole.SCORE)

    @property
    def prediction_column(self) -> str | None:
        return self._single(ColumnRole.PREDICTION)

    @property
    def weight_column(self) -> str | None:
        return self._single(ColumnRole.WEIGHT)

    @property
    def labels(self) -> tuple[int, ...]:
        return self.data[self.label_column]

    @property
    def scores(self) -> tuple[float, ...] | None:
        col = self.score_column
        return None if col is None else self.data[col]

    @property
    def predictions(self) -> tuple[int, ...] | None:
        col = self.prediction_column
        return None if col is None else self.data[col]

    @property
    def sensitive_columns(self) -> list[str]:
        return self.columns_with(ColumnRole.SENSITIVE)

    @property
    def feature_columns(self) -> list[str]:
        return self.columns_with(ColumnRole.FEATURE)

    @property
    def quasi_identifiers(self) -> list[str]:
        return self.columns_with(ColumnRole.QUASI_IDENTIFIER)

    def with_column(self, name: str, values: Sequence, role: ColumnRole | str, kind: str | None = None) -> "AuditTable":
        """Return a new table with ``name`` added, or replaced if it already exists."""
        role = ColumnRole(role)
        if kind is None:
            kind = CATEGORICAL if role in (ColumnRole.SENSITIVE, ColumnRole.IGNORE) else NUMERIC
        columns = self.columns if name in self.data else self.columns + (name,)
        data = dict(self.data)
        data[name] = tuple(values)
        return AuditTable(
            columns=columns,
            data=data,
            kinds={**self.kinds, name: kind},
            roles={**self.roles, name: role},
            privileged=self.privileged,
        )

    def schema(self) -> Schema:
        """Schema that reloads a serialized copy of this table unchanged."""
        forced = [
            c
            for c in self.columns
            if self.kinds[c] == CATEGORICAL
            and self.roles[c] in (ColumnRole.FEATURE, ColumnRole.QUASI_IDENTIFIER)
        ]
        return Schema(roles=dict(self.roles), privileged=dict(self.privileged), categorical=tuple(forced))


# ---------------------------------------------------------------------------
# validation


def _validate(table: AuditTable) -> None:
    if len(set(table.columns)) != len(table.columns):
        raise ValidationError("duplicate column names")
    if set(table.roles) != set(table.columns):
        raise ValidationError("role map must cover exactly the table's columns")
    lengths = {len(table.data[c]) for c in table.columns}
    if len(lengths) > 1:
        raise ValidationError("columns have different lengths")

    labels = table.columns_with(ColumnRole.LABEL)
    if len(labels) != 1:
        raise ValidationError(f"expected exactly one label column, found {len(labels)}")
    for role in (ColumnRole.SCORE, ColumnRole.PREDICTION, ColumnRole.WEIGHT):
        if len(table.columns_with(role)) > 1:
            raise ValidationError(f"at most one {role.value} column allowed")
    if not table.columns_with(ColumnRole.SCORE) and not table.columns_with(ColumnRole.PREDICTION):
        raise ValidationError("table needs a score or a prediction column")

    for name in table.columns:
        role = table.roles[name]
        values = table.data[name]
        if role in (ColumnRole.LABEL, ColumnRole.PREDICTION):
            for i, v in enumerate(values):
                if v not in (0, 1) or isinstance(v, float):
                    raise ValidationError(f"{role.value} value {v!r} outside {{0,1}}", row=i, column=name)
        elif role is ColumnRole.SCORE:
            for i, v in enumerate(values):
                if not isinstance(v, float) or not (0.0 <= v <= 1.0):
                    raise ValidationError(f"score outside [0,1]: {v!r}", row=i, column=name)
        elif role is ColumnRole.WEIGHT:
            for i, v in enumerate(values):
                if not isinstance(v, float) or not math.isfinite(v) or v < 0:
                    raise ValidationError(f"weight must be a finite non-negative number, got {v!r}", row=i, column=name)
        elif role is ColumnRole.SENSITIVE:
            if table.kinds[name] != CATEGORICAL:
                raise ValidationError("sensitive columns must be categorical", column=name)
            for i, v in enumerate(values):
                if not isinstance(v, str) or v == MISSING:
                    raise ValidationError("missing sensitive value", row=i, column=name)
            observed = set(values)
            if values and len(observed) < 2:
                raise ValidationError("sensitive column needs at least 2 observed categories", column=name)
            if name not in table.privileged:
                raise ValidationError("no privileged value declared", column=name)
            if values and table.privileged[name] not in observed:
                raise ValidationError(
                    f"privileged value {table.privileged[name]!r} never observed", column=name
                )
        else:
            kind = table.kinds[name]
            for i, v in enumerate(values):
                if kind == NUMERIC:
                    if v is not None and (not isinstance(v, float) or not math.isfinite(v)):
                        raise ValidationError(f"non-finite numeric value {v!r}", row=i, column=name)
                elif not isinstance(v, str):
                    raise ValidationError(f"categorical value {v!r} is not a string", row=i, column=name)

    for name in table.privileged:
        if table.roles.get(name) is not ColumnRole.SENSITIVE:
            raise ValidationError("privileged value given for a non-sensitive column", column=name)


# ---------------------------------------------------------------------------
# parsing


def _read_csv(text: str, delimiter: str) -> tuple[list[str], list[list[Any]]]:
    reader = csv.reader(io.StringIO(text, newline=""), delimiter=delimiter)
    try:
        rows = list(reader)
    except csv.Error as exc:
        raise ParseError(f"malformed delimited text: {exc}") from None
    if not rows:
        raise ParseError("empty input: no header row")
    header, body = rows[0], rows[1:]
    out = []
    for i, row in enumerate(body):
        if not row:  # blank line
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}", row=len(out))
        out.append([None if cell == "" else cell for cell in row])
    return header, out


def _read_jsonl(text: str) -> tuple[list[str], list[list[Any]]]:
    header: list[str] = []
    seen: set[str] = set()
    records = []
    for line in text.splitlines():
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON record: {exc.msg}", row=len(records)) from None
        if not isinstance(rec, dict):
            raise ParseError("record is not an object", row=len(records))
        for key in rec:
            if key not in seen:
                seen.add(key)
                header.append(key)
        records.append(rec)
    if not records:
        raise ParseError("empty input: no records")
    rows = []
    for i, rec in enumerate(records):
        row = []
        for key in header:
            v = rec.get(key)
            if isinstance(v, (dict, list)):
                raise ParseError("nested values are not supported", row=i, column=key)
            row.append(None if v == "" else v)
        rows.append(row)
    return header, rows


def _as_number(value: Any) -> float | None:
    """Finite float for numeric-looking values, else None."""
    if isinstance(value, bool):
        return float(value)
    if isinstance(value, (int, float)):
        f = float(value)
    elif isinstance(value, str):
        try:
            f = float(value.strip())
        except ValueError:
            return None
    else:
        return None
    return f if math.isfinite(f) else None


def _as_category(value: Any) -> str:
    if value is None:
        return MISSING
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float) and value.is_integer():
        return str(int(value))
    return str(value)


def _binary(values: list[Any], name: str, role: ColumnRole, invert: bool = False) -> tuple[int, ...]:
    out = []
    for i, v in enumerate(values):
        if v is None:
            raise ValidationError(f"missing {role.value} value", row=i, column=name)
        f = _as_number(v)
        if f not in (0.0, 1.0):
            raise ValidationError(f"{role.value} value {v!r} outside {{0,1}}", row=i, column=name)
        b = int(f)
        out.append(1 - b if invert else b)
    return tuple(out)


def _typed_column(name: str, role: ColumnRole, values: list[Any], schema: Schema) -> tuple[str, tuple]:
    if role is ColumnRole.LABEL:
        return NUMERIC, _binary(values, name, role, schema.invert_label)
    if role is ColumnRole.PREDICTION:
        return NUMERIC, _binary(values, name, role)
    if role in (ColumnRole.SCORE, ColumnRole.WEIGHT):
        out = []
        for i, v in enumerate(values):
            if v is None:
                raise ValidationError(f"missing {role.value} value", row=i, column=name)
            f = _as_number(v)
            if f is None:
                raise ValidationError(f"{role.value} value {v!r} is not a finite number", row=i, column=name)
            if role is ColumnRole.SCORE and not 0.0 <= f <= 1.0:
                raise ValidationError(f"score outside [0,1]: {v!r}", row=i, column=name)
            out.append(f)
        return NUMERIC, tuple(out)
    if role is ColumnRole.SENSITIVE:
        for i, v in enumerate(values):
            if v is None:
                raise ValidationError("missing sensitive value", row=i, column=name)
        return CATEGORICAL, tuple(_as_category(v) for v in values)
    if role in (ColumnRole.FEATURE, ColumnRole.QUASI_IDENTIFIER) and name not in schema.categorical:
        present = [v for v in values if v is not None]
        numbers = [_as_number(v) for v in present]
        if present and all(x is not None for x in numbers):
            return NUMERIC, tuple(None if v is None else _as_number(v) for v in values)
    return CATEGORICAL, tuple(_as_category(v) for v in values)


def load_table(
    source: bytes | str,
    schema: Schema | Mapping[str, Any],
    fmt: str = "csv",
    delimiter: str = ",",
) -> AuditTable:
    """Parse ``source`` in format ``fmt`` and validate it against ``schema``.

    Row order is preserved. Raises :class:`ParseError`, :class:`SchemaError`
    or :class:`ValidationError`.
    """
    if not isinstance(schema, Schema):
        schema = Schema.from_dict(schema)
    if fmt not in FORMATS:
        raise ParseError(f"unknown format {fmt!r}; expected one of {FORMATS}")
    if isinstance(source, bytes):
        try:
            text = source.decode("utf-8-sig")
        except UnicodeDecodeError as exc:
            raise ParseError(f"input is not valid UTF-8 at byte {exc.start}") from None
    else:
        text = source

    header, rows = _read_csv(text, delimiter) if fmt == "csv" else _read_jsonl(text)
    if len(set(header)) != len(header):
        dup = next(h for h in header if header.count(h) > 1)
        raise ParseError("duplicate column name in header", column=dup)

    for name in list(schema.roles) + list(schema.privileged) + list(schema.categorical):
        if name not in header:
            raise SchemaError("schema names a column that is not in the input", column=name)

    roles = {c: schema.roles.get(c, ColumnRole.IGNORE) for c in header}
    kinds, data = {}, {}
    for j, name in enumerate(header):
        kinds[name], data[name] = _typed_column(name, roles[name], [r[j] for r in rows], schema)

    return AuditTable(
        columns=tuple(header),
        data=data,
        kinds=kinds,
        roles=roles,
        privileged={c: v for c, v in schema.privileged.items()},
    )


def _cell(value: Any) -> str:
    if value is None or value == MISSING:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _json_cell(value: Any) -> Any:
    return None if value == MISSING else value


def serialize(table: AuditTable, fmt: str = "csv", delimiter: str = ",") -> bytes:
    """Write ``table`` back out; ``load_table(serialize(t), t.schema())`` equals ``t``."""
    if fmt == "csv":
        buf = io.StringIO(newline="")
        writer = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
        writer.writerow(table.columns)
        for i in range(table.n_rows):
            writer.writerow([_cell(table.data[c][i]) for c in table.columns])
        return buf.getvalue().encode("utf-8")
    if fmt == "jsonl":
        lines = [
            json.dumps({c: _json_cell(table.data[c][i]) for c in table.columns}, ensure_ascii=False)
            for i in range(table.n_rows)
        ]
        return ("\n".join(lines) + "\n").encode("utf-8")
    raise ParseError(f"unknown format {fmt!r}; expected one of {FORMATS}")


def binarize(table: AuditTable, threshold: float) -> AuditTable:
    """Add (or overwrite) the prediction column with ``score >= threshold``."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must lie in [0,1], got {threshold}")
    if table.score_column is None:
        raise SchemaError("binarize needs a score column")
    preds = tuple(1 if s >= threshold else 0 for s in table.scores)
    return table.with_column(_prediction_name(table), preds, ColumnRole.PREDICTION, NUMERIC)


def _prediction_name(table: AuditTable) -> str:
    if table.prediction_column is not None:
        return table.prediction_column
    name = "prediction"
    while name in table.data:
        name = "_" + name
    return name


def group_values(values: Iterable[str]) -> list[str]:
    """Distinct categories in sorted order."""
    return sorted(set(values))
