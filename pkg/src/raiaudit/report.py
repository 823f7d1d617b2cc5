"""Canonical audit report and its Markdown rendering.

The canonical body is JSON with sorted keys. Every real number appears as
``{"display": <6 significant digits>, "value": <full precision>}`` and every
undefined quantity as the string ``"undefined"``. The body carries no
timestamp, so identical inputs and config give byte-identical bodies and
digests.
"""

from __future__ import annotations

import datetime as dt
import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any, Mapping

from . import __version__
from .checklist import PRINCIPLE_TITLES, PRINCIPLES

SECTIONS = ("metrics", "proxies", "mitigation", "explanation", "privacy", "assessment")
UNDEFINED = "undefined"
NOT_REQUESTED = "skipped: not requested"


def display(x: float) -> str:
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    s = f"{x:.6g}"
    return "0" if s == "-0" else s


def canonical(value: Any) -> Any:
    """Normalize a section tree into its canonical JSON form."""
    if value is None:
        return UNDEFINED
    if isinstance(value, bool) or isinstance(value, (int, str)):
        return value
    if isinstance(value, float):
        return {"display": display(value), "value": value if math.isfinite(value) else display(value)}
    if isinstance(value, Mapping):
        return {str(k): canonical(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [canonical(v) for v in value]
    if hasattr(value, "to_dict"):
        return canonical(value.to_dict())
    raise TypeError(f"cannot put {type(value).__name__} into a report")


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


@dataclass(frozen=True)
class AuditReport:
    version: str
    input_digests: Mapping[str, str]
    config: Mapping[str, Any]
    sections: Mapping[str, Any]
    timestamp: str = field(default="", compare=False)

    def body(self) -> dict:
        return {
            "tool": {"name": "raiaudit", "version": self.version},
            "inputs": dict(sorted(self.input_digests.items())),
            "config": canonical(self.config),
            "sections": {name: canonical(self.sections[name]) for name in SECTIONS},
        }

    def canonical_bytes(self) -> bytes:
        return json.dumps(
            self.body(), sort_keys=True, ensure_ascii=False, separators=(",", ":"), allow_nan=False
        ).encode("utf-8")

    def digest(self) -> str:
        return sha256_bytes(self.canonical_bytes())

    def to_document(self) -> dict:
        """Full report file: canonical body plus digest and generation time."""
        return {**self.body(), "digest": self.digest(), "generated_at": self.timestamp}

    def section(self, name: str) -> Any:
        return self.sections[name]

    def skipped(self, name: str) -> bool:
        return isinstance(self.sections[name], str)


def assemble(
    sections: Mapping[str, Any],
    config: Mapping[str, Any],
    input_digests: Mapping[str, str],
    version: str = __version__,
    timestamp: str | None = None,
) -> AuditReport:
    """Build a report; sections not supplied are marked ``skipped: not requested``.

    A section value may be a string starting with ``skipped:`` to record why a
    requested stage did not run.
    """
    unknown = set(sections) - set(SECTIONS)
    if unknown:
        raise ValueError(f"unknown report sections: {sorted(unknown)}")
    if not any(not isinstance(v, str) for v in sections.values()):
        raise ValueError("a report needs at least one populated section")
    full = {name: sections.get(name, NOT_REQUESTED) for name in SECTIONS}
    if timestamp is None:
        timestamp = dt.datetime.now(dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    return AuditReport(version, dict(input_digests), dict(config), full, timestamp)


def write_report(report: AuditReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_document(), fh, sort_keys=True, ensure_ascii=False, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# markdown


def _fmt(v: Any) -> str:
    if v is None or v == UNDEFINED:
        return UNDEFINED
    if isinstance(v, Mapping) and "display" in v:
        return v["display"]
    if isinstance(v, bool):
        return "yes" if v else "no"
    if isinstance(v, float):
        return display(v)
    return str(v)


def _table(header: list[str], rows: list[list[Any]]) -> list[str]:
    out = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    out += ["| " + " | ".join(_fmt(c) for c in row) + " |" for row in rows]
    return out


def _summary(sec: Any) -> list[str]:
    lines = ["## Principle summary", ""]
    if isinstance(sec, str):
        return lines + [f"Assessment {sec}.", ""]
    counts = {p: 0 for p in PRINCIPLES}
    for item in sec["items"]:
        if item["status"] != "satisfied":
            counts[item["principle"]] += 1
    rows = [[PRINCIPLE_TITLES[p], sec["verdicts"][p].upper(), counts[p]] for p in PRINCIPLES]
    return lines + _table(["Principle", "Verdict", "Unresolved items"], rows) + ["", f"Overall: **{sec['overall'].upper()}**", ""]


def _metrics(sec: Mapping) -> list[str]:
    lines = []
    for col, res in sec["by_sensitive"].items():
        rep = res["report"]
        lines += [f"### Sensitive column `{col}` (privileged: `{rep['privileged']}`)", ""]
        conf_rows = [
            [g, c["n"], c["tp"], c["fp"], c["tn"], c["fn"], c["selection_rate"], c["tpr"], c["fpr"], c["ppv"]]
            for g, c in rep["confusions"].items()
        ]
        lines += _table(["group", "n", "TP", "FP", "TN", "FN", "selection", "TPR", "FPR", "PPV"], conf_rows) + [""]
        metric_rows = [[g, m["spd"], m["di"], m["eod"], m["aod"], m["ppd"]] for g, m in rep["groups"].items()]
        lines += _table(["group", "SPD", "DI", "EOD", "AOD", "PPD"], metric_rows) + [""]
        lines += [f"- {crit}: {verdict}" for crit, verdict in rep["verdicts"].items()]
        lines += [f"- mutual information I(prediction; {col}): {_fmt(res['mutual_information'])} nats", ""]
    lines += [f"Generalized entropy index (alpha={_fmt(sec['alpha'])}): {_fmt(sec['theil_index'])}", ""]
    return lines


def _proxies(sec: Mapping) -> list[str]:
    if not sec["findings"]:
        lines = ["no proxy findings", ""]
    else:
        rows = [[f["feature"], f["sensitive"], f["method"], f["score"], f["flagged"]] for f in sec["findings"]]
        lines = _table(["feature", "sensitive", "method", "score", "flagged"], rows) + [""]
    lines += [f"- warning: {w}" for w in sec["warnings"]]
    return lines + ([""] if sec["warnings"] else [])


def _privacy(sec: Mapping) -> list[str]:
    lines = [
        f"- quasi-identifiers: {', '.join(sec['quasi_identifiers'])}",
        f"- k: {sec['k']}",
        f"- equivalence classes: {sec['n_classes']} (smallest: {sec['min_class_size']})",
        f"- unique rate: {_fmt(sec['unique_rate'])}",
        f"- rows violating k: {sec['n_violating']}",
    ]
    if sec["violating_rows"]:
        lines.append(f"- violating row indices: {', '.join(str(i) for i in sec['violating_rows'])}")
    return lines + [""]


def _explanation(sec: Mapping) -> list[str]:
    lines = [f"- fidelity: {_fmt(sec['fidelity'])}", f"- depth: {sec['depth']}", ""]
    if sec["importances"]:
        lines += _table(["feature", "importance"], [[i["feature"], i["importance"]] for i in sec["importances"]]) + [""]
    lines += ["Rules:", ""] + [f"- {r}" for r in sec["rules"]] + [""]
    return lines


def _mitigation(sec: Mapping) -> list[str]:
    lines = []
    if "reweighing" in sec:
        rw = sec["reweighing"]
        if isinstance(rw, str):
            lines += [f"Reweighing {rw}.", ""]
        else:
            lines += ["### Reweighing", ""]
            lines += _table(["group", "label", "weight"], [[c["group"], c["label"], c["weight"]] for c in rw["cells"]]) + [""]
    if "thresholds" in sec:
        th = sec["thresholds"]
        if isinstance(th, str):
            lines += [f"Threshold optimization {th}.", ""]
        else:
            pol = th["policy"]
            lines += ["### Per-group thresholds", ""]
            rows = [[g, t, pol["achieved_tpr"][g]] for g, t in pol["thresholds"].items()]
            lines += _table(["group", "threshold", "TPR"], rows) + [""]
            lines += [
                f"- accuracy: {_fmt(pol['accuracy'])}",
                f"- max TPR gap: {_fmt(pol['max_tpr_gap'])} (epsilon {_fmt(pol['epsilon'])})",
                f"- max |EOD| before: {_fmt(th['before']['max_abs_eod'])}, after: {_fmt(th['after']['max_abs_eod'])}",
                "",
            ]
    return lines


def _assessment(sec: Mapping) -> list[str]:
    lines = []
    items = {i["question"]: i for i in sec["items"]}
    for p in PRINCIPLES:
        lines += [f"### {PRINCIPLE_TITLES[p]}", ""]
        qs = [q for q in sec["questions"] if q["principle"] == p]
        if not qs:
            lines += ["(no questions)", ""]
            continue
        for q in qs:
            item = items.get(q["id"])
            status = f"{item['kind']} {item['check']}: {item['status']}" if item else "no action"
            lines.append(f"- `{q['id']}` {q['text']} **{_fmt(q['answer'])}** ({status})")
        lines.append("")
    return lines


_RENDERERS = {
    "metrics": ("Fairness metrics", _metrics),
    "proxies": ("Proxy variables", _proxies),
    "privacy": ("Re-identification risk", _privacy),
    "explanation": ("Surrogate explanation", _explanation),
    "mitigation": ("Mitigation", _mitigation),
    "assessment": ("Questionnaire", _assessment),
}


def render_markdown(report: AuditReport) -> str:
    """Readable view of a report; reads the canonical body only."""
    body = report.body()
    sections = body["sections"]
    lines = [
        "# Responsible-AI audit report",
        "",
        f"raiaudit {body['tool']['version']}, report digest `{report.digest()}`",
        "",
    ]
    lines += _summary(sections["assessment"])
    for name in ("metrics", "proxies", "privacy", "explanation", "mitigation", "assessment"):
        title, render = _RENDERERS[name]
        lines += [f"## {title}", ""]
        sec = sections[name]
        lines += [f"{sec}", ""] if isinstance(sec, str) else render(sec)
    lines += ["## Inputs", ""]
    lines += [f"- `{name}`: sha256 {digest}" for name, digest in body["inputs"].items()] + [""]
    return "\n".join(lines)
