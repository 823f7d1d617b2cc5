"""Full audit pipeline driven by an :class:`AuditConfig`.

Stages run in a fixed order: load, metrics, proxy, privacy, explain,
mitigate (followed by re-measuring the mitigated predictions), assessment
evidence, report. Stages that are not requested leave their report section
marked as skipped.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping

import yaml

from . import checklist
from .checklist import Assessment, ThresholdProfile
from .config import STAGES, AuditConfig
from .dataset import AuditTable, binarize, load_table, serialize
from .explain import explain_table
from .metrics import MetricConfig, confusion_by_group, fairness_report, mutual_information, theil_index
from .mitigate import (
    apply_policy,
    default_grid,
    optimize_thresholds,
    reweigh,
    weighted_table,
)
from .privacy import reidentification_scan
from .proxy import proxy_scan
from .report import AuditReport, assemble, render_markdown, sha256_bytes, write_report

log = logging.getLogger(__name__)

EXIT_ERROR = 1


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class AuditResult:
    report: AuditReport
    exit_code: int
    assessment: Assessment | None
    artifacts: dict[str, bytes]


class _Stage:
    """Context manager that re-raises anything as a StageError naming the stage."""

    def __init__(self, name: str):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and not isinstance(exc, StageError):
            raise StageError(self.name, exc) from exc
        return False


def _profile(cfg: AuditConfig) -> ThresholdProfile:
    p = cfg.profile
    return ThresholdProfile(p.epsilon, p.di_band[0], p.di_band[1], p.k, p.min_fidelity)


def _with_predictions(table: AuditTable, threshold: float) -> tuple[AuditTable, float | None]:
    if table.predictions is not None:
        return table, None
    return binarize(table, threshold), threshold


def _metrics_section(table: AuditTable, cfg: AuditConfig, sensitive: Iterable[str]):
    mc = MetricConfig(cfg.metrics.epsilon, cfg.metrics.alpha)
    reports, by_col = {}, {}
    for col in sensitive:
        rep = fairness_report(confusion_by_group(table, col), table.privileged[col], mc)
        reports[col] = rep
        by_col[col] = {
            "report": rep.to_dict(),
            "mutual_information": mutual_information(table.predictions, table.column(col)),
        }
    section = {
        "epsilon": mc.epsilon,
        "alpha": mc.alpha,
        "theil_index": theil_index(table.labels, table.predictions, mc),
        "by_sensitive": by_col,
    }
    return reports, section


def load_answers(path: Path) -> dict[str, str]:
    with open(path, encoding="utf-8") as fh:
        return checklist.read_answers(yaml.safe_load(fh))


def run_audit(
    cfg: AuditConfig,
    stages: Iterable[str] | None = None,
    answers: Mapping[str, str] | None = None,
    timestamp: str | None = None,
) -> AuditResult:
    """Run the requested stages and assemble the report.

    ``answers`` overrides ``cfg.answers``. Any failure raises :class:`StageError`.
    """
    requested = set(cfg.stages if stages is None else stages)
    unknown = requested - set(STAGES)
    if unknown:
        raise StageError("config", ValueError(f"unknown stages: {sorted(unknown)}"))
    sections: dict[str, Any] = {}
    artifacts: dict[str, bytes] = {}
    digests: dict[str, str] = {}
    profile = _profile(cfg)

    with _Stage("load"):
        path = cfg.resolve(cfg.dataset.path)
        if not path.is_file():
            raise FileNotFoundError(f"dataset not found: {path}")
        raw = path.read_bytes()
        digests[cfg.dataset.path] = sha256_bytes(raw)
        table = load_table(raw, cfg.table_schema.to_schema(), cfg.dataset.format, cfg.dataset.delimiter)
        scored, cutoff = _with_predictions(table, cfg.metrics.threshold)

    sensitive = table.sensitive_columns
    fairness_reports = {}
    if "metrics" in requested:
        with _Stage("metrics"):
            if not sensitive:
                raise ValueError("fairness metrics need at least one sensitive column")
            fairness_reports, sections["metrics"] = _metrics_section(scored, cfg, sensitive)
            sections["metrics"]["binarization_threshold"] = cutoff

    proxies = None
    if "proxy" in requested:
        with _Stage("proxy"):
            proxies = proxy_scan(table, cfg.proxy.threshold)
            sections["proxies"] = proxies.to_dict()

    risk = None
    if "privacy" in requested:
        with _Stage("privacy"):
            qis = cfg.privacy.quasi_identifiers or table.quasi_identifiers
            if not qis:
                sections["privacy"] = "skipped: no quasi-identifier columns"
            else:
                binning = {c: b.model_dump() for c, b in cfg.privacy.binning.items()}
                risk = reidentification_scan(table, qis, cfg.privacy.k, binning)
                sections["privacy"] = risk.to_dict(include_values=cfg.privacy.include_values)

    explanation = None
    if "explain" in requested:
        with _Stage("explain"):
            if not table.feature_columns:
                sections["explanation"] = "skipped: no feature columns"
            else:
                explanation = explain_table(scored, cfg.surrogate.max_depth, cfg.surrogate.min_leaf)
                sections["explanation"] = explanation.to_dict()

    mitigated_reports = None
    if "mitigate" in requested:
        with _Stage("mitigate"):
            mit = cfg.mitigation
            col = mit.sensitive or (sensitive[0] if sensitive else None)
            if col is None:
                raise ValueError("mitigation needs a sensitive column")
            section: dict[str, Any] = {"sensitive": col}
            if mit.reweigh:
                weights = reweigh(table, col)
                section["reweighing"] = weights.to_dict()
                artifacts[f"weighted.{cfg.dataset.format}"] = serialize(
                    weighted_table(table, weights), cfg.dataset.format, cfg.dataset.delimiter
                )
            if mit.thresholds:
                if table.scores is None:
                    section["thresholds"] = "skipped: no score column"
                else:
                    grid = default_grid(mit.grid) if isinstance(mit.grid, int) else mit.grid
                    policy = optimize_thresholds(table, col, mit.epsilon, grid, mit.performance)
                    mc = MetricConfig(cfg.metrics.epsilon, cfg.metrics.alpha)
                    before = fairness_report(confusion_by_group(scored, col), table.privileged[col], mc)
                    after_table = scored.with_column(scored.prediction_column, apply_policy(table, policy), "prediction")
                    after = fairness_report(confusion_by_group(after_table, col), table.privileged[col], mc)
                    mitigated_reports = [
                        fairness_report(confusion_by_group(after_table, c), table.privileged[c], mc) for c in sensitive
                    ]
                    section["thresholds"] = {
                        "policy": policy.to_dict(),
                        "before": {"max_abs_eod": before.max_abs("eod"), "report": before.to_dict()},
                        "after": {"max_abs_eod": after.max_abs("eod"), "report": after.to_dict()},
                    }
                    artifacts["policy.json"] = (json.dumps(policy.to_dict(), indent=2, sort_keys=True) + "\n").encode()
            sections["mitigation"] = section

    assessment = None
    if "assess" in requested:
        with _Stage("assess"):
            if answers is None and cfg.answers is not None:
                answers = load_answers(cfg.resolve(cfg.answers))
            if answers is None:
                sections["assessment"] = "skipped: no answers supplied"
            else:
                qsrc = cfg.questionnaire if cfg.questionnaire == "builtin" else cfg.resolve(cfg.questionnaire)
                definition = checklist.load_questionnaire(qsrc)
                assessment = checklist.evaluate_answers(definition, answers, profile)
                fair_ev = fairness_reports and list(fairness_reports.values())
                if cfg.fairness_evidence == "mitigated" and mitigated_reports:
                    fair_ev = mitigated_reports
                evidence = [
                    ("fairness_metrics", fair_ev or None),
                    ("proxy_scan", proxies),
                    ("reidentification_scan", risk),
                    ("surrogate_fidelity", explanation),
                ]
                for check, ev in evidence:
                    if ev is not None and any(
                        i.check == check and i.status == checklist.OPEN for i in assessment.items
                    ):
                        assessment = checklist.attach_evidence(assessment, check, ev, profile)
                sections["assessment"] = assessment.to_dict()
                digests["answers"] = sha256_bytes(
                    json.dumps(dict(sorted(assessment.answers.items())), sort_keys=True).encode()
                )

    with _Stage("report"):
        if not any(not isinstance(v, str) for v in sections.values()):
            raise ValueError("no stage produced output; check the stage selection")
        report = assemble(sections, cfg.echo(), digests, timestamp=timestamp)
    exit_code = assessment.exit_code if assessment is not None else 0
    return AuditResult(report, exit_code, assessment, artifacts)


def write_outputs(result: AuditResult, out_dir: Path) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    path = out_dir / "report.json"
    write_report(result.report, path)
    written.append(path)
    path = out_dir / "report.canonical.json"
    path.write_bytes(result.report.canonical_bytes())
    written.append(path)
    path = out_dir / "report.md"
    path.write_text(render_markdown(result.report), encoding="utf-8")
    written.append(path)
    for name, data in result.artifacts.items():
        path = out_dir / name
        path.write_bytes(data)
        written.append(path)
    return written
