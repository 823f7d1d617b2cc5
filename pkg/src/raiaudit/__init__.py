"""Responsible-AI audit toolkit for binary classifier prediction files."""

__version__ = "0.1.0"

from .dataset import AuditTable, ColumnRole, Schema, binarize, load_table, serialize
from .metrics import (
    FairnessReport,
    GroupConfusion,
    MetricConfig,
    confusion_by_group,
    fairness_report,
    mutual_information,
    theil_index,
)
from .mitigate import ThresholdPolicy, WeightAssignment, apply_policy, optimize_thresholds, reweigh
from .explain import SurrogateTree, feature_importance, fit_surrogate, surrogate_fidelity
from .privacy import RiskScan, reidentification_scan
from .proxy import ProxyFinding, association, proxy_scan
from .checklist import (
    Assessment,
    QuestionnaireDef,
    ThresholdProfile,
    attach_evidence,
    evaluate_answers,
    load_questionnaire,
)
from .report import AuditReport, assemble, render_markdown

__all__ = [
    "AuditTable", "ColumnRole", "Schema", "binarize", "load_table", "serialize",
    "FairnessReport", "GroupConfusion", "MetricConfig", "confusion_by_group", "fairness_report",
    "mutual_information", "theil_index",
    "ThresholdPolicy", "WeightAssignment", "apply_policy", "optimize_thresholds", "reweigh",
    "SurrogateTree", "feature_importance", "fit_surrogate", "surrogate_fidelity",
    "RiskScan", "reidentification_scan",
    "ProxyFinding", "association", "proxy_scan",
    "Assessment", "QuestionnaireDef", "ThresholdProfile", "attach_evidence", "evaluate_answers",
    "load_questionnaire",
    "AuditReport", "assemble", "render_markdown",
]
