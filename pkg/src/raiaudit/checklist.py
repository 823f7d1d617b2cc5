"""Responsible-AI questionnaire: answers, review items, evidence and verdicts.

A risk answer on a training-backed question opens a ``human_review`` item.
A risk answer on a question backed by a technical tool opens a
``required_check`` item that computed evidence can settle: clean evidence
marks it satisfied, failing evidence marks it failed and blocks the
principle. Verdicts per principle:

* ``pass``      every item satisfied (or no items at all)
* ``blocked``   some required check failed
* ``attention`` anything else
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import yaml

log = logging.getLogger(__name__)

PRINCIPLES = ("fair", "transparent_explainable", "human_centric", "privacy_security", "third_parties")
PRINCIPLE_TITLES = {
    "fair": "Fair AI",
    "transparent_explainable": "Transparent & Explainable AI",
    "human_centric": "Human-centric AI",
    "privacy_security": "Privacy & Security by Design",
    "third_parties": "Third parties",
}
ANSWERS = ("yes", "no", "not_applicable")
BACKINGS = ("training", "technical_tool")
CHECKS = ("proxy_scan", "fairness_metrics", "reidentification_scan", "surrogate_fidelity", "none")

HUMAN_REVIEW, REQUIRED_CHECK = "human_review", "required_check"
OPEN, SATISFIED, FAILED = "open", "satisfied", "failed"
PASS, ATTENTION, BLOCKED = "pass", "attention", "blocked"

EXIT_CODES = {PASS: 0, ATTENTION: 2, BLOCKED: 3}

# Absorbs ulp-level error when comparing rate differences to a tolerance.
_SLACK = 1e-12


class QuestionnaireError(ValueError):
    pass


class AnswerError(ValueError):
    pass


@dataclass(frozen=True)
class Question:
    id: str
    principle: str
    text: str
    risk_answer: str
    backing: str
    check: str = "none"


@dataclass(frozen=True)
class QuestionnaireDef:
    id: str
    version: str
    questions: tuple[Question, ...]

    def __post_init__(self):
        seen = set()
        for q in self.questions:
            if q.id in seen:
                raise QuestionnaireError(f"duplicate question id {q.id!r}")
            seen.add(q.id)

    def question(self, qid: str) -> Question:
        for q in self.questions:
            if q.id == qid:
                return q
        raise KeyError(qid)

    def by_principle(self) -> dict[str, list[Question]]:
        out: dict[str, list[Question]] = {p: [] for p in PRINCIPLES}
        for q in self.questions:
            out[q.principle].append(q)
        return out

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "version": self.version,
            "questions": [
                {
                    "id": q.id,
                    "principle": q.principle,
                    "text": q.text,
                    "risk_answer": q.risk_answer,
                    "backing": q.backing,
                    **({"check": q.check} if q.backing == "technical_tool" else {}),
                }
                for q in self.questions
            ],
        }


def _question(doc: Mapping[str, Any], pos: int) -> Question:
    try:
        qid = str(doc["id"])
        principle, text = doc["principle"], doc["text"]
        risk, backing = doc["risk_answer"], doc["backing"]
    except KeyError as exc:
        raise QuestionnaireError(f"question #{pos} lacks field {exc.args[0]!r}") from None
    if principle not in PRINCIPLES:
        raise QuestionnaireError(f"question {qid!r}: unknown principle {principle!r}")
    if backing not in BACKINGS:
        raise QuestionnaireError(f"question {qid!r}: unknown backing {backing!r}")
    if risk not in ("yes", "no"):
        raise QuestionnaireError(f"question {qid!r}: risk_answer must be 'yes' or 'no'")
    if backing == "technical_tool" and "check" not in doc:
        raise QuestionnaireError(f"question {qid!r} is backed by a technical tool but links no check")
    check = doc.get("check", "none")
    if check not in CHECKS:
        raise QuestionnaireError(f"question {qid!r}: unknown check {check!r}")
    return Question(qid, principle, str(text), risk, backing, check)


def parse_questionnaire(doc: Mapping[str, Any]) -> QuestionnaireDef:
    if not isinstance(doc, Mapping) or "questions" not in doc:
        raise QuestionnaireError("questionnaire document needs a 'questions' list")
    questions = tuple(_question(q, i) for i, q in enumerate(doc["questions"]))
    if not questions:
        raise QuestionnaireError("questionnaire has no questions")
    return QuestionnaireDef(str(doc.get("id", "custom")), str(doc.get("version", "1")), questions)


def load_questionnaire(source: str | Path | Mapping[str, Any] | None = None) -> QuestionnaireDef:
    """Built-in questionnaire for ``None`` or ``"builtin"``; else a YAML/JSON path or a parsed document."""
    if source is None or source == "builtin":
        text = resources.files("raiaudit").joinpath("data/questionnaire.yaml").read_text(encoding="utf-8")
        return parse_questionnaire(yaml.safe_load(text))
    if isinstance(source, Mapping):
        return parse_questionnaire(source)
    with open(source, encoding="utf-8") as fh:
        return parse_questionnaire(yaml.safe_load(fh))


@dataclass(frozen=True)
class ThresholdProfile:
    epsilon: float = 0.10
    di_low: float = 0.8
    di_high: float = 1.25
    k: int = 5
    min_fidelity: float = 0.8

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if not 0 < self.di_low <= 1 <= self.di_high:
            raise ValueError("disparate-impact band must contain 1")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not 0 <= self.min_fidelity <= 1:
            raise ValueError("min_fidelity must lie in [0,1]")

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "di_band": [self.di_low, self.di_high],
            "k": self.k,
            "min_fidelity": self.min_fidelity,
        }


@dataclass(frozen=True)
class Item:
    question: str
    principle: str
    kind: str
    check: str
    status: str = OPEN
    evidence: Mapping[str, Any] | None = None

    def to_dict(self) -> dict:
        return {
            "question": self.question,
            "principle": self.principle,
            "kind": self.kind,
            "check": self.check,
            "status": self.status,
            "evidence": None if self.evidence is None else dict(self.evidence),
        }


@dataclass(frozen=True)
class Assessment:
    questionnaire_id: str
    version: str
    answers: Mapping[str, str]
    items: tuple[Item, ...]
    verdicts: Mapping[str, str]
    profile: ThresholdProfile = field(default_factory=ThresholdProfile)
    questions: tuple[Question, ...] = ()

    @property
    def overall(self) -> str:
        vs = set(self.verdicts.values())
        return BLOCKED if BLOCKED in vs else ATTENTION if ATTENTION in vs else PASS

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.overall]

    def open_items(self) -> list[Item]:
        return [i for i in self.items if i.status != SATISFIED]

    def to_dict(self) -> dict:
        return {
            "questionnaire": {"id": self.questionnaire_id, "version": self.version},
            "answers": dict(sorted(self.answers.items())),
            "questions": [
                {"id": q.id, "principle": q.principle, "text": q.text, "answer": self.answers.get(q.id)}
                for q in self.questions
            ],
            "items": [i.to_dict() for i in self.items],
            "verdicts": dict(self.verdicts),
            "overall": self.overall,
            "profile": self.profile.to_dict(),
        }


def principle_verdicts(items: Iterable[Item]) -> dict[str, str]:
    items = list(items)
    out = {}
    for p in PRINCIPLES:
        mine = [i for i in items if i.principle == p]
        if any(i.kind == REQUIRED_CHECK and i.status == FAILED for i in mine):
            out[p] = BLOCKED
        elif any(i.status != SATISFIED for i in mine):
            out[p] = ATTENTION
        else:
            out[p] = PASS
    return out


def normalize_answer(value: Any) -> str:
    if isinstance(value, bool):
        return "yes" if value else "no"
    v = str(value).strip().lower().replace("-", "_").replace("/", "")
    aliases = {"y": "yes", "n": "no", "na": "not_applicable", "n_a": "not_applicable", "not applicable": "not_applicable"}
    v = aliases.get(v, v)
    if v not in ANSWERS:
        raise AnswerError(f"answer {value!r} is not one of {ANSWERS}")
    return v


def evaluate_answers(
    definition: QuestionnaireDef, answers: Mapping[str, Any], profile: ThresholdProfile | None = None
) -> Assessment:
    """Turn a complete answer set into an assessment with open items and verdicts."""
    known = {q.id for q in definition.questions}
    unknown = sorted(set(answers) - known)
    if unknown:
        raise AnswerError(f"answers name unknown questions: {unknown}")
    missing = [q.id for q in definition.questions if q.id not in answers]
    if missing:
        raise AnswerError(f"unanswered questions: {missing}")

    clean = {q.id: normalize_answer(answers[q.id]) for q in definition.questions}
    items = []
    for q in definition.questions:
        if clean[q.id] != q.risk_answer:
            continue
        # a tool-backed question whose tool is out of reach still needs a human
        if q.backing == "technical_tool" and q.check != "none":
            items.append(Item(q.id, q.principle, REQUIRED_CHECK, q.check))
        else:
            items.append(Item(q.id, q.principle, HUMAN_REVIEW, q.check))
    return Assessment(
        questionnaire_id=definition.id,
        version=definition.version,
        answers=clean,
        items=tuple(items),
        verdicts=principle_verdicts(items),
        profile=profile or ThresholdProfile(),
        questions=definition.questions,
    )


# ---------------------------------------------------------------------------
# evidence


def _as_list(evidence: Any) -> list:
    return list(evidence) if isinstance(evidence, (list, tuple)) else [evidence]


def judge_fairness(reports: Sequence[Any], profile: ThresholdProfile) -> tuple[str, dict]:
    worst: dict[str, Any] = {}
    status = SATISFIED
    for rep in reports:
        for g, m in rep.groups.items():
            values = {"spd": m.spd, "di": m.di, "eod": m.eod, "aod": m.aod}
            if any(v is None for v in values.values()):
                if status != FAILED:
                    status = OPEN
                worst.setdefault("undefined", []).append(g)
                continue
            ok = profile.di_low - _SLACK <= m.di <= profile.di_high + _SLACK and all(
                abs(values[k]) <= profile.epsilon + _SLACK for k in ("spd", "eod", "aod")
            )
            if not ok:
                status = FAILED
                worst.setdefault("failing_groups", []).append(g)
    summary = {
        "reports": len(reports),
        "di_band": [profile.di_low, profile.di_high],
        "epsilon": profile.epsilon,
        "max_abs_spd": max((rep.max_abs("spd") or 0.0 for rep in reports), default=0.0),
        "max_abs_eod": max((rep.max_abs("eod") or 0.0 for rep in reports), default=0.0),
        "max_abs_aod": max((rep.max_abs("aod") or 0.0 for rep in reports), default=0.0),
        "min_di": min((m.di for rep in reports for m in rep.groups.values() if m.di is not None), default=None),
        **worst,
    }
    return status, summary


def judge(check: str, evidence: Any, profile: ThresholdProfile) -> tuple[str, dict]:
    """Status an item would take from ``evidence``, plus a small summary of why."""
    if check == "fairness_metrics":
        return judge_fairness(_as_list(evidence), profile)
    if check == "proxy_scan":
        scans = _as_list(evidence)
        flagged = [f"{f.feature}~{f.sensitive}" for s in scans for f in s.flagged]
        return (FAILED if flagged else SATISFIED), {"flagged": flagged}
    if check == "reidentification_scan":
        scans = _as_list(evidence)
        n_bad = sum(len(s.violating_rows_at(profile.k)) for s in scans)
        return (FAILED if n_bad else SATISFIED), {"k": profile.k, "n_violating": n_bad}
    if check == "surrogate_fidelity":
        fid = float(getattr(evidence, "fidelity", evidence))
        return (SATISFIED if fid >= profile.min_fidelity else FAILED), {
            "fidelity": fid,
            "min_fidelity": profile.min_fidelity,
        }
    raise ValueError(f"no evidence rule for check {check!r}")


def attach_evidence(
    assessment: Assessment, check: str, evidence: Any, profile: ThresholdProfile | None = None
) -> Assessment:
    """Settle the open ``required_check`` items linked to ``check``.

    Items that are no longer open are left alone, so attaching the same
    evidence twice is a no-op.
    """
    profile = profile or assessment.profile
    targets = [i for i in assessment.items if i.kind == REQUIRED_CHECK and i.check == check and i.status == OPEN]
    if not targets:
        log.warning("evidence for %s ignored: no open item is waiting for it", check)
        return assessment
    status, summary = judge(check, evidence, profile)
    items = tuple(
        replace(i, status=status, evidence=summary) if i in targets else i for i in assessment.items
    )
    return replace(assessment, items=items, verdicts=principle_verdicts(items), profile=profile)


def answers_document(definition: QuestionnaireDef, answers: Mapping[str, str]) -> dict:
    """Replayable answers document for ``definition``."""
    return {
        "questionnaire": {"id": definition.id, "version": definition.version},
        "answers": {q.id: answers[q.id] for q in definition.questions if q.id in answers},
    }


def read_answers(doc: Mapping[str, Any]) -> dict[str, str]:
    answers = doc.get("answers", doc) if isinstance(doc, Mapping) else None
    if not isinstance(answers, Mapping):
        raise AnswerError("answers document must map question ids to answers")
    return {str(k): normalize_answer(v) for k, v in answers.items()}
