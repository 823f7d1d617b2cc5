import json
import re

import pytest

from conftest import write_workspace
from raiaudit.checklist import attach_evidence, evaluate_answers, load_questionnaire
from raiaudit.config import load_config
from raiaudit.metrics import GroupConfusion, fairness_report
from raiaudit.pipeline import run_audit
from raiaudit.report import NOT_REQUESTED, SECTIONS, assemble, canonical, display, render_markdown


def test_canonical_numbers():
    assert canonical(0.1 + 0.2) == {"display": "0.3", "value": 0.30000000000000004}
    assert canonical(None) == "undefined"
    assert canonical({"b": [1, 2.5], "a": True}) == {"b": [1, {"display": "2.5", "value": 2.5}], "a": True}
    assert display(-0.0) == "0" and display(2 / 3) == "0.666667"
    with pytest.raises(TypeError):
        canonical(object())


def test_metrics_only_marks_other_sections(tmp_path):
    cfg = load_config(write_workspace(tmp_path))
    rep = run_audit(cfg, stages=["metrics"]).report
    assert [s for s in SECTIONS if rep.skipped(s)] == [s for s in SECTIONS if s != "metrics"]
    assert rep.body()["sections"]["proxies"] == NOT_REQUESTED


def test_rerun_is_byte_identical(tmp_path):
    cfg = load_config(write_workspace(tmp_path))
    one = run_audit(cfg, timestamp="2020-01-01T00:00:00Z").report
    two = run_audit(cfg, timestamp="2031-06-30T12:00:00Z").report
    assert one.canonical_bytes() == two.canonical_bytes()
    assert one.digest() == two.digest()
    assert one.to_document()["generated_at"] != two.to_document()["generated_at"]
    assert b"2020" not in one.canonical_bytes()


def test_config_change_changes_digest(tmp_path):
    a = run_audit(load_config(write_workspace(tmp_path))).report
    b = run_audit(load_config(write_workspace(tmp_path, metrics={"epsilon": 0.05}))).report
    assert a.digest() != b.digest()


def test_input_change_changes_digest(tmp_path):
    path = write_workspace(tmp_path)
    a = run_audit(load_config(path)).report
    data = tmp_path / "data.csv"
    data.write_bytes(data.read_bytes() + b"a,0,0.05,0.1,z9\n")
    b = run_audit(load_config(path)).report
    assert a.body()["inputs"] != b.body()["inputs"] and a.digest() != b.digest()


def test_document_is_sorted_json(tmp_path):
    rep = run_audit(load_config(write_workspace(tmp_path))).report
    body = json.loads(rep.canonical_bytes())
    assert set(body) == {"tool", "inputs", "config", "sections"}
    assert list(body) == sorted(body)

    def keys_sorted(node):
        if isinstance(node, dict):
            return list(node) == sorted(node) and all(keys_sorted(v) for v in node.values())
        if isinstance(node, list):
            return all(keys_sorted(v) for v in node)
        return True

    assert keys_sorted(body)


def test_assemble_needs_one_section():
    with pytest.raises(ValueError):
        assemble({}, {}, {})
    with pytest.raises(ValueError):
        assemble({"bogus": {}}, {}, {})


def _blocked_report():
    defn = load_questionnaire()
    answers = {q.id: ("no" if q.risk_answer == "yes" else "yes") for q in defn.questions}
    answers["fair.biased_training_data"] = "yes"
    answers["human.sdgs"] = "yes"
    a = evaluate_answers(defn, answers)
    rep = fairness_report({"a": GroupConfusion("a", 4, 1, 4, 1), "b": GroupConfusion("b", 2, 1, 4, 3)}, "a")
    a = attach_evidence(a, "fairness_metrics", rep)
    return assemble({"assessment": a.to_dict(), "proxies": {"threshold": 0.5, "findings": [], "warnings": []}}, {}, {})


def test_markdown_blocked_and_empty_proxies():
    md = render_markdown(_blocked_report())
    summary = md.split("## Fairness metrics")[0]
    assert re.search(r"\| Fair AI \| BLOCKED \|", summary)
    assert "| Human-centric AI | ATTENTION |" in summary
    assert "Overall: **BLOCKED**" in summary
    assert "no proxy findings" in md
    assert "## Fairness metrics\n\nskipped: not requested" in md


def test_every_question_rendered_once():
    md = render_markdown(_blocked_report())
    for q in load_questionnaire().questions:
        assert md.count(f"`{q.id}`") == 1


def test_markdown_shows_rules(tmp_path):
    rep = run_audit(load_config(write_workspace(tmp_path))).report
    md = render_markdown(rep)
    for rule in rep.sections["explanation"]["rules"]:
        assert f"- {rule}" in md
    assert "→ class" in md
    assert render_markdown(rep) == md


def test_undefined_metric_rendered(tmp_path):
    z = fairness_report({"a": GroupConfusion("a", 4, 1, 4, 1), "z": GroupConfusion("z", 0, 0, 3, 0)}, "a")
    sec = {"by_sensitive": {"g": {"report": z.to_dict(), "mutual_information": 0.0}}, "alpha": 1.0, "theil_index": None}
    md = render_markdown(assemble({"metrics": sec}, {}, {}))
    assert "| z | -0.5 | 0 | undefined | undefined | undefined |" in md
    assert "Generalized entropy index (alpha=1): undefined" in md
