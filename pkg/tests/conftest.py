import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from raiaudit.dataset import load_table  # noqa: E402


def csv_bytes(header, rows):
    lines = [",".join(header)] + [",".join(str(v) for v in r) for r in rows]
    return ("\n".join(lines) + "\n").encode()


# Two groups, 10 rows each, hand-counted confusion cells:
#   a: TP=4 FN=1 FP=1 TN=4     b: TP=2 FN=3 FP=1 TN=4
CONFUSION_ROWS = (
    [("a", 1, 1)] * 4 + [("a", 1, 0)] * 1 + [("a", 0, 1)] * 1 + [("a", 0, 0)] * 4
    + [("b", 1, 1)] * 2 + [("b", 1, 0)] * 3 + [("b", 0, 1)] * 1 + [("b", 0, 0)] * 4
)

# group a separates at (0.4, 0.6], group b at (0.3, 0.4]
SHIFTED_SCORES = {
    "a": ([0.9, 0.8, 0.7, 0.6], [0.4, 0.3, 0.2, 0.1]),
    "b": ([0.7, 0.6, 0.5, 0.4], [0.3, 0.25, 0.2, 0.1]),
}


def shifted_rows():
    rows = []
    for g, (pos, neg) in SHIFTED_SCORES.items():
        rows += [(g, 1, s) for s in pos] + [(g, 0, s) for s in neg]
    return rows


@pytest.fixture
def confusion_table():
    data = csv_bytes(["group", "label", "pred"], CONFUSION_ROWS)
    schema = {"roles": {"group": "sensitive", "label": "label", "pred": "prediction"}, "privileged": {"group": "a"}}
    return load_table(data, schema)


@pytest.fixture
def shifted_table():
    data = csv_bytes(["group", "label", "score"], shifted_rows())
    schema = {"roles": {"group": "sensitive", "label": "label", "score": "score"}, "privileged": {"group": "a"}}
    return load_table(data, schema)


def audit_rows():
    """The shifted-score rows plus a feature and a quasi-identifier column."""
    out = []
    for i, (g, y, s) in enumerate(shifted_rows()):
        out.append((g, y, s, round(s * 10) / 10, "z%d" % (i % 3)))
    return out


def write_workspace(root, **overrides):
    """Dataset and config for a full audit run under ``root``; returns the config path."""
    import yaml

    (root / "data.csv").write_bytes(csv_bytes(["group", "label", "score", "x", "zip"], audit_rows()))
    cfg = {
        "dataset": {"path": "data.csv"},
        "schema": {
            "roles": {"group": "sensitive", "label": "label", "score": "score", "x": "feature", "zip": "quasi_identifier"},
            "privileged": {"group": "a"},
        },
        "mitigation": {"epsilon": 0.0},
        "privacy": {"k": 3},
        "surrogate": {"max_depth": 2, "min_leaf": 2},
        "output_dir": "out",
    }
    for key, value in overrides.items():
        if value is None:
            cfg.pop(key, None)
        elif isinstance(value, dict) and isinstance(cfg.get(key), dict):
            cfg[key] = {**cfg[key], **value}
        else:
            cfg[key] = value
    path = root / "audit.yaml"
    path.write_text(yaml.safe_dump(cfg), encoding="utf-8")
    return path


@pytest.fixture
def workspace(tmp_path):
    return write_workspace(tmp_path)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(results):
        terminalreporter.write_line(results[num])
