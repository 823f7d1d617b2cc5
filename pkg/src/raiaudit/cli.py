"""Command-line entry point.

Exit codes: 0 all principles pass (or no assessment ran), 2 attention,
3 blocked, 1 execution error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import random
import sys
from pathlib import Path
from typing import Callable, Sequence

import yaml
from pydantic import ValidationError as ConfigError

from . import __version__, checklist
from .checklist import PRINCIPLE_TITLES, QuestionnaireDef
from .config import STAGES, AuditConfig, load_config
from .dataset import load_table, serialize
from .mitigate import ThresholdPolicy, apply_policy_to_table
from .pipeline import EXIT_ERROR, StageError, run_audit, write_outputs

log = logging.getLogger("raiaudit")

STAGE_COMMANDS = {
    "metrics": ["metrics"],
    "proxy": ["proxy"],
    "privacy": ["privacy"],
    "explain": ["explain"],
    "mitigate": ["metrics", "mitigate"],
    "assess": ["assess"],
}

_PROMPT_ANSWERS = {"y": "yes", "yes": "yes", "n": "no", "no": "no", "na": "not_applicable",
                   "n/a": "not_applicable", "not_applicable": "not_applicable"}


class SessionAborted(Exception):
    pass


def assess_interactive(
    definition: QuestionnaireDef,
    ask: Callable[[str], str] = input,
    say: Callable[[str], None] = print,
) -> dict:
    """Prompt every question in order and return a replayable answers document.

    EOF or Ctrl-C raises :class:`SessionAborted`; nothing is returned or written.
    """
    answers = {}
    current = None
    try:
        for pos, q in enumerate(definition.questions, 1):
            if q.principle != current:
                current = q.principle
                say(f"\n== {PRINCIPLE_TITLES[q.principle]} ==")
            while True:
                reply = ask(f"[{pos}/{len(definition.questions)}] {q.text} (yes/no/na): ").strip().lower()
                if reply in _PROMPT_ANSWERS:
                    answers[q.id] = _PROMPT_ANSWERS[reply]
                    break
                say("  please answer yes, no or na")
    except (EOFError, KeyboardInterrupt):
        raise SessionAborted("questionnaire aborted; no answers written") from None
    return checklist.answers_document(definition, answers)


def synthetic_table(n: int, seed: int) -> str:
    """CSV text of a seeded synthetic prediction file for demos and smoke tests."""
    rng = random.Random(seed)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["group", "age", "zip", "region", "label", "score"])
    for _ in range(n):
        g = rng.choice(["a", "b"])
        age = rng.randint(18, 80)
        label = 1 if rng.random() < (0.5 if g == "a" else 0.35) else 0
        noise = rng.gauss(0, 0.15)
        score = min(1.0, max(0.0, 0.3 + 0.4 * label + (0.05 if g == "a" else -0.05) + 0.002 * (age - 50) + noise))
        region = "north" if g == "a" and rng.random() < 0.8 else rng.choice(["north", "south"])
        w.writerow([g, age, f"{rng.randint(100, 119)}", region, label, f"{score:.4f}"])
    return buf.getvalue()


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="raiaudit", description="Responsible-AI audit of classifier prediction files")
    ap.add_argument("--version", action="version", version=f"raiaudit {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="audit config (YAML or JSON)")
        p.add_argument("--out", help="output directory (overrides output_dir)")
        p.add_argument("--answers", help="answers document (overrides the config)")
        p.add_argument("--interactive", action="store_true", help="prompt the questionnaire and save the answers")
        p.add_argument("--timestamp", help=argparse.SUPPRESS)

    for name in STAGE_COMMANDS:
        common(sub.add_parser(name, help=f"run the {name} stage"))
    p = sub.add_parser("audit", help="run the full pipeline")
    common(p)
    p.add_argument("--stage", action="append", choices=STAGES, help="restrict to these stages (repeatable)")

    p = sub.add_parser("apply", help="apply a saved threshold policy to a prediction file")
    p.add_argument("--config", required=True)
    p.add_argument("--policy", required=True)
    p.add_argument("--out", required=True, help="file to write the re-predicted table to")

    p = sub.add_parser("synth", help="write a seeded synthetic prediction file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rows", type=int, default=400)
    p.add_argument("--out", required=True)
    return ap


def _interactive_answers(cfg: AuditConfig, target: Path) -> dict:
    qsrc = cfg.questionnaire if cfg.questionnaire == "builtin" else cfg.resolve(cfg.questionnaire)
    definition = checklist.load_questionnaire(qsrc)
    doc = assess_interactive(definition)
    target.parent.mkdir(parents=True, exist_ok=True)
    with open(target, "w", encoding="utf-8") as fh:
        yaml.safe_dump(doc, fh, allow_unicode=True, sort_keys=False)
    print(f"answers written to {target}")
    return doc["answers"]


def _run(args) -> int:
    try:
        cfg = load_config(args.config)
    except FileNotFoundError as exc:
        print(f"error [config]: config not found: {exc.filename}", file=sys.stderr)
        return EXIT_ERROR
    except (ConfigError, ValueError, yaml.YAMLError) as exc:
        print(f"error [config]: {exc}", file=sys.stderr)
        return EXIT_ERROR

    out_dir = Path(args.out) if args.out else cfg.resolve(cfg.output_dir)
    stages = args.stage if getattr(args, "stage", None) else (
        cfg.stages if args.command == "audit" else STAGE_COMMANDS[args.command]
    )
    answers = None
    try:
        if args.interactive:
            answers = _interactive_answers(cfg, Path(args.answers) if args.answers else out_dir / "answers.yaml")
        elif args.answers:
            from .pipeline import load_answers

            answers = load_answers(Path(args.answers))
    except SessionAborted as exc:
        print(f"error [assess]: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, ValueError, yaml.YAMLError) as exc:
        print(f"error [assess]: cannot read answers: {exc}", file=sys.stderr)
        return EXIT_ERROR

    try:
        result = run_audit(cfg, stages, answers, timestamp=args.timestamp)
    except StageError as exc:
        print(f"error [{exc.stage}]: {exc.cause}", file=sys.stderr)
        return EXIT_ERROR
    written = write_outputs(result, out_dir)
    verdict = result.assessment.overall.upper() if result.assessment else "NO ASSESSMENT"
    print(f"{verdict} (exit {result.exit_code}); report: {written[0]}")
    return result.exit_code


def _apply(args) -> int:
    try:
        cfg = load_config(args.config)
        raw = cfg.resolve(cfg.dataset.path).read_bytes()
        table = load_table(raw, cfg.table_schema.to_schema(), cfg.dataset.format, cfg.dataset.delimiter)
        with open(args.policy, encoding="utf-8") as fh:
            policy = ThresholdPolicy.from_dict(json.load(fh))
        out = apply_policy_to_table(table, policy)
    except (OSError, ValueError, KeyError, ConfigError) as exc:
        print(f"error [apply]: {exc}", file=sys.stderr)
        return EXIT_ERROR
    Path(args.out).write_bytes(serialize(out, cfg.dataset.format, cfg.dataset.delimiter))
    print(f"predictions written to {args.out}")
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "synth":
        Path(args.out).write_text(synthetic_table(args.rows, args.seed), encoding="utf-8")
        print(f"synthetic table written to {args.out}")
        return 0
    if args.command == "apply":
        return _apply(args)
    return _run(args)


if __name__ == "__main__":
    sys.exit(main())
