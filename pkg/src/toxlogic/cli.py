"""Command-line entry point wiring generation, classification, and evaluation.

Subcommands: ``generate``, ``classify``, ``evaluate``, ``kb-validate``, and
``explain`` (an alias of ``classify --explain``).  All randomness flows from
the ``--seed`` flag; outputs are deterministic given the seed and inputs.
Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import casegen, evalkappa, figures, rulelang, toxkb, worlds

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


class UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="toxlogic",
        description="Probabilistic logic toxidrome classification benchmark")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="generate a seeded synthetic dataset")
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--n", type=int, required=True, help="number of cases")
    gen.add_argument("--difficulty-weights", default=None,
                     help="comma-separated weights for difficulties 0,1,2 (sum 1)")
    gen.add_argument("--out", default=".", help="output directory")
    gen.set_defaults(func=cmd_generate)

    for name, explain_default in (("classify", False), ("explain", True)):
        cls = sub.add_parser(
            name,
            help="classify cases or inline findings" if name == "classify"
            else "classify with world-level explanations (classify --explain)")
        cls.add_argument("--kb", default=None, help="rule file (.plx); default: shipped KB")
        cls.add_argument("--priors", default=None, help="priors config file")
        cls.add_argument("--raw", action="store_true",
                         help="treat the rule file as a plain program: skip KB "
                              "validation and prior injection")
        cls.add_argument("--dataset", default=None, help="JSONL case file")
        cls.add_argument("--finding", action="append", default=[],
                         metavar="SIGN=VALUE", help="inline finding (repeatable)")
        cls.add_argument("--patient", default="pt")
        cls.add_argument("--enumeration-cap", type=int, default=None)
        cls.add_argument("--explain", action="store_true", default=explain_default)
        cls.add_argument("--top-n", type=int, default=3,
                         help="worlds per explanation")
        cls.add_argument("--out", default=None, help="output file (default: stdout)")
        cls.set_defaults(func=cmd_classify)

    ev = sub.add_parser("evaluate", help="run the benchmark over a dataset")
    ev.add_argument("--seed", type=int, required=True,
                    help="seed for the held-out split shuffle")
    ev.add_argument("--kb", default=None)
    ev.add_argument("--priors", default=None)
    ev.add_argument("--dataset", required=True)
    ev.add_argument("--external-labels", default=None,
                    help="JSONL rater labels {id, label}; adds human-pair rows")
    ev.add_argument("--enumeration-cap", type=int, default=None)
    ev.add_argument("--patient", default="pt")
    ev.add_argument("--out", default=".", help="output directory")
    ev.set_defaults(func=cmd_evaluate)

    val = sub.add_parser("kb-validate", help="lint and self-test a knowledge base")
    val.add_argument("--kb", default=None)
    val.add_argument("--priors", default=None)
    val.set_defaults(func=cmd_kb_validate)
    return parser


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_generate(args) -> int:
    if args.n <= 0:
        raise UsageError("--n must be a positive integer")
    weights = _parse_weights(args.difficulty_weights)
    out_dir = _ensure_dir(args.out)
    dataset = casegen.generate_dataset(args.seed, args.n, weights)
    dataset_path = out_dir / "dataset.jsonl"
    casegen.write_dataset(dataset, dataset_path)
    counts_path = out_dir / "counts.csv"
    with open(counts_path, "w", newline="", encoding="utf-8") as fh:
        csv.writer(fh).writerows(casegen.counts_rows(dataset))
    print(f"wrote {len(dataset.cases)} cases to {dataset_path}")
    print(f"wrote counts table to {counts_path}")
    return EXIT_OK


def cmd_classify(args) -> int:
    if bool(args.dataset) == bool(args.finding):
        raise UsageError("provide exactly one of --dataset or --finding")
    gp, labels = _load_program(args)
    records = []
    if args.finding:
        findings = [_parse_finding(f) for f in args.finding]
        records.append(_classify_one(gp, labels, findings, None, args))
    else:
        for case in casegen.load_cases(args.dataset):
            records.append(_classify_one(gp, labels, list(case.findings), case.id, args))
    text = "\n".join(json.dumps(r) for r in records) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if any("error" in r for r in records):
        return EXIT_RUNTIME
    return EXIT_OK


def _classify_one(gp, labels, findings, case_id, args) -> dict:
    evidence = [(toxkb.finding_atom(s, v, args.patient), True) for s, v in findings]
    record: dict = {"id": case_id, "findings": [{"sign": s, "value": v} for s, v in findings]}
    try:
        post = worlds.posterior(gp, labels, evidence, args.enumeration_cap)
    except (worlds.EnumerationCapError, worlds.InconsistentEvidenceError) as exc:
        record["error"] = str(exc)
        return record
    record["posterior"] = {str(a.args[-1]): v for a, v in post.normalized().items()}
    record["argmax"] = str(post.argmax.args[-1])
    record["evidence_probability"] = post.evidence_probability
    if args.explain:
        record["explanation"] = _explanation(gp, post.argmax, evidence, args.top_n)
    return record


def _explanation(gp, label, evidence, top_n) -> list[dict]:
    entries = []
    for world, weight, fired in worlds.explain(gp, label, evidence, top_n):
        chosen = []
        for group, idx in zip(gp.groups, world.selection):
            if idx >= 0:
                chosen.append(str(group.outcomes[idx][0]))
        entries.append({
            "weight": weight,
            "selected": chosen,
            "fired_rules": [rule.source or str(rule) for rule in fired],
        })
    return entries


def cmd_evaluate(args) -> int:
    kb = _load_kb(args)
    cases = casegen.load_cases(args.dataset)
    if not cases:
        raise UsageError(f"dataset {args.dataset} is empty")
    external = (evalkappa.load_external_labels(args.external_labels)
                if args.external_labels else None)
    out_dir = _ensure_dir(args.out)
    result = evalkappa.run_benchmark(
        kb, cases, seed=args.seed, enumeration_cap=args.enumeration_cap,
        external_labels=external, patient=args.patient)
    (out_dir / "kappas.csv").write_text(result.to_csv(), encoding="utf-8")
    (out_dir / "report.json").write_text(
        json.dumps(result.to_json_obj(), indent=2) + "\n", encoding="utf-8")
    figures.save_kappa_chart(result, out_dir / "kappas.png")
    figures.save_confusion_grid(result, out_dir / "confusions.png")
    for r in result.reports:
        print(f"{r.pair} difficulty={r.difficulty} kappa={r.kappa:.4f} "
              f"(p_o={r.p_o:.4f}, p_e={r.p_e:.4f}, n={r.n})")
    abstained = sum(len(ids) for ids in result.abstentions.values())
    if abstained:
        print(f"abstentions: {abstained} case(s), see report.json")
    print(f"wrote kappas.csv, report.json, kappas.png, confusions.png to {out_dir}")
    return EXIT_OK


def cmd_kb_validate(args) -> int:
    kb_path = Path(args.kb) if args.kb else toxkb.default_kb_path()
    if not kb_path.exists():
        raise UsageError(f"no such file: {kb_path}")
    program = rulelang.parse_file(kb_path)
    counts = toxkb.lint_kb(program)
    print(f"{counts['total']} clauses "
          f"({counts['prior_groups']} prior groups, "
          f"{counts['linking_clauses']} linking clauses, "
          f"{counts['goal_clauses']} goal clauses)")
    failures = []
    for key, expected in toxkb.EXPECTED_CLAUSE_COUNTS.items():
        if counts[key] != expected:
            failures.append(f"lint: expected {expected} {key}, found {counts[key]}")
    try:
        kb = toxkb.load_kb(kb_path, _read_priors(args), self_test=False)
        toxkb.run_self_test(kb)
        print("self-test: all 6 toxidromes identified from canonical findings")
    except toxkb.KnowledgeBaseError as exc:
        failures.append(str(exc))
    if failures:
        for f in failures:
            print(f, file=sys.stderr)
        return EXIT_RUNTIME
    print("knowledge base OK")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def _ensure_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _parse_weights(text):
    if text is None:
        return None
    try:
        weights = tuple(float(x) for x in text.split(","))
    except ValueError:
        raise UsageError(f"bad difficulty weights {text!r}") from None
    if len(weights) != 3 or any(w < 0 for w in weights) or abs(sum(weights) - 1) > 1e-6:
        raise UsageError("difficulty weights must be three nonnegative numbers summing to 1")
    return weights


def _parse_finding(text: str) -> tuple[str, str]:
    sign, sep, value = text.partition("=")
    if not sep:
        raise UsageError(f"finding {text!r} must look like sign=value")
    try:
        toxkb.validate_finding(sign.strip(), value.strip())
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return sign.strip(), value.strip()


def _read_priors(args):
    if getattr(args, "priors", None) is None:
        return None
    path = Path(args.priors)
    if not path.exists():
        raise UsageError(f"no such file: {path}")
    return toxkb.parse_priors_file(path)


def _load_kb(args) -> toxkb.KnowledgeBase:
    kb_path = Path(args.kb) if args.kb else toxkb.default_kb_path()
    if not kb_path.exists():
        raise UsageError(f"no such file: {kb_path}")
    return toxkb.load_kb(kb_path, _read_priors(args))


def _load_program(args):
    """Ground program plus label atoms, honoring --raw for plain rule files."""
    if args.raw:
        kb_path = Path(args.kb) if args.kb else toxkb.default_kb_path()
        if not kb_path.exists():
            raise UsageError(f"no such file: {kb_path}")
        program = rulelang.parse_file(kb_path)
        gp = worlds.ground(program, [args.patient])
        labels = sorted(
            {a for c in program.clauses for a in _label_heads(c, args.patient)},
            key=str)
        if not labels:
            raise UsageError("the rule file derives no toxidrome labels")
        return gp, labels
    kb = _load_kb(args)
    return kb.ground_for(args.patient), list(kb.label_atoms(args.patient))


def _label_heads(clause, patient):
    from .rulelang import Atom, Constant, Variable
    for atom in clause.head_atoms():
        if atom.predicate in (toxkb.LABEL_PREDICATE, "hasToxidrome"):
            args = tuple(Constant(patient) if isinstance(t, Variable) else t
                         for t in atom.args)
            yield Atom(atom.predicate, args)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (rulelang.ParseError, worlds.GroundingError, worlds.EnumerationCapError,
            worlds.InconsistentEvidenceError, toxkb.KnowledgeBaseError,
            ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
