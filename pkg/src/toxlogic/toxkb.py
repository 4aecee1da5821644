"""The toxidrome knowledge base: templates, rule file loading, and validation.

Six canonical toxidromes are described over seven bedside signs.  A sign a
toxidrome is not expected to disturb carries the explicit value ``normal``
(``alert`` for mental status).  The shipped rule file ``data/toxkb.plx``
encodes background sign rates, sign-value linking rules, and per-toxidrome
goal rules; class priors are injected at grounding time as one extra choice
group so a configuration file can reweight them without editing the rules.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass
from pathlib import Path

from . import rulelang, worlds
from .rulelang import Atom, Constant, Program

TOXIDROMES = (
    "anticholinergic",
    "cholinergic",
    "opioid",
    "sedative_hypnotic",
    "serotonin_toxicity",
    "sympathomimetic",
)

SIGNS = (
    "heart_rate",
    "blood_pressure",
    "pupil_diameter",
    "secretions",
    "temperature",
    "respiratory_rate",
    "mental_status",
)

VALUE_DOMAINS = {
    "heart_rate": ("increased", "normal", "decreased"),
    "blood_pressure": ("increased", "normal", "decreased"),
    "pupil_diameter": ("large", "normal", "small"),
    "secretions": ("increased", "normal", "decreased"),
    "temperature": ("increased", "normal", "decreased"),
    "respiratory_rate": ("increased", "normal", "decreased"),
    "mental_status": ("agitated", "alert", "sedated", "delirious"),
}

NORMAL_VALUES = {sign: ("alert" if sign == "mental_status" else "normal") for sign in SIGNS}

LABEL_PREDICATE = "has_toxidrome"

# Abnormal expectations per toxidrome; unlisted signs are normal/alert.
_ABNORMAL = {
    "anticholinergic": {
        "heart_rate": "increased",
        "pupil_diameter": "large",
        "secretions": "decreased",
        "temperature": "increased",
        "mental_status": "delirious",
    },
    "cholinergic": {
        "heart_rate": "decreased",
        "pupil_diameter": "small",
        "secretions": "increased",
        "respiratory_rate": "decreased",
        "mental_status": "sedated",
    },
    "opioid": {
        "pupil_diameter": "small",
        "respiratory_rate": "decreased",
        "mental_status": "sedated",
    },
    "sedative_hypnotic": {
        "mental_status": "sedated",
    },
    "serotonin_toxicity": {
        "heart_rate": "increased",
        "blood_pressure": "increased",
        "temperature": "increased",
        "mental_status": "agitated",
    },
    "sympathomimetic": {
        "heart_rate": "increased",
        "blood_pressure": "increased",
        "pupil_diameter": "large",
        "temperature": "increased",
        "respiratory_rate": "increased",
        "mental_status": "agitated",
    },
}


class KnowledgeBaseError(Exception):
    pass


@dataclass(frozen=True)
class ToxidromeTemplate:
    toxidrome: str
    expected: dict[str, str]

    def abnormal_findings(self) -> tuple[tuple[str, str], ...]:
        return tuple((s, v) for s, v in self.expected.items() if v != NORMAL_VALUES[s])


TEMPLATES: dict[str, ToxidromeTemplate] = {
    tox: ToxidromeTemplate(
        tox, {sign: _ABNORMAL[tox].get(sign, NORMAL_VALUES[sign]) for sign in SIGNS})
    for tox in TOXIDROMES
}


def template_of(toxidrome: str) -> ToxidromeTemplate:
    """Expected value for every sign of one toxidrome (empty cells filled)."""
    try:
        return TEMPLATES[toxidrome]
    except KeyError:
        raise ValueError(
            f"unknown toxidrome {toxidrome!r}; expected one of {', '.join(TOXIDROMES)}"
        ) from None


def validate_finding(sign: str, value: str) -> None:
    if sign not in VALUE_DOMAINS:
        raise ValueError(f"unknown sign {sign!r}; the closed vocabulary is: "
                         + ", ".join(SIGNS))
    if value not in VALUE_DOMAINS[sign]:
        raise ValueError(f"unknown value {value!r} for sign {sign!r}; allowed values: "
                         + ", ".join(VALUE_DOMAINS[sign]))


def finding_atom(sign: str, value: str, patient: str = "pt") -> Atom:
    validate_finding(sign, value)
    return Atom(sign, (Constant(patient), Constant(value)))


def label_atom(toxidrome: str, patient: str = "pt") -> Atom:
    if toxidrome not in TOXIDROMES:
        raise ValueError(f"unknown toxidrome {toxidrome!r}")
    return Atom(LABEL_PREDICATE, (Constant(patient), Constant(toxidrome)))


@dataclass(frozen=True)
class KnowledgeBase:
    program: Program
    templates: dict[str, ToxidromeTemplate]
    priors: dict[str, float]

    def ground_for(self, patient: str = "pt") -> worlds.GroundProgram:
        """Ground the rule program and append the class-prior choice group."""
        gp = worlds.ground(self.program, [patient])
        outcomes = [(label_atom(t, patient), self.priors[t]) for t in TOXIDROMES]
        return gp.with_group(outcomes, residual=0.0, source="class priors")

    def label_atoms(self, patient: str = "pt") -> tuple[Atom, ...]:
        return tuple(label_atom(t, patient) for t in TOXIDROMES)

    def evidence_for(self, findings, patient: str = "pt") -> tuple[tuple[Atom, bool], ...]:
        return tuple((finding_atom(s, v, patient), True) for s, v in findings)

    def classify(self, findings, patient: str = "pt",
                 cap: int | None = None) -> worlds.Posterior:
        """Posterior over the six toxidromes given (sign, value) findings."""
        gp = self.ground_for(patient)
        return worlds.posterior(gp, self.label_atoms(patient),
                                self.evidence_for(findings, patient), cap)


def default_kb_path() -> Path:
    return Path(importlib.resources.files("toxlogic").joinpath("data/toxkb.plx"))


def uniform_priors() -> dict[str, float]:
    return {t: 1.0 / len(TOXIDROMES) for t in TOXIDROMES}


def load_kb(path=None, priors_override: dict[str, float] | None = None,
            *, self_test: bool = True) -> KnowledgeBase:
    """Parse, ground-check, and self-test a knowledge base file.

    Priors default to uniform.  The self-test conditions on each toxidrome's
    canonical abnormal findings and requires that toxidrome to be the strict
    posterior argmax; failures name the offending toxidrome.
    """
    kb_path = Path(path) if path is not None else default_kb_path()
    try:
        program = rulelang.parse_file(kb_path)
    except rulelang.ParseError as exc:
        raise KnowledgeBaseError(f"{kb_path}: {exc}") from exc
    priors = dict(uniform_priors() if priors_override is None else priors_override)
    unknown = set(priors) - set(TOXIDROMES)
    if unknown:
        raise KnowledgeBaseError(f"priors name unknown toxidromes: {sorted(unknown)}")
    for t in TOXIDROMES:
        priors.setdefault(t, 0.0)
        if priors[t] < 0.0:
            raise KnowledgeBaseError(f"prior for {t} is negative")
    total = sum(priors.values())
    if abs(total - 1.0) > 1e-9:
        raise KnowledgeBaseError(f"priors sum to {total:g}, expected 1")
    kb = KnowledgeBase(program, dict(TEMPLATES), priors)
    try:
        kb.ground_for("pt")
    except worlds.GroundingError as exc:
        raise KnowledgeBaseError(f"{kb_path}: {exc}") from exc
    if self_test:
        run_self_test(kb)
    return kb


def run_self_test(kb: KnowledgeBase, patient: str = "pt") -> None:
    """Check that canonical abnormal findings identify each toxidrome strictly."""
    for tox in TOXIDROMES:
        findings = kb.templates[tox].abnormal_findings()
        post = kb.classify(findings, patient)
        target = label_atom(tox, patient)
        best = post.entries[target]
        for other, value in post.entries.items():
            if other != target and value >= best:
                raise KnowledgeBaseError(
                    f"self-test failed for {tox}: {other} scores {value:.6f} "
                    f"vs {best:.6f} on the canonical presentation")


def lint_kb(program: Program) -> dict[str, int]:
    """Clause census: prior groups, linking clauses, goal clauses, total."""
    priors = sum(1 for c in program.clauses if c.is_prior_group())
    linking = sum(1 for c in program.clauses
                  if not c.deterministic and c.body_atoms())
    goals = sum(1 for c in program.clauses if c.deterministic)
    return {
        "prior_groups": priors,
        "linking_clauses": linking,
        "goal_clauses": goals,
        "total": len(program.clauses),
    }


EXPECTED_CLAUSE_COUNTS = {
    "prior_groups": 7,
    "linking_clauses": 21,
    "goal_clauses": 6,
    "total": 34,
}


def parse_priors_file(path) -> dict[str, float]:
    """Read a flat ``toxidrome = probability`` config file ('#' comments)."""
    priors: dict[str, float] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise KnowledgeBaseError(f"{path}:{lineno}: expected 'name = value'")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in TOXIDROMES:
                raise KnowledgeBaseError(f"{path}:{lineno}: unknown toxidrome {key!r}")
            if key in priors:
                raise KnowledgeBaseError(f"{path}:{lineno}: duplicate entry for {key}")
            try:
                priors[key] = float(value.strip())
            except ValueError:
                raise KnowledgeBaseError(f"{path}:{lineno}: bad number {value.strip()!r}") from None
    return priors
