"""Seeded generation of simulated toxidrome presentations.

Each case mixes an intended and a distractor toxidrome: 5-k signs are drawn
without replacement from the intended template and k more, over the signs not
yet used, from the distractor template.  Findings are serialized in draw
order (intended block first), one JSON object per line::

    {"id": 0, "difficulty": 1, "intended": "opioid", "distractor": "cholinergic",
     "findings": [{"sign": "pupil_diameter", "value": "small"}, ...]}

Randomness comes from `SplitMix64`, a tiny fully-specified generator, so the
same seed reproduces the same dataset byte for byte on any platform.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .toxkb import SIGNS, TEMPLATES, TOXIDROMES, validate_finding

SIGNS_PER_CASE = 5

_MASK64 = (1 << 64) - 1


class SplitMix64:
    """SplitMix64 pseudorandom generator (Steele, Lea & Flood's mixer).

    state' = state + 0x9E3779B97F4A7C15;  z = state'
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    output = z ^ (z >> 31)

    Integers below n are taken modulo n (the bias at 64 bits is far below
    anything observable here); floats use the top 53 bits.
    """

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def random(self) -> float:
        return (self.next_u64() >> 11) * 2.0 ** -53

    def randbelow(self, n: int) -> int:
        if n <= 0:
            raise ValueError("n must be positive")
        return self.next_u64() % n

    def choice(self, seq):
        return seq[self.randbelow(len(seq))]

    def sample(self, seq, k: int) -> list:
        """k distinct elements via a partial Fisher-Yates shuffle."""
        pool = list(seq)
        if k > len(pool):
            raise ValueError("sample larger than population")
        for i in range(k):
            j = i + self.randbelow(len(pool) - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]

    def shuffle(self, items: list) -> None:
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]

    def weighted_index(self, weights) -> int:
        total = sum(weights)
        u = self.random() * total
        acc = 0.0
        for i, w in enumerate(weights):
            acc += w
            if u < acc:
                return i
        return len(weights) - 1


@dataclass(frozen=True)
class Case:
    id: int
    difficulty: int
    intended: str
    distractor: str
    findings: tuple[tuple[str, str], ...]

    def findings_dict(self) -> dict[str, str]:
        return dict(self.findings)

    def to_json_obj(self) -> dict:
        return {
            "id": self.id,
            "difficulty": self.difficulty,
            "intended": self.intended,
            "distractor": self.distractor,
            "findings": [{"sign": s, "value": v} for s, v in self.findings],
        }


@dataclass(frozen=True)
class Dataset:
    cases: tuple[Case, ...]
    seed: int
    counts: dict[tuple[str, int], int] = field(default_factory=dict)


def generate_case(rng: SplitMix64, k: int, case_id: int = 0) -> Case:
    """One simulated presentation at difficulty k (k signs off-pattern)."""
    if not 0 <= k <= SIGNS_PER_CASE:
        raise ValueError(f"difficulty k must be in 0..{SIGNS_PER_CASE}, got {k}")
    intended = rng.choice(TOXIDROMES)
    distractor = rng.choice(tuple(t for t in TOXIDROMES if t != intended))
    intended_signs = rng.sample(SIGNS, SIGNS_PER_CASE - k)
    remaining = tuple(s for s in SIGNS if s not in intended_signs)
    distractor_signs = rng.sample(remaining, k)
    findings = tuple((s, TEMPLATES[intended].expected[s]) for s in intended_signs)
    findings += tuple((s, TEMPLATES[distractor].expected[s]) for s in distractor_signs)
    return Case(case_id, k, intended, distractor, findings)


def generate_dataset(seed: int, n: int, difficulty_weights=None) -> Dataset:
    """n seeded cases with difficulties drawn from the given weights.

    Weights default to uniform over difficulties 0, 1, 2 and must be
    nonnegative and sum to 1.
    """
    if n <= 0:
        raise ValueError("n must be positive")
    weights = (1 / 3, 1 / 3, 1 / 3) if difficulty_weights is None else tuple(difficulty_weights)
    if len(weights) != 3 or any(w < 0 for w in weights):
        raise ValueError("difficulty weights must be three nonnegative numbers")
    if abs(sum(weights) - 1.0) > 1e-6:
        raise ValueError(f"difficulty weights sum to {sum(weights):g}, expected 1")
    rng = SplitMix64(seed)
    cases = []
    counts: dict[tuple[str, int], int] = {}
    for i in range(n):
        k = rng.weighted_index(weights)
        case = generate_case(rng, k, case_id=i)
        cases.append(case)
        key = (case.intended, case.difficulty)
        counts[key] = counts.get(key, 0) + 1
    return Dataset(tuple(cases), seed, counts)


def counts_rows(dataset: Dataset) -> list[list]:
    """Counts table shaped toxidrome x difficulty, with a header row."""
    rows: list[list] = [["toxidrome", "0", "1", "2"]]
    for tox in TOXIDROMES:
        rows.append([tox] + [dataset.counts.get((tox, d), 0) for d in (0, 1, 2)])
    return rows


def to_jsonl(cases) -> str:
    return "".join(json.dumps(c.to_json_obj(), separators=(", ", ": ")) + "\n"
                   for c in cases)


def case_from_json_obj(obj: dict) -> Case:
    try:
        findings = tuple((f["sign"], f["value"]) for f in obj["findings"])
        case = Case(int(obj["id"]), int(obj["difficulty"]), obj["intended"],
                    obj["distractor"], findings)
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed case record: {exc}") from exc
    for sign, value in case.findings:
        validate_finding(sign, value)
    if case.intended not in TOXIDROMES or case.distractor not in TOXIDROMES:
        raise ValueError(f"case {case.id}: unknown toxidrome label")
    return case


def load_cases(path) -> list[Case]:
    cases = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                cases.append(case_from_json_obj(json.loads(line)))
            except (json.JSONDecodeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
    return cases


def write_dataset(dataset: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(to_jsonl(dataset.cases))


# ---------------------------------------------------------------------------
# Plausibility screening
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ImplausibilityRule:
    """Flags a case whose findings contain every listed (sign, value) pair."""

    reason: str
    pattern: tuple[tuple[str, str], ...]

    def matches(self, case: Case) -> bool:
        have = set(case.findings)
        return all(pair in have for pair in self.pattern)


@dataclass(frozen=True)
class Plausibility:
    plausible: bool
    reason: str | None = None


DEFAULT_IMPLAUSIBILITY_RULES: tuple[ImplausibilityRule, ...] = ()


def plausibility_filter(case: Case,
                        rules=DEFAULT_IMPLAUSIBILITY_RULES) -> Plausibility:
    """Screen one case against contradiction patterns (none ship by default)."""
    for rule in rules:
        if rule.matches(case):
            return Plausibility(False, rule.reason)
    return Plausibility(True)
