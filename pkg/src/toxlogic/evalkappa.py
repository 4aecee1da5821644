"""Cohen's kappa over six toxidrome categories and the benchmark pipeline.

The benchmark classifies every case per difficulty with the logic engine
(posterior argmax) and with a per-difficulty decision tree, then reports
observed/expected agreement and kappa for the pairs ``tak_vs_intended`` and
``dt_vs_intended`` (plus human pairs when an external label file is given).
Cases the engine refuses are counted as abstentions and excluded from the
confusion matrices, never silently dropped.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import dtree, worlds
from .casegen import Case, SplitMix64
from .toxkb import TOXIDROMES, KnowledgeBase

DIFFICULTIES = (0, 1, 2)

PAIR_TAK = "tak_vs_intended"
PAIR_DT = "dt_vs_intended"
PAIR_HUMAN_INTENDED = "human_vs_intended"
PAIR_HUMAN_TAK = "human_vs_tak"


@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows index rater A's labels, columns rater B's."""

    labels: tuple[str, ...]
    counts: np.ndarray

    @classmethod
    def from_pairs(cls, pairs, labels=TOXIDROMES) -> "ConfusionMatrix":
        index = {lbl: i for i, lbl in enumerate(labels)}
        counts = np.zeros((len(labels), len(labels)), dtype=np.int64)
        for a, b in pairs:
            counts[index[a], index[b]] += 1
        return cls(tuple(labels), counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def transposed(self) -> "ConfusionMatrix":
        return ConfusionMatrix(self.labels, self.counts.T.copy())

    def to_lists(self) -> list[list[int]]:
        return self.counts.tolist()


@dataclass(frozen=True)
class KappaReport:
    pair: str
    difficulty: int | None
    kappa: float
    p_o: float
    p_e: float
    n: int
    degenerate: bool = False


def kappa(cm: ConfusionMatrix, pair: str = "", difficulty: int | None = None) -> KappaReport:
    """Chance-corrected agreement (p_o - p_e) / (1 - p_e).

    When both raters are constant and identical, expected agreement is 1 and
    the ratio degenerates; that case reports kappa 1 with a flag.
    """
    total = cm.total
    if total < 1:
        raise ValueError("confusion matrix is empty")
    counts = cm.counts.astype(np.float64)
    p_o = float(np.trace(counts)) / total
    row = counts.sum(axis=1) / total
    col = counts.sum(axis=0) / total
    p_e = float(np.dot(row, col))
    if p_e >= 1.0 - 1e-15:
        return KappaReport(pair, difficulty, 1.0, p_o, p_e, total, degenerate=True)
    k = (p_o - p_e) / (1.0 - p_e)
    return KappaReport(pair, difficulty, k, p_o, p_e, total)


# ---------------------------------------------------------------------------
# Benchmark
# ---------------------------------------------------------------------------

@dataclass
class BenchmarkResult:
    reports: list[KappaReport]
    matrices: dict[tuple[str, int], ConfusionMatrix]
    abstentions: dict[int, list[int]]          # difficulty -> abstained case ids
    predictions: dict[str, dict[int, str]]     # rater -> case id -> label
    holdout_reports: list[KappaReport] = field(default_factory=list)

    def to_csv(self) -> str:
        lines = ["type,difficulty,kappa"]
        lines += [f"{r.pair},{r.difficulty},{r.kappa:.6f}" for r in self.reports]
        return "\n".join(lines) + "\n"

    def to_json_obj(self) -> dict:
        return {
            "labels": list(TOXIDROMES),
            "reports": [
                {"pair": r.pair, "difficulty": r.difficulty, "kappa": r.kappa,
                 "p_o": r.p_o, "p_e": r.p_e, "n": r.n, "degenerate": r.degenerate}
                for r in self.reports
            ],
            "holdout_reports": [
                {"pair": r.pair, "difficulty": r.difficulty, "kappa": r.kappa,
                 "p_o": r.p_o, "p_e": r.p_e, "n": r.n}
                for r in self.holdout_reports
            ],
            "matrices": {
                f"{pair}/difficulty_{d}": cm.to_lists()
                for (pair, d), cm in self.matrices.items()
            },
            "abstentions": {str(d): ids for d, ids in self.abstentions.items()},
            "predictions": {
                rater: {str(cid): lbl for cid, lbl in preds.items()}
                for rater, preds in self.predictions.items()
            },
        }


def classify_with_engine(kb: KnowledgeBase, cases, patient: str = "pt",
                         cap: int | None = None):
    """Posterior-argmax label per case; None marks an engine refusal."""
    labels: dict[int, str | None] = {}
    for case in cases:
        try:
            post = kb.classify(case.findings, patient, cap)
            labels[case.id] = str(post.argmax.args[-1])
        except (worlds.EnumerationCapError, worlds.InconsistentEvidenceError):
            labels[case.id] = None
    return labels


def _pair_report(name: str, difficulty: int, a: dict[int, str], b: dict[int, str],
                 ids):
    pairs = [(a[i], b[i]) for i in ids if a.get(i) is not None and b.get(i) is not None]
    if not pairs:
        return None, None  # everything abstained; the abstention log records it
    cm = ConfusionMatrix.from_pairs(pairs)
    return kappa(cm, name, difficulty), cm


def run_benchmark(kb: KnowledgeBase, cases, *, seed: int = 0,
                  enumeration_cap: int | None = None,
                  external_labels: dict[int, str] | None = None,
                  include_holdout: bool = True,
                  patient: str = "pt") -> BenchmarkResult:
    """Classify every case per difficulty and assemble the kappa reports."""
    cases = list(cases)
    if not cases:
        raise ValueError("dataset is empty")
    intended = {c.id: c.intended for c in cases}
    tak = classify_with_engine(kb, cases, patient, enumeration_cap)

    dt_preds: dict[int, str] = {}
    holdout_reports: list[KappaReport] = []
    by_difficulty = {d: [c for c in cases if c.difficulty == d] for d in DIFFICULTIES}
    for d, sub in by_difficulty.items():
        if not sub:
            continue
        X = dtree.encode_cases(sub)
        y = [c.intended for c in sub]
        tree = dtree.fit(X, y)
        for case, label in zip(sub, dtree.predict_many(tree, X)):
            dt_preds[case.id] = label
        if include_holdout and len(sub) >= 4:
            holdout_reports.append(_holdout_report(sub, d, seed))

    reports: list[KappaReport] = []
    matrices: dict[tuple[str, int], ConfusionMatrix] = {}
    abstentions: dict[int, list[int]] = {}
    pair_sets: list[tuple[str, dict[int, str], dict[int, str]]] = [
        (PAIR_TAK, tak, intended),
        (PAIR_DT, dt_preds, intended),
    ]
    if external_labels is not None:
        pair_sets.append((PAIR_HUMAN_INTENDED, external_labels, intended))
        pair_sets.append((PAIR_HUMAN_TAK, external_labels, tak))

    for name, a, b in pair_sets:
        for d in DIFFICULTIES:
            sub = by_difficulty[d]
            if not sub:
                continue
            report, cm = _pair_report(name, d, a, b, [c.id for c in sub])
            if report is None:
                continue
            reports.append(report)
            matrices[(name, d)] = cm
    for d, sub in by_difficulty.items():
        abstentions[d] = [c.id for c in sub if tak.get(c.id) is None]

    predictions: dict[str, dict[int, str]] = {
        "tak": {i: lbl for i, lbl in tak.items() if lbl is not None},
        "dt": dt_preds,
        "intended": intended,
    }
    if external_labels is not None:
        predictions["human"] = dict(external_labels)
    return BenchmarkResult(reports, matrices, abstentions, predictions, holdout_reports)


def _holdout_report(sub: list[Case], difficulty: int, seed: int) -> KappaReport:
    """50/50 split kappa for the tree, shuffled by the run seed."""
    rng = SplitMix64(seed ^ (difficulty + 1))
    order = list(range(len(sub)))
    rng.shuffle(order)
    half = len(order) // 2
    train = [sub[i] for i in order[:half]]
    test = [sub[i] for i in order[half:]]
    tree = dtree.fit(dtree.encode_cases(train), [c.intended for c in train])
    preds = dtree.predict_many(tree, dtree.encode_cases(test))
    cm = ConfusionMatrix.from_pairs([(p, c.intended) for p, c in zip(preds, test)])
    return kappa(cm, "dt_holdout_vs_intended", difficulty)


def load_external_labels(path) -> dict[int, str]:
    """Read rater labels from JSONL records {"id": ..., "label": ...}."""
    labels: dict[int, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                cid, label = int(obj["id"]), obj["label"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
            if label not in TOXIDROMES:
                raise ValueError(f"{path}:{lineno}: unknown label {label!r}")
            labels[cid] = label
    return labels
