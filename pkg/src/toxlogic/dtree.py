"""Depth-limited CART classifier over one-hot sign indicators.

Cases are encoded as 22 binary indicators (one per sign-value pair in the
closed vocabularies); splits are binary on a single indicator, chosen
greedily by weighted Gini impurity.  Everything is deterministic: equal-gain
features resolve to the lowest feature index and majority ties to the
lexicographically smallest class label.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .toxkb import SIGNS, TOXIDROMES, VALUE_DOMAINS

FEATURES: tuple[tuple[str, str], ...] = tuple(
    (sign, value) for sign in SIGNS for value in VALUE_DOMAINS[sign])
FEATURE_INDEX = {pair: i for i, pair in enumerate(FEATURES)}
FEATURE_NAMES = tuple(f"{s}={v}" for s, v in FEATURES)

_GAIN_TOL = 1e-12


def encode(findings) -> np.ndarray:
    """One-hot encode (sign, value) findings into the 22-slot indicator vector."""
    fv = np.zeros(len(FEATURES), dtype=np.uint8)
    seen = set()
    for sign, value in findings:
        if sign in seen:
            raise ValueError(f"duplicate sign {sign!r} in findings")
        seen.add(sign)
        fv[FEATURE_INDEX[(sign, value)]] = 1
    return fv


def encode_cases(cases) -> np.ndarray:
    return np.stack([encode(c.findings) for c in cases])


@dataclass(frozen=True)
class Leaf:
    label: str
    class_counts: tuple[int, ...]


@dataclass(frozen=True)
class Split:
    feature: int
    left: "TreeNode"   # indicator == 0
    right: "TreeNode"  # indicator == 1


TreeNode = Leaf | Split


def gini(class_counts) -> float:
    """Gini impurity 1 - sum((c_i / total)^2); counts must not be all zero."""
    counts = np.asarray(class_counts, dtype=np.float64)
    if (counts < 0).any():
        raise ValueError("class counts must be nonnegative")
    total = counts.sum()
    if total == 0:
        raise ValueError("class counts must not be all zero")
    return float(1.0 - ((counts / total) ** 2).sum())


def _counts(y: np.ndarray) -> np.ndarray:
    return np.bincount(y, minlength=len(TOXIDROMES))


def _majority_label(counts: np.ndarray) -> str:
    # argmax takes the first maximum; TOXIDROMES is alphabetical, so ties
    # resolve to the lexicographically smallest label
    return TOXIDROMES[int(np.argmax(counts))]


def _build(X: np.ndarray, y: np.ndarray, depth: int, max_depth: int) -> TreeNode:
    counts = _counts(y)
    node_gini = gini(counts)
    if depth >= max_depth or node_gini == 0.0:
        return Leaf(_majority_label(counts), tuple(int(c) for c in counts))
    n = len(y)
    best_gain = 0.0
    best_feature = None
    for f in range(X.shape[1]):
        mask = X[:, f] == 1
        n_right = int(mask.sum())
        if n_right == 0 or n_right == n:
            continue
        g_right = gini(_counts(y[mask]))
        g_left = gini(_counts(y[~mask]))
        child = (n_right * g_right + (n - n_right) * g_left) / n
        gain = node_gini - child
        if gain > best_gain + _GAIN_TOL:
            best_gain = gain
            best_feature = f
    if best_feature is None:
        return Leaf(_majority_label(counts), tuple(int(c) for c in counts))
    mask = X[:, best_feature] == 1
    return Split(best_feature,
                 _build(X[~mask], y[~mask], depth + 1, max_depth),
                 _build(X[mask], y[mask], depth + 1, max_depth))


def fit(X, labels, max_depth: int = 3) -> TreeNode:
    """Grow a depth-limited tree on encoded cases and toxidrome labels."""
    X = np.asarray(X, dtype=np.uint8)
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("training set must be a nonempty 2-d indicator array")
    y = np.array([TOXIDROMES.index(lbl) for lbl in labels], dtype=np.int64)
    if len(y) != len(X):
        raise ValueError("feature and label counts differ")
    return _build(X, y, 0, max_depth)


def predict(tree: TreeNode, fv) -> str:
    node = tree
    while isinstance(node, Split):
        node = node.right if fv[node.feature] else node.left
    return node.label


def predict_many(tree: TreeNode, X) -> list[str]:
    return [predict(tree, fv) for fv in np.asarray(X)]


def depth(tree: TreeNode) -> int:
    if isinstance(tree, Leaf):
        return 0
    return 1 + max(depth(tree.left), depth(tree.right))


def format_tree(tree: TreeNode, indent: str = "") -> str:
    """Human-readable indented rendering for inspection."""
    if isinstance(tree, Leaf):
        shown = {TOXIDROMES[i]: c for i, c in enumerate(tree.class_counts) if c}
        return f"{indent}-> {tree.label}  {shown}\n"
    name = FEATURE_NAMES[tree.feature]
    out = f"{indent}[{name}?]\n"
    out += f"{indent}  no:\n" + format_tree(tree.left, indent + "    ")
    out += f"{indent}  yes:\n" + format_tree(tree.right, indent + "    ")
    return out
