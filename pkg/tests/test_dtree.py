import numpy as np
import pytest

from toxlogic import casegen, dtree, evalkappa
from toxlogic.dtree import (
    FEATURES,
    Leaf,
    Split,
    depth,
    encode,
    encode_cases,
    fit,
    format_tree,
    gini,
    predict,
    predict_many,
)
from toxlogic.toxkb import TOXIDROMES


class TestGini:
    def test_pure(self):
        assert gini([10, 0, 0, 0, 0, 0]) == 0.0

    def test_symmetric_binary(self):
        assert gini([5, 5]) == pytest.approx(0.5)

    def test_uniform_six_class(self):
        assert gini([1, 1, 1, 1, 1, 1]) == pytest.approx(5 / 6)

    def test_all_zero_rejected(self):
        with pytest.raises(ValueError):
            gini([0, 0, 0])


class TestEncode:
    def test_feature_count(self):
        assert len(FEATURES) == 22

    def test_one_hot_shape(self):
        fv = encode([("heart_rate", "increased"), ("mental_status", "agitated")])
        assert fv.sum() == 2
        assert fv[FEATURES.index(("heart_rate", "increased"))] == 1

    def test_duplicate_sign_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            encode([("heart_rate", "increased"), ("heart_rate", "normal")])

    def test_at_most_one_indicator_per_sign(self):
        ds = casegen.generate_dataset(4, 200)
        X = encode_cases(ds.cases)
        start = 0
        for sign in dtree.SIGNS:
            width = len(dtree.VALUE_DOMAINS[sign])
            assert (X[:, start:start + width].sum(axis=1) <= 1).all()
            start += width
        assert (X.sum(axis=1) == 5).all()


class TestFit:
    def test_pure_root(self):
        X = encode_cases(casegen.generate_dataset(1, 10, (1.0, 0, 0)).cases)
        tree = fit(X, ["opioid"] * 10)
        assert isinstance(tree, Leaf)
        assert tree.label == "opioid"

    def test_perfect_separator(self):
        f = FEATURES.index(("mental_status", "agitated"))
        X = np.zeros((2, 22), dtype=np.uint8)
        X[1, f] = 1
        tree = fit(X, ["opioid", "sympathomimetic"])
        assert isinstance(tree, Split)
        assert tree.feature == f
        assert predict(tree, X[0]) == "opioid"
        assert predict(tree, X[1]) == "sympathomimetic"

    def test_depth_limit(self):
        ds = casegen.generate_dataset(25, 100, (1.0, 0, 0))
        X = encode_cases(ds.cases)
        y = [c.intended for c in ds.cases]
        tree = fit(X, y)
        assert depth(tree) <= 3

    def test_training_accuracy_difficulty0(self):
        ds = casegen.generate_dataset(25, 100, (1.0, 0, 0))
        X = encode_cases(ds.cases)
        y = [c.intended for c in ds.cases]
        tree = fit(X, y)
        acc = np.mean([p == t for p, t in zip(predict_many(tree, X), y)])
        assert acc >= 0.8

    def test_never_below_majority_baseline(self):
        for seed in range(1, 8):
            ds = casegen.generate_dataset(seed, 60)
            X = encode_cases(ds.cases)
            y = [c.intended for c in ds.cases]
            tree = fit(X, y)
            acc = np.mean([p == t for p, t in zip(predict_many(tree, X), y)])
            majority = max(y.count(t) for t in TOXIDROMES) / len(y)
            assert acc >= majority

    def test_deterministic(self):
        ds = casegen.generate_dataset(12, 80)
        X = encode_cases(ds.cases)
        y = [c.intended for c in ds.cases]
        assert fit(X, y) == fit(X, y)

    def test_majority_tie_breaks_lexicographically(self):
        X = np.zeros((2, 22), dtype=np.uint8)
        tree = fit(X, ["sympathomimetic", "opioid"])
        assert isinstance(tree, Leaf)
        assert tree.label == "opioid"

    def test_empty_training_set_rejected(self):
        with pytest.raises(ValueError):
            fit(np.zeros((0, 22), dtype=np.uint8), [])


class TestHoldout:
    def test_difficulty0_holdout_kappa_in_band(self):
        ds = casegen.generate_dataset(25, 100, (1.0, 0, 0))
        rng = casegen.SplitMix64(25)
        order = list(range(len(ds.cases)))
        rng.shuffle(order)
        train = [ds.cases[i] for i in order[:50]]
        test = [ds.cases[i] for i in order[50:]]
        tree = fit(encode_cases(train), [c.intended for c in train])
        preds = predict_many(tree, encode_cases(test))
        cm = evalkappa.ConfusionMatrix.from_pairs(
            [(p, c.intended) for p, c in zip(preds, test)])
        report = evalkappa.kappa(cm)
        assert 0.4 <= report.kappa <= 0.9


class TestFormat:
    def test_indented_rendering(self):
        ds = casegen.generate_dataset(25, 40, (1.0, 0, 0))
        X = encode_cases(ds.cases)
        tree = fit(X, [c.intended for c in ds.cases])
        text = format_tree(tree)
        assert "->" in text and "?]" in text
        assert text.count("yes:") == text.count("no:")
