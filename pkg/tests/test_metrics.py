import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dialect_bench.metrics import (
    MetricsError,
    accuracy_score,
    classification_metrics,
    confusion,
)


class TestConfusion:
    def test_perfect_two_classes(self):
        cm = confusion(["A", "B"], ["A", "B"], ["A", "B"])
        assert cm.tolist() == [[1, 0], [0, 1]]

    def test_single_miss(self):
        cm = confusion(["A"], ["B"], ["A", "B"])
        assert cm.tolist() == [[0, 1], [0, 0]]

    def test_unknown_label(self):
        with pytest.raises(MetricsError, match="unknown label"):
            confusion(["A"], ["C"], ["A", "B"])

    def test_length_mismatch(self):
        with pytest.raises(MetricsError, match="mismatch"):
            confusion(["A"], ["A", "B"], ["A", "B"])

    def test_row_sums_equal_gold_histogram(self):
        rng = np.random.default_rng(0)
        labels = list("ABCDEF")
        gold = [labels[i] for i in rng.integers(0, 6, size=1000)]
        pred = [labels[i] for i in rng.integers(0, 6, size=1000)]
        cm = confusion(gold, pred, labels)
        hist = {l: gold.count(l) for l in labels}
        assert cm.sum(axis=1).tolist() == [hist[l] for l in labels]


class TestClassificationMetrics:
    def test_perfect(self):
        cm = confusion(["A", "B", "A"], ["A", "B", "A"], ["A", "B"])
        scores = classification_metrics(cm)
        assert (scores.accuracy, scores.weighted_f1, scores.macro_f1) == (1.0, 1.0, 1.0)

    def test_hand_derived_example(self):
        # gold [A,A,A,B], pred [A,A,B,B]:
        #   A: P=1, R=2/3, F1=0.8; B: P=1/2, R=1, F1=2/3
        cm = confusion(list("AAAB"), list("AABB"), ["A", "B"])
        scores = classification_metrics(cm)
        assert scores.accuracy == pytest.approx(0.75, abs=1e-15)
        assert scores.macro_f1 == pytest.approx((0.8 + 2 / 3) / 2, abs=1e-12)
        assert scores.weighted_f1 == pytest.approx((3 * 0.8 + 1 * (2 / 3)) / 4, abs=1e-12)

    def test_zero_support_class_counts_in_macro_not_weighted(self):
        # class C never gold and never predicted among 3 declared labels
        cm = confusion(list("AAB"), list("AAB"), ["A", "B", "C"])
        scores = classification_metrics(cm)
        assert scores.macro_f1 == pytest.approx((1.0 + 1.0 + 0.0) / 3)
        assert scores.weighted_f1 == pytest.approx(1.0)

    def test_zero_total_rejected(self):
        with pytest.raises(MetricsError, match="zero total"):
            classification_metrics(np.zeros((2, 2), dtype=int))

    def test_matches_sklearn_on_random_data(self):
        # independent implementation check
        from sklearn.metrics import f1_score

        rng = np.random.default_rng(7)
        labels = list("ABCDEF")
        for trial in range(20):
            gold = [labels[i] for i in rng.integers(0, 6, size=200)]
            pred = [labels[i] for i in rng.integers(0, 6, size=200)]
            cm = confusion(gold, pred, labels)
            scores = classification_metrics(cm)
            assert scores.macro_f1 == pytest.approx(
                f1_score(gold, pred, labels=labels, average="macro", zero_division=0)
            )
            assert scores.weighted_f1 == pytest.approx(
                f1_score(gold, pred, labels=labels, average="weighted", zero_division=0)
            )

    @given(st.lists(st.tuples(st.sampled_from("AB"), st.sampled_from("AB")), min_size=1))
    @settings(max_examples=100, deadline=None)
    def test_permutation_invariance(self, pairs):
        gold = [g for g, _ in pairs]
        pred = [p for _, p in pairs]
        base = classification_metrics(confusion(gold, pred, ["A", "B"]))
        rng = np.random.default_rng(1)
        order = rng.permutation(len(pairs))
        shuffled = classification_metrics(
            confusion([gold[i] for i in order], [pred[i] for i in order], ["A", "B"])
        )
        assert base == shuffled

    @given(st.lists(st.tuples(st.sampled_from("ABC"), st.sampled_from("ABC")), min_size=1))
    @settings(max_examples=100, deadline=None)
    def test_bounds_and_accuracy_identity(self, pairs):
        gold = [g for g, _ in pairs]
        pred = [p for _, p in pairs]
        cm = confusion(gold, pred, ["A", "B", "C"])
        scores = classification_metrics(cm)
        for value in (scores.accuracy, scores.weighted_f1, scores.macro_f1):
            assert 0.0 <= value <= 1.0
        assert scores.accuracy == pytest.approx(accuracy_score(gold, pred))
        # accuracy equals support-weighted recall
        support = cm.sum(axis=1)
        recall = np.where(support > 0, np.diag(cm) / np.maximum(support, 1), 0.0)
        assert scores.accuracy == pytest.approx(
            float((recall * support).sum() / support.sum())
        )

    def test_balanced_symmetric_binary_macro_equals_weighted(self):
        gold = list("AABB")
        pred = list("ABBA")  # symmetric confusion, balanced gold
        scores = classification_metrics(confusion(gold, pred, ["A", "B"]))
        assert scores.macro_f1 == pytest.approx(scores.weighted_f1)
