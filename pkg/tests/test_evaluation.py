"""Metric correctness against a brute-force oracle, and LOSO fold laws."""

import numpy as np
import pytest

from aualign.errors import ContractError
from aualign.evaluation import (
    AGG_AVERAGED,
    AGG_POOLED,
    ConfusionMatrix,
    aggregate_reports,
    cm_csv,
    compute_metrics,
    confusion,
    loso_folds,
    report_lines,
)


def brute_force_metrics(preds, labels, num_classes):
    """Per-sample counting, no confusion matrix: the independent oracle."""
    preds = list(preds)
    labels = list(labels)
    f1s, recalls = [], []
    correct = sum(p == t for p, t in zip(preds, labels))
    for c in range(num_classes):
        tp = sum(1 for p, t in zip(preds, labels) if p == c and t == c)
        fp = sum(1 for p, t in zip(preds, labels) if p == c and t != c)
        fn = sum(1 for p, t in zip(preds, labels) if p != c and t == c)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1s.append(2 * precision * recall / (precision + recall) if precision + recall else 0.0)
        recalls.append(recall)
    return (
        sum(f1s) / num_classes,
        sum(recalls) / num_classes,
        correct / len(preds),
    )


class TestConfusion:
    def test_perfect_prediction_is_diagonal(self):
        cm = confusion([0, 1, 2, 1], [0, 1, 2, 1], 3)
        assert np.trace(cm.counts) == 4
        assert cm.counts.sum() == 4

    def test_empty_inputs_zero_matrix(self):
        cm = confusion([], [], 3)
        assert cm.counts.sum() == 0

    def test_hand_tabulated_example(self):
        cm = confusion([0, 1, 0, 2, 2], [0, 1, 1, 2, 2], 3)
        assert cm.counts[1][0] == 1
        assert np.diag(cm.counts).tolist() == [1, 1, 2]

    def test_out_of_range_rejected(self):
        with pytest.raises(ContractError):
            confusion([0, 3], [0, 1], 3)
        with pytest.raises(ContractError):
            confusion([0, -1], [0, 1], 3)

    def test_length_mismatch(self):
        with pytest.raises(ContractError):
            confusion([0, 1], [0], 2)


class TestMetrics:
    def test_perfect_diagonal(self):
        rep = compute_metrics(confusion([0, 1, 2], [0, 1, 2], 3))
        assert rep.uf1 == rep.uar == rep.acc == 1.0

    def test_worked_example(self):
        cm = ConfusionMatrix(np.array([[2, 0, 0], [1, 1, 0], [0, 0, 2]]))
        rep = compute_metrics(cm)
        assert rep.uar == pytest.approx(0.833333, abs=1e-6)
        assert rep.uf1 == pytest.approx(0.822222, abs=1e-6)
        assert rep.acc == pytest.approx(5 / 6, abs=1e-12)
        assert [s.recall for s in rep.per_class] == pytest.approx([1.0, 0.5, 1.0])
        assert [s.precision for s in rep.per_class] == pytest.approx([2 / 3, 1.0, 1.0])

    def test_single_class_all_correct(self):
        rep = compute_metrics(confusion([0, 0, 0], [0, 0, 0], 1))
        assert rep.uf1 == rep.uar == rep.acc == 1.0

    def test_empty_matrix_rejected(self):
        with pytest.raises(ContractError):
            compute_metrics(ConfusionMatrix(np.zeros((3, 3), dtype=int)))

    def test_absent_class_contributes_zero(self):
        # class 2 never appears and is never predicted
        rep = compute_metrics(confusion([0, 1], [0, 1], 3))
        assert rep.per_class[2].f1 == 0.0
        assert rep.per_class[2].recall == 0.0
        assert rep.uf1 == pytest.approx(2 / 3)

    def test_oracle_equivalence_randomized(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            c = int(rng.integers(2, 8))
            n = int(rng.integers(1, 60))
            labels = rng.integers(0, c, n)
            preds = rng.integers(0, c, n)
            rep = compute_metrics(confusion(preds, labels, c))
            uf1, uar, acc = brute_force_metrics(preds, labels, c)
            assert abs(rep.uf1 - uf1) <= 1e-12
            assert abs(rep.uar - uar) <= 1e-12
            assert abs(rep.acc - acc) <= 1e-12

    def test_relabeling_invariance(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            c = int(rng.integers(2, 6))
            n = int(rng.integers(5, 40))
            labels = rng.integers(0, c, n)
            preds = rng.integers(0, c, n)
            perm = rng.permutation(c)
            base = compute_metrics(confusion(preds, labels, c))
            mapped = compute_metrics(confusion(perm[preds], perm[labels], c))
            assert mapped.uf1 == pytest.approx(base.uf1, abs=1e-12)
            assert mapped.uar == pytest.approx(base.uar, abs=1e-12)
            assert mapped.acc == pytest.approx(base.acc, abs=1e-12)

    def test_metrics_in_unit_interval(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            c = int(rng.integers(2, 7))
            labels = rng.integers(0, c, 30)
            preds = rng.integers(0, c, 30)
            rep = compute_metrics(confusion(preds, labels, c))
            assert 0.0 <= rep.uf1 <= 1.0 and 0.0 <= rep.uar <= 1.0 and 0.0 <= rep.acc <= 1.0


class TestLoso:
    def test_basic_folds(self):
        folds = loso_folds(["a", "a", "b", "c"]).folds
        assert [f[0] for f in folds] == ["a", "b", "c"]
        assert folds[0][2] == (0, 1)
        assert folds[0][1] == (2, 3)

    def test_single_subject_single_fold(self):
        folds = loso_folds(["only", "only"]).folds
        assert len(folds) == 1
        assert folds[0][1] == ()  # degenerate: empty training set

    def test_partition_and_no_leakage_randomized(self):
        rng = np.random.default_rng(3)
        for _ in range(1000):
            n = int(rng.integers(1, 40))
            subjects = [f"s{rng.integers(0, 8)}" for _ in range(n)]
            folds = loso_folds(subjects).folds
            all_test = [i for _, _, test in folds for i in test]
            assert sorted(all_test) == list(range(n))
            for subject, train, test in folds:
                train_subj = {subjects[i] for i in train}
                test_subj = {subjects[i] for i in test}
                assert test_subj == {subject}
                assert subject not in train_subj
                assert set(train) | set(test) == set(range(n))
                assert not set(train) & set(test)

    def test_empty_rejected(self):
        with pytest.raises(ContractError):
            loso_folds([])


class TestAggregation:
    def test_pooled_merges_counts(self):
        r1 = compute_metrics(confusion([0, 1], [0, 0], 2), fold_id="a")
        r2 = compute_metrics(confusion([1, 1], [1, 0], 2), fold_id="b")
        pooled = aggregate_reports([r1, r2], AGG_POOLED)
        assert pooled.cm.total == 4
        direct = compute_metrics(confusion([0, 1, 1, 1], [0, 0, 1, 0], 2))
        assert pooled.uf1 == pytest.approx(direct.uf1)

    def test_averaged_means_fold_metrics(self):
        r1 = compute_metrics(confusion([0, 1], [0, 1], 2), fold_id="a")
        r2 = compute_metrics(confusion([1, 0], [0, 1], 2), fold_id="b")
        avg = aggregate_reports([r1, r2], AGG_AVERAGED)
        assert avg.uf1 == pytest.approx((r1.uf1 + r2.uf1) / 2)
        assert avg.acc == pytest.approx(0.5)

    def test_mismatched_classes_rejected(self):
        r1 = compute_metrics(confusion([0], [0], 2))
        r2 = compute_metrics(confusion([0], [0], 3))
        with pytest.raises(ContractError):
            aggregate_reports([r1, r2])


class TestExportFormats:
    def test_cm_csv(self):
        cm = ConfusionMatrix(np.array([[2, 0], [1, 3]]))
        assert cm_csv(cm) == "2,0\n1,3\n"

    def test_report_lines_contains_metrics(self):
        rep = compute_metrics(confusion([0, 1], [0, 1], 2), fold_id="s00")
        text = report_lines(rep)
        assert "fold\ts00" in text
        assert "uf1\t1.0" in text
        assert "class0" in text and "class1" in text
