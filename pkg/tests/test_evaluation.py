from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lidarclf import evaluation as ev
from lidarclf.classifiers import KnnClassifier
from lidarclf.errors import EmptyMatrix, FoldError


def random_cm(rng, n_classes, max_total=1000):
    cm = rng.integers(0, max_total // (n_classes * n_classes) + 1,
                      size=(n_classes, n_classes))
    if cm.sum() == 0:
        cm[0, 0] = 1
    return cm.astype(np.int64)


class TestFoldPlan:
    def test_even_folds(self):
        plan = ev.kfold_plan(np.zeros(10, dtype=int), n_folds=5, stratified=False)
        sizes = np.bincount(plan.assignments, minlength=5)
        assert list(sizes) == [2, 2, 2, 2, 2]

    def test_remainder_folds(self):
        plan = ev.kfold_plan(np.zeros(11, dtype=int), n_folds=5, stratified=False)
        sizes = sorted(np.bincount(plan.assignments, minlength=5))
        assert sizes == [2, 2, 2, 2, 3]

    def test_stratified_balanced_classes(self):
        labels = np.array([0] * 6 + [1] * 6)
        plan = ev.kfold_plan(labels, n_folds=3, stratified=True)
        for fold in range(3):
            mask = plan.test_mask(fold)
            assert (labels[mask] == 0).sum() == 2
            assert (labels[mask] == 1).sum() == 2

    def test_stratified_fallback_warns(self):
        labels = np.array([0] * 20 + [1] * 2)
        with pytest.warns(RuntimeWarning, match="fewer than"):
            plan = ev.kfold_plan(labels, n_folds=5, stratified=True)
        assert not plan.stratified

    def test_deterministic_per_seed(self):
        labels = np.arange(40) % 4
        a = ev.kfold_plan(labels, n_folds=5, seed=3)
        b = ev.kfold_plan(labels, n_folds=5, seed=3)
        c = ev.kfold_plan(labels, n_folds=5, seed=4)
        assert np.array_equal(a.assignments, b.assignments)
        assert not np.array_equal(a.assignments, c.assignments)

    def test_validation(self):
        with pytest.raises(ValueError):
            ev.kfold_plan(np.zeros(10, dtype=int), n_folds=1)
        with pytest.raises(ValueError):
            ev.kfold_plan(np.zeros(3, dtype=int), n_folds=5)

    @given(s=st.integers(10, 300), k=st.integers(2, 8),
           n_classes=st.integers(1, 5), stratified=st.booleans(),
           seed=st.integers(0, 10_000))
    @settings(max_examples=80, deadline=None)
    def test_partition_properties(self, s, k, n_classes, stratified, seed):
        if k > s:
            return
        rng = np.random.default_rng(seed)
        labels = rng.integers(0, n_classes, s)
        with np.testing.suppress_warnings() as sup:
            sup.filter(RuntimeWarning)  # thin classes fall back with a warning
            plan = ev.kfold_plan(labels, n_folds=k, seed=seed,
                                 stratified=stratified)
        sizes = np.bincount(plan.assignments, minlength=k)
        assert sizes.sum() == s
        assert (plan.assignments >= 0).all() and (plan.assignments < k).all()
        assert sizes.max() - sizes.min() <= 1
        assert (sizes > 0).all()
        if plan.stratified:
            for c in np.unique(labels):
                per_fold = np.bincount(plan.assignments[labels == c], minlength=k)
                assert per_fold.max() - per_fold.min() <= 1


class TestMicroMetrics:
    def test_diagonal_is_perfect(self):
        cm = np.diag([3, 4, 5])
        assert ev.micro_precision(cm) == 1.0
        assert ev.micro_recall(cm) == 1.0
        assert ev.f1_micro(cm) == 1.0
        assert ev.accuracy(cm) == 1.0
        assert ev.error_rate(cm) == 0.0

    def test_counted_example(self):
        cm = np.array([[1, 1], [0, 2]])
        assert ev.micro_precision(cm) == 0.75
        assert ev.micro_recall(cm) == 0.75
        assert ev.f1_micro(cm) == 0.75
        assert ev.accuracy(cm) == 0.75
        assert ev.error_rate(cm) == 0.25

    def test_all_wrong_flags_zero(self):
        cm = np.array([[0, 5], [7, 0]])
        with pytest.warns(RuntimeWarning, match="no true positives"):
            assert ev.f1_micro(cm) == 0.0

    def test_empty_matrix(self):
        with pytest.raises(EmptyMatrix):
            ev.accuracy(np.zeros((3, 3), dtype=np.int64))

    def test_accuracy_plus_error_is_one(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            cm = random_cm(rng, 4)
            assert ev.accuracy(cm) + ev.error_rate(cm) == 1.0

    @given(seed=st.integers(0, 10_000), n_classes=st.integers(2, 10))
    @settings(max_examples=120, deadline=None)
    def test_micro_identity(self, seed, n_classes):
        rng = np.random.default_rng(seed)
        cm = random_cm(rng, n_classes)
        tp = int(np.trace(cm))
        total = int(cm.sum())
        # Exact rational identity on counts.
        assert Fraction(tp, total) == Fraction(2 * tp, 2 * total)
        if tp:
            acc = ev.accuracy(cm)
            assert ev.micro_precision(cm) == acc
            assert ev.micro_recall(cm) == acc
            assert ev.f1_micro(cm) == acc


class TestCvSummary:
    def test_paper_style_cell_format(self):
        summary = ev.CvSummary(fold_scores=(0.87,), mean=0.8701,
                               two_sigma=0.0007)
        assert summary.format_cell() == "0.8701 (+/- 0.0007)"

    def test_from_scores_population_std(self):
        summary = ev.CvSummary.from_scores([0.5, 0.7])
        assert summary.mean == pytest.approx(0.6)
        assert summary.two_sigma == pytest.approx(0.2)  # 2 * population std


class _ConstantPipeline:
    def fit(self, X, y):
        return self

    def predict(self, Q):
        return np.zeros(len(Q), dtype=np.int64)


class TestCrossValidate:
    def test_constant_prediction_on_balanced_data(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(40, 2))
        y = np.array([0, 1] * 20)
        plan = ev.kfold_plan(y, n_folds=4, stratified=True)
        result = ev.cross_validate(lambda: _ConstantPipeline(), X, y, plan)
        assert result.summary.fold_scores == (0.5, 0.5, 0.5, 0.5)
        assert result.summary.two_sigma == 0.0

    def test_memorizer_scores_one(self):
        rng = np.random.default_rng(2)
        K = 4
        base = rng.normal(size=(12, 3))
        labels = rng.integers(0, 3, 12)
        X = np.repeat(base, K, axis=0)             # every row in every fold
        y = np.repeat(labels, K)
        plan = ev.FoldPlan(n_folds=K, assignments=np.tile(np.arange(K), 12),
                           seed=0, stratified=False)
        result = ev.cross_validate(lambda: KnnClassifier(k_vote=1), X, y, plan)
        assert result.summary.fold_scores == (1.0,) * K

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(60, 3))
        y = rng.integers(0, 2, 60)
        plan = ev.kfold_plan(y, n_folds=5, seed=8)
        r1 = ev.cross_validate(lambda: KnnClassifier(k_vote=3), X, y, plan)
        r2 = ev.cross_validate(lambda: KnnClassifier(k_vote=3), X, y, plan)
        assert r1.summary.fold_scores == r2.summary.fold_scores

    def test_pooled_matrix_sums_folds(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(50, 2))
        y = rng.integers(0, 2, 50)
        plan = ev.kfold_plan(y, n_folds=5, seed=0)
        result = ev.cross_validate(lambda: KnnClassifier(k_vote=1), X, y, plan)
        assert int(result.pooled_matrix.sum()) == 50
        assert np.array_equal(result.pooled_matrix,
                              np.sum(result.fold_matrices, axis=0))

    def test_fold_error_annotated(self):
        class Exploding:
            def fit(self, X, y):
                raise RuntimeError("boom")

            def predict(self, Q):
                raise AssertionError

        y = np.array([0, 1] * 10)
        plan = ev.kfold_plan(y, n_folds=2, seed=0)
        with pytest.raises(FoldError, match="fold 0: boom"):
            ev.cross_validate(lambda: Exploding(), np.zeros((20, 1)), y, plan)


class TestLeakageSentinel:
    def test_training_stats_ignore_held_out_outliers(self):
        from lidarclf.pipeline import ClassificationPipeline
        from lidarclf.classifiers import KnnClassifier as Knn

        rng = np.random.default_rng(5)
        X = rng.normal(size=(60, 3))
        y = rng.integers(0, 2, 60)
        plan = ev.kfold_plan(y, n_folds=3, seed=1, stratified=False)
        outlier_fold = 2
        X = X.copy()
        X[plan.test_mask(outlier_fold)] *= 1e6  # plant a huge scale

        fitted = []

        def factory():
            pipe = ClassificationPipeline(None, Knn(k_vote=1))
            fitted.append(pipe)
            return pipe

        ev.cross_validate(factory, X, y, plan)
        # When the outlier fold is held out, the training statistics must
        # look like clean unit-scale data.
        stats = fitted[outlier_fold].stats
        assert np.abs(stats.mean).max() < 10.0
        assert stats.std.max() < 10.0
        # Folds trained WITH the outliers see the planted scale.
        other = fitted[(outlier_fold + 1) % 3].stats
        assert other.std.max() > 1e4
