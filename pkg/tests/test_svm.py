import math

import numpy as np
import pytest

from caplens.annotators import Property
from caplens.dataset import ClassificationDataset, LabeledImage, kfold
from caplens.embeddings import EmbeddingMatrix
from caplens.errors import CaplensError
from caplens.svm import (
    CvResult,
    SvmConfig,
    TrainingError,
    cross_validate,
    decision_values,
    gamma_scale,
    load_model,
    predict,
    rbf,
    save_model,
    train,
)

from qp_reference import rbf_kernel_matrix, solve_dual_qp


class TestGammaScale:
    def test_formula_forced_example(self):
        X = np.array([[0.0, 0.0], [2.0, 2.0]])
        assert gamma_scale(X) == pytest.approx(0.5)

    def test_constant_matrix_errors(self):
        with pytest.raises(TrainingError):
            gamma_scale(np.ones((3, 3)))

    def test_matches_two_pass_oracle(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(100, 8))
        # independent two-pass variance computation
        mean = X.sum() / X.size
        var = ((X - mean) ** 2).sum() / X.size
        assert gamma_scale(X) == pytest.approx(1.0 / (8 * var), abs=1e-10)


class TestRbf:
    def test_identity(self):
        rng = np.random.default_rng(1)
        for _ in range(5):
            x = rng.normal(size=6)
            assert rbf(x, x, 0.7) == pytest.approx(1.0)

    def test_closed_form(self):
        assert rbf(np.array([0.0, 0.0]), np.array([1.0, 0.0]), 1.0) == pytest.approx(
            math.exp(-1.0)
        )

    def test_symmetry(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            x, y = rng.normal(size=(2, 4))
            assert rbf(x, y, 0.3) == pytest.approx(rbf(y, x, 0.3))

    def test_dim_mismatch(self):
        with pytest.raises(TrainingError):
            rbf(np.zeros(3), np.zeros(4), 1.0)


def two_clusters(n=20, seed=0):
    rng = np.random.default_rng(seed)
    half = n // 2
    X = np.vstack(
        [
            rng.normal(0, 0.1, size=(half, 2)) + np.array([5.0, 0.0]),
            rng.normal(0, 0.1, size=(n - half, 2)) + np.array([-5.0, 0.0]),
        ]
    )
    y = np.array([1.0] * half + [-1.0] * (n - half))
    return X, y


class TestTrain:
    def test_two_clusters_training_accuracy(self):
        X, y = two_clusters()
        model = train(X, y, SvmConfig())
        values = decision_values(model, X)
        assert ((values > 0) == (y > 0)).all()

    def test_xor_with_rbf(self):
        X = np.array([[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]])
        y = np.array([1.0, 1.0, -1.0, -1.0])
        model = train(X, y, SvmConfig(C=10.0, gamma=1.0))
        values = decision_values(model, X)
        assert ((values > 0) == (y > 0)).all()

    def test_single_class_rejected(self):
        X = np.zeros((4, 2))
        with pytest.raises(TrainingError, match="single class"):
            train(X, np.ones(4), SvmConfig(gamma=1.0))

    def test_non_finite_rejected(self):
        X = np.array([[0.0, np.inf], [1.0, 1.0]])
        with pytest.raises(TrainingError, match="finite"):
            train(X, np.array([1.0, -1.0]), SvmConfig(gamma=1.0))

    def test_max_passes_warning(self):
        X, y = two_clusters(30, seed=5)
        with pytest.warns(RuntimeWarning, match="max_passes"):
            model = train(X, y, SvmConfig(max_passes=2))
        assert not model.converged

    def test_deterministic(self):
        X, y = two_clusters(40, seed=7)
        one = train(X, y, SvmConfig())
        two = train(X, y, SvmConfig())
        np.testing.assert_array_equal(one.dual_coef, two.dual_coef)
        assert one.bias == two.bias


class TestDualFeasibility:
    @pytest.mark.parametrize("seed", range(6))
    def test_alpha_in_box_and_balance(self, seed):
        rng = np.random.default_rng(seed)
        n = rng.integers(10, 40)
        X = rng.normal(size=(n, 4))
        y = np.where(rng.random(n) > 0.5, 1.0, -1.0)
        if abs(y.sum()) == n:
            y[0] = -y[0]
        C = 1.0
        model = train(X, y, SvmConfig(C=C))
        alpha = np.abs(model.dual_coef)
        assert (alpha >= 0).all() and (alpha <= C + 1e-12).all()
        assert abs(model.dual_coef.sum()) <= 1e-6 * C * n


class TestOracleEquivalence:
    @pytest.mark.parametrize("seed", range(8))
    def test_smo_matches_projected_gradient(self, seed):
        rng = np.random.default_rng(100 + seed)
        n = int(rng.integers(8, 50))
        d = int(rng.integers(2, 8))
        X = rng.normal(size=(n, d))
        y = np.where(rng.random(n) > 0.5, 1.0, -1.0)
        if abs(y.sum()) == n:
            y[0] = -y[0]
        C = float(rng.choice([0.5, 1.0, 10.0]))
        gamma = gamma_scale(X)
        model = train(X, y, SvmConfig(C=C, gamma=gamma, tolerance=1e-4))
        _, reference = solve_dual_qp(rbf_kernel_matrix(X, gamma), y, C)
        assert model.objective == pytest.approx(
            reference, rel=1e-3, abs=1e-6 * max(1.0, abs(reference))
        )


class TestPredict:
    def test_support_vector_gets_own_label(self):
        X, y = two_clusters()
        model = train(X, y)
        for i in range(len(X)):
            label, value = predict(model, X[i])
            if abs(value) > 1e-3:
                assert label == (y[i] > 0)

    def test_antisymmetric_under_label_flip(self):
        X, y = two_clusters(24, seed=9)
        m_pos = train(X, y, SvmConfig(gamma=0.5))
        m_neg = train(X, -y, SvmConfig(gamma=0.5))
        v_pos = decision_values(m_pos, X)
        v_neg = decision_values(m_neg, X)
        np.testing.assert_allclose(v_pos, -v_neg, atol=1e-6)

    def test_translation_invariance(self):
        # RBF depends on differences only, so retraining on translated data
        # gives the same decision function. Tight tolerance pins both runs
        # to the (unique) dual optimum; the default 1e-3 stop would leave
        # path-dependent slack far above the 1e-8 comparison.
        X, y = two_clusters(20, seed=11)
        shift = np.array([123.0, -45.0])
        config = SvmConfig(gamma=0.7, tolerance=1e-10)
        m1 = train(X, y, config)
        m2 = train(X + shift, y, config)
        v1 = decision_values(m1, X)
        v2 = decision_values(m2, X + shift)
        np.testing.assert_allclose(v1, v2, atol=1e-8)

    def test_dim_mismatch(self):
        X, y = two_clusters()
        model = train(X, y)
        with pytest.raises(TrainingError, match="dimension"):
            predict(model, np.zeros(5))

    def test_zero_support_guard(self):
        X, y = two_clusters()
        model = train(X, y)
        model.support_vectors = model.support_vectors[:0]
        model.dual_coef = model.dual_coef[:0]
        with pytest.raises(TrainingError, match="support"):
            predict(model, X[0])


def separable_setup(n=60, seed=0):
    rng = np.random.default_rng(seed)
    half = n // 2
    X = np.vstack(
        [
            rng.normal(0, 0.3, size=(half, 3)) + np.array([3.0, 0.0, 0.0]),
            rng.normal(0, 0.3, size=(n - half, 3)) - np.array([3.0, 0.0, 0.0]),
        ]
    ).astype(np.float32)
    ids = [f"img{i:03d}" for i in range(n)]
    items = tuple(
        LabeledImage(ids[i], i < half, 1.0 if i < half else 0.0) for i in range(n)
    )
    dataset = ClassificationDataset(Property.NUM, "all", 0.5, items, seed)
    matrix = EmbeddingMatrix(ids=ids, rows=X, pretraining_tag="none")
    return dataset, matrix


class TestCrossValidate:
    def test_separable_high_accuracy(self):
        dataset, matrix = separable_setup()
        folds = kfold(dataset, 5, seed=1)
        result = cross_validate(dataset, folds, matrix)
        assert result.mean >= 95.0
        assert len(result.fold_accuracies) == 5
        assert result.pretraining_tag == "none"

    def test_missing_embedding_named(self):
        dataset, matrix = separable_setup(20)
        matrix.ids[3] = "ghost"
        folds = kfold(dataset, 5, seed=1)
        with pytest.raises(CaplensError, match="img003"):
            cross_validate(dataset, folds, matrix)

    def test_shuffled_labels_chance_level(self):
        rng = np.random.default_rng(42)
        n = 200
        X = rng.normal(size=(n, 8)).astype(np.float32)
        labels = np.array([True] * (n // 2) + [False] * (n // 2))
        rng.shuffle(labels)  # labels independent of features
        ids = [f"i{k:03d}" for k in range(n)]
        items = tuple(
            LabeledImage(ids[k], bool(labels[k]), float(labels[k])) for k in range(n)
        )
        # rebalance exactly
        dataset = ClassificationDataset(Property.NUM, "all", 0.5, items, 0)
        folds = kfold(dataset, 5, seed=7)
        result = cross_validate(dataset, folds, matrix=EmbeddingMatrix(
            ids=ids, rows=X, pretraining_tag="none"))
        assert 45.0 <= result.mean <= 55.0

    def test_mean_and_std(self):
        result = CvResult(Property.NUM, "all", "moco", [70.0, 72.0, 74.0, 76.0, 78.0])
        assert result.mean == pytest.approx(74.0)
        assert result.std == pytest.approx(np.std([70, 72, 74, 76, 78]))

    def test_subsample_cap_deterministic(self):
        dataset, matrix = separable_setup(80)
        folds = kfold(dataset, 5, seed=1)
        capped = cross_validate(dataset, folds, matrix, subsample=20,
                                subsample_seed=3)
        again = cross_validate(dataset, folds, matrix, subsample=20,
                               subsample_seed=3)
        assert capped.fold_accuracies == again.fold_accuracies
        assert capped.mean >= 95.0  # separable even on 20 training rows

    def test_parallel_folds_match_sequential(self):
        dataset, matrix = separable_setup(40)
        folds = kfold(dataset, 5, seed=2)
        seq = cross_validate(dataset, folds, matrix, jobs=1)
        par = cross_validate(dataset, folds, matrix, jobs=2)
        assert seq.fold_accuracies == par.fold_accuracies


class TestSerialization:
    def test_round_trip(self, tmp_path):
        X, y = two_clusters(16, seed=13)
        model = train(X, y)
        path = tmp_path / "m.csvm"
        save_model(model, path)
        back = load_model(path)
        np.testing.assert_array_equal(back.support_vectors, model.support_vectors)
        np.testing.assert_array_equal(back.dual_coef, model.dual_coef)
        assert back.bias == model.bias and back.gamma == model.gamma
        np.testing.assert_allclose(
            decision_values(back, X), decision_values(model, X), atol=0
        )

    def test_rejects_garbage(self, tmp_path):
        path = tmp_path / "bad.csvm"
        path.write_bytes(b"garbage bytes here")
        with pytest.raises(CaplensError):
            load_model(path)
