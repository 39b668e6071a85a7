"""Classifier heads: QDA, linear SVM, RBF SVM, and their serialization."""

import numpy as np
import pytest

from fisherprune.classify import (
    evaluate_accuracy, from_arrays, linear_svm_fit, qda_fit, qda_predict,
    rbf_svm_fit, svm_decision, svm_objective, svm_predict, to_arrays,
)
from fisherprune.errors import ConfigurationError, DimensionError

import oracles


def blobs(n=30, gap=6.0, seed=0):
    rng = np.random.default_rng(seed)
    x0 = rng.normal((-gap / 2, 0), 1.0, (n, 2))
    x1 = rng.normal((gap / 2, 0), 1.0, (n, 2))
    x = np.vstack([x0, x1])
    y01 = np.repeat([0, 1], n)
    return x, y01, np.where(y01 == 0, -1, 1)


class TestQda:
    def test_separable_blobs(self):
        x, y01, _ = blobs()
        model = qda_fit(x, y01)
        acc, confusion = evaluate_accuracy(model, x, y01)
        assert acc == 1.0
        np.testing.assert_array_equal(confusion, [[30, 0], [0, 30]])

    def test_scores_match_gaussian_log_posterior(self):
        """Score gap equals the log-density gap computed via inv/slogdet."""
        x, y01, _ = blobs(seed=3)
        model = qda_fit(x, y01, lam=0.0)
        probe = np.array([0.3, -0.7])
        _, scores = qda_predict(model, probe)
        want = []
        for cls in (0, 1):
            rows = x[y01 == cls]
            mu = rows.mean(axis=0)
            cov = np.cov(rows, rowvar=False)
            diff = probe - mu
            _, logdet = np.linalg.slogdet(cov)
            quad = diff @ np.linalg.inv(cov) @ diff
            want.append(np.log(0.5) - 0.5 * logdet - 0.5 * quad)
        assert scores[1] - scores[0] == pytest.approx(want[1] - want[0],
                                                      abs=1e-9)

    def test_prior_breaks_the_tie(self):
        """Same sample cloud for both classes: the bigger prior wins."""
        rng = np.random.default_rng(1)
        base = rng.normal(0, 1, (30, 2))
        x = np.vstack([base, base, base])  # class 0 holds two copies
        y = np.array([0] * 60 + [1] * 30)
        model = qda_fit(x, y)
        pred, scores = qda_predict(model, base.mean(axis=0))
        assert pred == 0
        assert scores[0] > scores[1]

    def test_needs_more_samples_than_dims(self):
        x = np.random.default_rng(0).normal(0, 1, (4, 3))
        y = np.array([0, 0, 1, 1])
        with pytest.raises(DimensionError, match="smaller k"):
            qda_fit(x, y)

    def test_needs_both_classes(self):
        x = np.random.default_rng(0).normal(0, 1, (6, 2))
        with pytest.raises(ConfigurationError, match="absent"):
            qda_fit(x, np.zeros(6))

    def test_negative_lam_rejected(self):
        x, y01, _ = blobs(n=5)
        with pytest.raises(ConfigurationError):
            qda_fit(x, y01, lam=-1.0)


class TestLinearSvm:
    def test_separates_blobs(self):
        x, y01, ypm = blobs()
        model = linear_svm_fit(x, ypm)
        preds = [svm_predict(model, row) for row in x]
        assert preds == ypm.tolist()
        acc, _ = evaluate_accuracy(model, x, y01)
        assert acc == 1.0

    def test_objective_not_far_from_lattice_minimum(self):
        """The fitted primal objective must beat a coarse exhaustive grid."""
        x, _, ypm = blobs(n=8, gap=3.0, seed=5)
        model = linear_svm_fit(x, ypm, c=1.0)
        j_fit = svm_objective(model.w, model.b, x, ypm, c=1.0)
        j_grid = oracles.svm_lattice_search(x, ypm.astype(np.float64), 1.0,
                                            w_range=3.0, b_range=3.0, steps=41)
        assert j_fit <= 1.05 * j_grid

    def test_deterministic(self):
        x, _, ypm = blobs(seed=2)
        a = linear_svm_fit(x, ypm)
        b = linear_svm_fit(x, ypm)
        np.testing.assert_array_equal(a.w, b.w)
        assert a.b == b.b

    def test_labels_must_be_signed_and_complete(self):
        x = np.random.default_rng(0).normal(0, 1, (4, 2))
        with pytest.raises(ConfigurationError):
            linear_svm_fit(x, np.array([0, 1, 0, 1]))
        with pytest.raises(ConfigurationError):
            linear_svm_fit(x, np.array([1, 1, 1, 1]))


class TestRbfSvm:
    def test_solves_xor_exactly(self):
        x = np.array([[1.0, 1.0], [-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]])
        y = np.array([1, 1, -1, -1])
        model = rbf_svm_fit(x, y, c=10.0, gamma=1.0)
        assert [svm_predict(model, row) for row in x] == y.tolist()

    def test_dual_feasibility_on_blobs(self):
        x, _, ypm = blobs(seed=4)
        model = rbf_svm_fit(x, ypm, c=1.0)
        assert model.converged
        assert np.all(model.alpha >= -1e-12)
        assert np.all(model.alpha <= 1.0 + 1e-12)
        # the SMO pair updates preserve sum(alpha_i y_i) = 0 (up to the
        # sub-1e-10 alphas dropped from the support set)
        assert (model.alpha * model.sv_y).sum() == pytest.approx(0.0, abs=1e-8)

    def test_default_gamma_is_one_over_d(self):
        x, _, ypm = blobs(n=6)
        model = rbf_svm_fit(x, ypm)
        assert model.gamma == pytest.approx(0.5)

    def test_pass_budget_exhaustion_warns(self):
        x, _, ypm = blobs(n=40, gap=0.3, seed=9)
        with pytest.warns(RuntimeWarning, match="partial model"):
            model = rbf_svm_fit(x, ypm, c=10.0, max_passes=1)
        assert not model.converged

    def test_refuses_huge_problems(self):
        x = np.zeros((5001, 2))
        y = np.ones(5001)
        y[::2] = -1
        with pytest.raises(DimensionError, match="5000"):
            rbf_svm_fit(x, y)

    def test_no_support_vectors_falls_back_to_bias(self):
        model = from_arrays({
            "kind": "svmr",
            "meta": {"c": 1.0, "b": -0.25, "gamma": 0.5,
                     "iterations": 0, "converged": True},
            "tensors": {"sv_x": np.zeros((0, 2)), "sv_y": np.zeros(0),
                        "alpha": np.zeros(0)},
        })
        assert svm_decision(model, np.array([1.0, 2.0])) == -0.25
        assert svm_predict(model, np.array([1.0, 2.0])) == -1


class TestEvaluation:
    def test_empty_set_rejected(self):
        x, y01, _ = blobs(n=5)
        model = qda_fit(x, y01)
        with pytest.raises(ConfigurationError):
            evaluate_accuracy(model, np.zeros((0, 2)), np.zeros(0))

    def test_confusion_counts_true_by_pred(self):
        x, y01, ypm = blobs(n=10)
        model = linear_svm_fit(x, ypm)
        x_bad = np.vstack([x, [[6.0, 0.0]]])  # class-1 territory
        y_bad = np.append(y01, 0)
        acc, confusion = evaluate_accuracy(model, x_bad, y_bad)
        assert confusion[0, 1] == 1
        assert confusion.sum() == 21
        assert acc == pytest.approx(20 / 21)


class TestSerialization:
    @pytest.mark.parametrize("kind", ["qda", "svml", "svmr"])
    def test_round_trip_preserves_predictions(self, kind):
        x, y01, ypm = blobs(seed=6)
        if kind == "qda":
            model = qda_fit(x, y01)
        elif kind == "svml":
            model = linear_svm_fit(x, ypm)
        else:
            model = rbf_svm_fit(x, ypm, c=1.0)
        section = to_arrays(model)
        assert section["kind"] == kind
        rebuilt = from_arrays(section)
        probes = np.random.default_rng(8).normal(0, 2, (25, 2))
        for row in probes:
            if kind == "qda":
                pred_a, scores_a = qda_predict(rebuilt, row)
                pred_b, scores_b = qda_predict(model, row)
                assert pred_a == pred_b
                np.testing.assert_allclose(scores_a, scores_b, rtol=1e-12)
            else:
                assert svm_decision(rebuilt, row) == pytest.approx(
                    svm_decision(model, row), rel=1e-12)
