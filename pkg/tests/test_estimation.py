import math
from fractions import Fraction

import numpy as np
import pytest

from csps.contrasts import Contrast
from csps.data import Dataset, build_cell_index
from csps.errors import (
    DimensionMismatch,
    MissingClass,
    OneClassOnly,
    SeparationDetected,
    ZeroDenominator,
)
from csps.estimation import (
    ScoreVector,
    bernoulli_gradient,
    bernoulli_log_likelihood,
    csps_from_treatment_probs,
    empirical_csps,
    fit_binary_logistic,
    fit_multinomial_logistic,
    model_csps,
    predict_binary,
    predict_multinomial,
)
from csps.example_data import FIRST_CONTRAST, SECOND_CONTRAST
from csps.simulation import SimulationConfig, mechanism_ii, sample_dataset

# ---------------------------------------------------------------------------
# fixed 8-point single-feature fitting problem with overlapping classes

POINTS_X = np.array([-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0])
POINTS_Y = np.array([0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0])

# maximiser found by the plain gradient-ascent oracle below (gradient norm
# driven under 1e-13); frozen so any drift in either route is caught
ORACLE_INTERCEPT = -0.1771076215281622
ORACLE_SLOPE = 0.84816504460281017


def gradient_ascent_oracle(x, y, grad_tol=1e-13, max_steps=2_000_000):
    """Fixed-step gradient ascent; independent of the Newton code path."""
    design = np.column_stack([np.ones(len(x)), x])
    lipschitz = np.linalg.eigvalsh(design.T @ design / 4.0).max()
    step = 1.0 / lipschitz
    w = np.zeros(2)
    for _ in range(max_steps):
        p = 1.0 / (1.0 + np.exp(-(design @ w)))
        g = design.T @ (y - p)
        if np.linalg.norm(g) < grad_tol:
            break
        w = w + step * g
    return w


class TestBinaryFit:
    def test_intercept_only_logit_of_mean(self):
        model = fit_binary_logistic(np.empty((4, 0)), [1, 1, 1, 0])
        assert model.converged
        assert model.coefficients[0] == pytest.approx(math.log(3.0), abs=1e-9)

    def test_matches_gradient_ascent_oracle(self):
        oracle = gradient_ascent_oracle(POINTS_X, POINTS_Y)
        assert oracle[0] == pytest.approx(ORACLE_INTERCEPT, abs=1e-9)
        assert oracle[1] == pytest.approx(ORACLE_SLOPE, abs=1e-9)
        model = fit_binary_logistic(POINTS_X, POINTS_Y)
        assert model.converged
        assert np.allclose(model.coefficients, oracle, atol=1e-6)

    def test_one_class_only(self):
        with pytest.raises(OneClassOnly):
            fit_binary_logistic(POINTS_X, np.ones(8))

    def test_converged_gradient_norm_below_tol(self, rng):
        X = rng.normal(size=(200, 3))
        y = rng.random(200) < 0.5
        model = fit_binary_logistic(X, y)
        assert model.converged
        assert model.final_gradient_norm < 1e-8

    def test_log_likelihood_nondecreasing(self, rng):
        X = rng.normal(size=(150, 2))
        z = X @ np.array([1.5, -2.0])
        y = rng.random(150) < 1.0 / (1.0 + np.exp(-z))
        model = fit_binary_logistic(X, y)
        path = np.array(model.log_likelihood_path)
        # non-decreasing up to the float resolution of the total likelihood
        slack = 16 * np.finfo(float).eps * (1.0 + np.abs(path).max())
        assert (np.diff(path) >= -slack).all()

    def test_separation_detected(self, rng):
        x = np.concatenate([rng.uniform(0.1, 2.0, 40), rng.uniform(-2.0, -0.1, 40)])
        y = x > 0
        with pytest.raises(SeparationDetected):
            fit_binary_logistic(x, y)

    def test_ridge_rescues_separation(self, rng):
        x = np.concatenate([rng.uniform(0.1, 2.0, 40), rng.uniform(-2.0, -0.1, 40)])
        model = fit_binary_logistic(x, x > 0, ridge=1e-4)
        assert model.converged

    def test_gradient_matches_finite_differences(self):
        # generic point and the fitted optimum, central differences, step 1e-6
        model = fit_binary_logistic(POINTS_X, POINTS_Y)
        for w in (np.array([0.3, -0.7]), model.coefficients):
            analytic = bernoulli_gradient(POINTS_X, POINTS_Y, w)
            for j in range(2):
                e = np.zeros(2)
                e[j] = 1e-6
                fd = (
                    bernoulli_log_likelihood(POINTS_X, POINTS_Y, w + e)
                    - bernoulli_log_likelihood(POINTS_X, POINTS_Y, w - e)
                ) / 2e-6
                assert analytic[j] == pytest.approx(fd, abs=1e-4)

    def test_permutation_invariant(self, rng):
        X = rng.normal(size=(120, 2))
        y = rng.random(120) < 0.4
        base = fit_binary_logistic(X, y)
        perm = rng.permutation(120)
        shuffled = fit_binary_logistic(X[perm], y[perm])
        assert np.array_equal(base.coefficients, shuffled.coefficients)

    def test_standardize_matches_raw_fit(self, rng):
        X = rng.normal(size=(300, 2)) * np.array([5.0, 0.2]) + np.array([10.0, -3.0])
        z = (X - X.mean(0)) @ np.array([0.3, -2.0])
        y = rng.random(300) < 1.0 / (1.0 + np.exp(-z))
        raw = fit_binary_logistic(X, y)
        std = fit_binary_logistic(X, y, standardize=True)
        assert np.allclose(raw.coefficients, std.coefficients, atol=1e-7)


class TestPredictBinary:
    def test_zero_coefficients_give_half(self):
        model = fit_binary_logistic(POINTS_X, POINTS_Y, max_iter=0)
        assert predict_binary(model, [123.0]) == 0.5

    def test_intercept_log3(self):
        model = fit_binary_logistic(np.empty((4, 0)), [1, 1, 1, 0])
        assert predict_binary(model, []) == pytest.approx(0.75, abs=1e-9)

    def test_matches_oracle_predictions(self):
        oracle = gradient_ascent_oracle(POINTS_X, POINTS_Y)
        model = fit_binary_logistic(POINTS_X, POINTS_Y)
        for x in POINTS_X:
            want = 1.0 / (1.0 + np.exp(-(oracle[0] + oracle[1] * x)))
            assert predict_binary(model, [x]) == pytest.approx(want, abs=1e-6)

    def test_dimension_mismatch(self):
        model = fit_binary_logistic(POINTS_X, POINTS_Y)
        with pytest.raises(DimensionMismatch):
            predict_binary(model, [1.0, 2.0])


class TestMultinomialFit:
    def test_two_classes_reduce_to_binary(self, rng):
        X = rng.normal(size=(200, 2))
        z = 0.5 - X @ np.array([1.0, -0.5])
        labels = 1 + (rng.random(200) < 1.0 / (1.0 + np.exp(-z))).astype(int)
        multi = fit_multinomial_logistic(X, labels, baseline=1)
        binary = fit_binary_logistic(X, labels == 2)
        assert multi.converged and binary.converged
        assert np.allclose(multi.coefficients[1], binary.coefficients, atol=1e-8)
        assert np.array_equal(multi.coefficients[0], np.zeros(3))

    def test_recovers_assignment_coefficients(self):
        # large draw from the covariate-driven mechanism; the class-2 slope
        # vector must come back within +-0.05 of (0.75, 0.25, 0.5)
        cfg = mechanism_ii(num_units=100_000, replications=1, seed=11)
        dataset = sample_dataset(cfg, 0)
        model = fit_multinomial_logistic(
            dataset.covariates, dataset.treatments, baseline=1
        )
        assert model.converged
        fitted_b2 = model.coefficients[1]
        assert abs(fitted_b2[0]) < 0.05  # intercept is truly zero
        assert np.allclose(fitted_b2[1:], [0.75, 0.25, 0.5], atol=0.05)

    def test_all_labels_identical(self):
        with pytest.raises(MissingClass):
            fit_multinomial_logistic(np.zeros((5, 1)), [1, 1, 1, 1, 1])

    def test_gap_in_labels(self):
        with pytest.raises(MissingClass):
            fit_multinomial_logistic(np.zeros((4, 1)), [1, 1, 3, 3])

    def test_probabilities_sum_to_one(self, rng):
        X = rng.normal(size=(90, 2))
        labels = rng.integers(1, 4, size=90)
        model = fit_multinomial_logistic(X, labels)
        for x in X[:10]:
            p = predict_multinomial(model, x)
            assert p.sum() == pytest.approx(1.0, abs=1e-12)

    def test_log_likelihood_nondecreasing(self, rng):
        X = rng.normal(size=(120, 2))
        labels = rng.integers(1, 4, size=120)
        model = fit_multinomial_logistic(X, labels)
        path = np.array(model.log_likelihood_path)
        slack = 16 * np.finfo(float).eps * (1.0 + np.abs(path).max())
        assert (np.diff(path) >= -slack).all()

    def test_baseline_choice_changes_parameterisation_not_fit(self, rng):
        X = rng.normal(size=(150, 2))
        labels = rng.integers(1, 4, size=150)
        m1 = fit_multinomial_logistic(X, labels, baseline=1)
        m3 = fit_multinomial_logistic(X, labels, baseline=3)
        for x in X[:5]:
            assert np.allclose(
                predict_multinomial(m1, x), predict_multinomial(m3, x), atol=1e-7
            )


class TestPredictMultinomial:
    def test_zero_coefficients_uniform(self):
        cfg = SimulationConfig(coefficients=((0, 0, 0),) * 3, num_units=30, seed=1)
        d = sample_dataset(cfg, 0)
        model = fit_multinomial_logistic(d.covariates, d.treatments, max_iter=0)
        assert np.allclose(
            predict_multinomial(model, [0.4, -1.0, 2.0]), [1 / 3] * 3, atol=1e-15
        )

    def test_mechanism_coefficients_at_origin(self):
        model = fit_multinomial_logistic(
            np.array([[1.0], [-1.0], [0.5], [2.0], [-0.5], [0.0]]),
            [1, 2, 3, 1, 2, 3],
            max_iter=0,
        )
        assert np.allclose(predict_multinomial(model, [0.0]), [1 / 3] * 3, atol=1e-15)

    def test_softmax_arithmetic(self):
        # class scores (0, 1.5, 1.5) at x = (1,1,1) under the covariate-driven
        # mechanism: probabilities (1/(1+2e^1.5), e^1.5/(1+2e^1.5) twice)
        from csps.estimation import MultinomialLogisticModel

        B = np.array(
            [
                [0.0, 0.0, 0.0, 0.0],
                [0.0, 0.75, 0.25, 0.5],
                [0.0, 0.25, 0.75, 0.5],
            ]
        )
        model = MultinomialLogisticModel(
            coefficients=B,
            baseline=1,
            converged=True,
            iterations=0,
            final_gradient_norm=0.0,
            log_likelihood_path=(0.0,),
        )
        p = predict_multinomial(model, [1.0, 1.0, 1.0])
        denom = 1.0 + 2.0 * math.exp(1.5)
        assert p == pytest.approx([1.0 / denom, math.exp(1.5) / denom, math.exp(1.5) / denom], abs=1e-15)

    def test_dimension_mismatch(self, rng):
        model = fit_multinomial_logistic(rng.normal(size=(60, 2)), rng.integers(1, 3, 60))
        with pytest.raises(DimensionMismatch):
            predict_multinomial(model, [1.0])


class TestEmpiricalScores:
    def test_worked_example_first_contrast(self, example):
        scores = empirical_csps(example, FIRST_CONTRAST)
        per_cell = {
            key: scores.values[idx[0]] for key, idx in build_cell_index(example)
        }
        assert per_cell == {
            (1.0, 1.0, 1.0): Fraction(1, 3),
            (1.0, 0.0, 1.0): Fraction(2, 3),
            (0.0, 1.0, 1.0): Fraction(5, 6),
            (0.0, 0.0, 0.0): Fraction(2, 3),
        }
        assert scores.is_exact
        assert scores.defined_mask.all()

    def test_worked_example_second_contrast(self, example):
        scores = empirical_csps(example, SECOND_CONTRAST)
        per_cell = {
            key: scores.values[idx[0]] for key, idx in build_cell_index(example)
        }
        assert per_cell == {
            (1.0, 1.0, 1.0): Fraction(1, 2),
            (1.0, 0.0, 1.0): Fraction(3, 4),
            (0.0, 1.0, 1.0): Fraction(2, 5),
            (0.0, 0.0, 0.0): Fraction(1, 2),
        }

    def test_cell_without_group_members_is_masked(self):
        # second cell holds only the zero-coefficient treatment
        d = Dataset([[0.0], [0.0], [1.0], [1.0]], [1, 2, 3, 3])
        scores = empirical_csps(d, Contrast((1, -1, 0)))
        assert scores.defined_mask.tolist() == [True, True, False, False]
        assert scores.values[2] is None

    def test_unit_permutation_invariance(self, example, rng):
        base = empirical_csps(example, FIRST_CONTRAST)
        perm = rng.permutation(example.n_units)
        shuffled_data = Dataset(
            example.covariates[perm], example.treatments[perm], num_treatments=3
        )
        shuffled = empirical_csps(shuffled_data, FIRST_CONTRAST)
        for i, j in enumerate(perm):
            assert shuffled.values[i] == base.values[j]


class TestModelScores:
    def test_saturated_indicators_reproduce_cell_frequencies(self, example):
        index = build_cell_index(example)
        dummies = np.zeros((example.n_units, index.num_cells - 1))
        for c in range(1, index.num_cells):
            dummies[index.groups[c], c - 1] = 1.0
        saturated = Dataset(dummies, example.treatments, num_treatments=3)
        for contrast in (FIRST_CONTRAST, SECOND_CONTRAST):
            fitted = model_csps(saturated, contrast)
            exact = empirical_csps(example, contrast)
            assert fitted.defined_mask.all()
            assert np.allclose(
                fitted.as_floats(), exact.as_floats(), atol=1e-6
            )

    def test_randomized_assignment_gives_flat_scores(self):
        cfg = SimulationConfig(coefficients=((0, 0, 0),) * 3, num_units=20_000, seed=3)
        dataset = sample_dataset(cfg, 0)
        contrast = Contrast((1, -1, 0))
        scores = model_csps(dataset, contrast)
        d = np.array(
            [1 if w == 1 else (-1 if w == 2 else 0) for w in dataset.treatments]
        )
        frequency = (d == 1).sum() / (d != 0).sum()
        values = scores.as_floats()
        assert np.abs(values - frequency).max() < 0.05

    def test_separation_propagates(self, rng):
        x = np.concatenate([rng.uniform(0.5, 2.0, 30), rng.uniform(-2.0, -0.5, 30)])
        w = np.where(x > 0, 1, 2)
        dataset = Dataset(x[:, None], w, num_treatments=2)
        with pytest.raises(SeparationDetected):
            model_csps(dataset, Contrast((1, -1)))


class TestScoreFromProbabilities:
    def test_first_treatment_probability(self):
        c = Contrast((1, "-1/2", "-1/2"))
        assert csps_from_treatment_probs((0.2, 0.3, 0.5), c) == pytest.approx(0.2)
        assert csps_from_treatment_probs(("1/5", "3/10", "1/2"), c) == Fraction(1, 5)

    def test_restrict_and_renormalise(self):
        c = Contrast((1, -1, 0))
        assert csps_from_treatment_probs((0.2, 0.3, 0.5), c) == pytest.approx(0.4)

    def test_zero_denominator(self):
        with pytest.raises(ZeroDenominator):
            csps_from_treatment_probs((0, 0, 1), Contrast((1, -1, 0)))

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            csps_from_treatment_probs((0.5, 0.5), Contrast((1, -1, 0)))

    def test_agrees_with_empirical_scores_in_expectation(self):
        # three covariate cells with fixed assignment probabilities; sampled
        # cell frequencies must approach the formula value
        rng = np.random.default_rng(99)
        cell_probs = {
            (0.0, 0.0): (0.2, 0.3, 0.5),
            (1.0, 0.0): (0.5, 0.25, 0.25),
            (0.0, 1.0): (1 / 3, 1 / 3, 1 / 3),
        }
        contrast = Contrast((1, -1, 0))
        n_per_cell = 100_000
        rows, labels = [], []
        for cell, probs in cell_probs.items():
            rows += [cell] * n_per_cell
            labels += list(rng.choice([1, 2, 3], size=n_per_cell, p=probs))
        dataset = Dataset(rows, labels, num_treatments=3)
        scores = empirical_csps(dataset, contrast)
        index = build_cell_index(dataset)
        for key, idx in index:
            want = csps_from_treatment_probs(cell_probs[key], contrast)
            got = float(scores.values[idx[0]])
            assert got == pytest.approx(want, abs=0.01)


class TestScoreVector:
    def test_range_checked(self):
        with pytest.raises(ValueError):
            ScoreVector([1.5, 0.5])

    def test_mask_matches_none_entries(self):
        sv = ScoreVector([0.5, None, Fraction(1, 3)])
        assert sv.defined_mask.tolist() == [True, False, True]
        floats = sv.as_floats()
        assert np.isnan(floats[1])
        assert floats[2] == pytest.approx(1 / 3)
