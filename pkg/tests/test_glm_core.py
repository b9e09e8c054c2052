import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from dtrwols.exceptions import (
    MissingCategory,
    MissingClass,
    NegativeWeight,
    NonpositiveSd,
    SeparationDetected,
    SingularDesign,
)
from dtrwols.glm_core import (
    gaussian_density,
    logistic_irls,
    multinomial_irls,
    weighted_least_squares,
)

LINE = np.array([[1.0, 0.0], [1.0, 1.0], [1.0, 2.0]])


class TestWls:
    def test_exact_line(self):
        fit = weighted_least_squares(LINE, np.array([0.0, 2.0, 4.0]), np.ones(3))
        np.testing.assert_allclose(fit.coefficients.values, [0.0, 2.0], atol=1e-12)
        np.testing.assert_allclose(fit.residuals, 0.0, atol=1e-12)

    def test_zero_weight_point_on_line(self):
        fit = weighted_least_squares(LINE, np.array([0.0, 2.0, 4.0]), np.array([1.0, 1.0, 0.0]))
        np.testing.assert_allclose(fit.coefficients.values, [0.0, 2.0], atol=1e-12)

    def test_collinear(self):
        with pytest.raises(SingularDesign):
            weighted_least_squares(np.ones((3, 2)), np.array([1.0, 2.0, 3.0]))

    def test_negative_weight(self):
        with pytest.raises(NegativeWeight):
            weighted_least_squares(LINE, np.zeros(3), np.array([1.0, -1.0, 1.0]))

    def test_random_5x2_matches_normal_equations(self, rng):
        X = np.column_stack([np.ones(5), rng.standard_normal(5)])
        y = rng.standard_normal(5)
        w = rng.uniform(0.1, 2.0, 5)
        oracle = np.linalg.inv(X.T @ np.diag(w) @ X) @ (X.T @ (w * y))
        fit = weighted_least_squares(X, y, w)
        np.testing.assert_allclose(fit.coefficients.values, oracle, rtol=0, atol=1e-12)

    def test_xtwx_inverse_is_symmetric_psd(self, rng):
        X = rng.standard_normal((40, 3))
        fit = weighted_least_squares(X, rng.standard_normal(40), rng.random(40))
        M = fit.xtwx_inverse
        np.testing.assert_allclose(M, M.T, atol=1e-14)
        assert np.linalg.eigvalsh(M).min() > -1e-12


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(6, 60), p=st.integers(1, 5),
       scale=st.floats(1e-3, 1e3))
def test_wls_orthogonality_and_scale_invariance(seed, n, p, scale):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    y = rng.standard_normal(n)
    w = rng.uniform(0.05, 3.0, n)
    fit = weighted_least_squares(X, y, w)
    r = fit.residuals
    bound = 1e-8 * np.linalg.norm(X) * np.linalg.norm(w * y)
    assert np.max(np.abs(X.T @ (w * r))) < bound
    rescaled = weighted_least_squares(X, y, scale * w)
    np.testing.assert_allclose(rescaled.coefficients.values, fit.coefficients.values, rtol=0, atol=1e-10)


class TestLogistic:
    def test_intercept_only_is_logit_of_mean(self, rng):
        a = (rng.random(10000) < 0.5).astype(float)
        fit = logistic_irls(np.ones((10000, 1)), a)
        assert fit.converged
        assert abs(fit.coefficients.values[0] - special.logit(a.mean())) < 1e-6

    def test_saturated_two_level_design(self):
        # x=-1 cells with success rate 0.25, x=+1 cells with success rate 0.75
        x = np.repeat([-1.0, 1.0], 400)
        a = np.concatenate([np.r_[np.ones(100), np.zeros(300)], np.r_[np.ones(300), np.zeros(100)]])
        fit = logistic_irls(np.column_stack([np.ones(800), x]), a)
        lo, hi = special.logit(0.25), special.logit(0.75)
        np.testing.assert_allclose(fit.coefficients.values, [(lo + hi) / 2, (hi - lo) / 2], atol=1e-9)

    def test_single_class(self):
        with pytest.raises(MissingClass):
            logistic_irls(np.ones((5, 1)), np.ones(5))

    def test_perfect_separation(self):
        x = np.linspace(-1, 1, 40)
        a = (x > 0).astype(float)
        with pytest.raises(SeparationDetected):
            logistic_irls(np.column_stack([np.ones(40), x]), a)

    def test_fitted_probabilities_inside_unit_interval(self, rng):
        x = rng.normal(2, 1, 10000)
        a = (rng.random(10000) < special.expit(-5 + x + x**2)).astype(float)
        fit = logistic_irls(np.column_stack([np.ones(10000), x, x**2]), a)
        p = fit.fitted_probabilities
        assert np.all((p > 0) & (p < 1))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(80, 400))
def test_irls_score_vanishes(seed, n):
    rng = np.random.default_rng(seed)
    X = np.column_stack([np.ones(n), rng.standard_normal((n, 2))])
    a = (rng.random(n) < special.expit(X @ np.array([0.2, 0.8, -0.5]))).astype(float)
    fit = logistic_irls(X, a)
    assert fit.converged
    assert np.max(np.abs(X.T @ (a - fit.fitted_probabilities))) < 1e-6


class TestMultinomial:
    def test_intercept_only_frequencies(self):
        a = np.repeat([1.0, 2.0, 3.0], [100, 200, 700])
        fit = multinomial_irls(np.ones((1000, 1)), a)
        np.testing.assert_allclose(fit.fitted_probabilities[0], [0.1, 0.2, 0.7], atol=1e-9)

    def test_two_categories_reduce_to_logistic(self, rng):
        X = np.column_stack([np.ones(500), rng.standard_normal(500)])
        a01 = (rng.random(500) < special.expit(0.3 + X[:, 1])).astype(float)
        # category 1 = treated, reference category 2 = untreated
        multi = multinomial_irls(X, 2.0 - a01)
        binary = logistic_irls(X, a01)
        np.testing.assert_allclose(multi.fitted_probabilities[:, 0], binary.fitted_probabilities, atol=1e-8)

    def test_saturated_design_gives_cell_frequencies(self, rng):
        z = rng.integers(0, 2, 3000).astype(float)
        a = np.where(z == 1, rng.choice([1, 2, 3], 3000, p=[0.5, 0.3, 0.2]),
                     rng.choice([1, 2, 3], 3000, p=[0.2, 0.2, 0.6])).astype(float)
        fit = multinomial_irls(np.column_stack([np.ones(3000), z]), a)
        for level in (0.0, 1.0):
            rows = z == level
            freq = np.bincount(a[rows].astype(int), minlength=4)[1:] / rows.sum()
            np.testing.assert_allclose(fit.fitted_probabilities[rows][0], freq, atol=1e-8)

    def test_rows_sum_to_one(self, rng):
        X = np.column_stack([np.ones(300), rng.standard_normal((300, 2))])
        a = rng.integers(1, 5, 300).astype(float)
        P = multinomial_irls(X, a).fitted_probabilities
        assert np.max(np.abs(P.sum(axis=1) - 1)) <= 1e-10
        assert np.all(P > 0)

    def test_missing_category(self):
        with pytest.raises(MissingCategory):
            multinomial_irls(np.ones((4, 1)), np.array([1.0, 1.0, 3.0, 3.0]), n_categories=3)


class TestGaussianDensity:
    def test_mode(self):
        assert gaussian_density(1.3, 1.3, 1.0) == pytest.approx(0.3989422804014327, abs=1e-15)

    def test_symmetry(self):
        assert gaussian_density(2.5, 2.0, 0.5) == gaussian_density(1.5, 2.0, 0.5)

    def test_zero_sd(self):
        with pytest.raises(NonpositiveSd):
            gaussian_density(0.0, 0.0, 0.0)
