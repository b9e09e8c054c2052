import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dtrwols import DWGLM, StageSpec
from dtrwols.dwglm import DwglmConfig, fit_dwglm, link_apply, link_invert
from dtrwols.dwols import fit_dwols
from dtrwols.exceptions import DomainError, InvalidData, ValidationError
from dtrwols.glm_core import Coefficients
from dtrwols.regime import BinaryRule, recommend
from dtrwols.simgen import Scenario
from dtrwols.tabular import Dataset, TermList


class TestLinks:
    def test_symmetry_point(self):
        assert link_apply("logit", 0.5) == 0.0
        assert link_invert("logit", 0.0) == 0.5

    def test_probit_quantile(self):
        assert link_apply("probit", 0.975) == pytest.approx(1.959964, abs=1e-6)

    def test_identity(self):
        assert link_apply("identity", 0.3) == 0.3
        assert link_invert("identity", 0.3) == 0.3

    @pytest.mark.parametrize("p", [0.0, 1.0, 1.5, np.nan])
    def test_domain(self, p):
        with pytest.raises(DomainError):
            link_apply("logit", p)

    def test_identity_inverse_domain(self):
        with pytest.raises(DomainError):
            link_invert("identity", 1.2)

    def test_unknown_link(self):
        with pytest.raises(ValidationError):
            link_apply("cloglog", 0.5)


@settings(max_examples=300, deadline=None)
@given(p=st.floats(1e-9, 1 - 1e-9), link=st.sampled_from(["logit", "probit", "identity"]))
def test_link_round_trip(p, link):
    assert abs(link_invert(link, link_apply(link, p)) - p) <= 1e-12


def test_fitted_example_recommends_treatment():
    rule = BinaryRule(Coefficients(np.array([-2.0091954, 0.9523452]), ("(Intercept)", "x2")),
                      TermList.parse("1 + x2"))
    assert float(rule.blip({"x2": [3.0]})[0]) == pytest.approx(0.8478402, abs=1e-7)
    assert recommend(rule, [1.0, 3.0]) == 1.0


def zero_regret_data(rng, n=4000):
    # a2 = 1[x2 > 0] and a blip without intercept: any positive slope
    # estimate agrees with the received treatment, so stage-2 regret is 0
    x1 = rng.uniform(-1, 1, n)
    x2 = rng.uniform(-1, 1, n)
    a1 = (rng.random(n) < 0.5).astype(float)
    a2 = (x2 > 0).astype(float)
    p = 0.3 + 0.1 * x1 + 0.2 * a1 * (0.5 + x1) + 0.4 * a2 * x2
    y = (rng.random(n) < p).astype(float)
    return Dataset({"x1": x1, "a1": a1, "x2": x2, "a2": a2, "y": y, "pi1": np.full(n, 0.5),
                    "pi2": np.full(n, 0.5)})


def test_identity_link_reduces_to_dwols(rng):
    data = zero_regret_data(rng)
    stages = [
        StageSpec("a1", "1 + x1", "1 + x1", propensity_column="pi1"),
        StageSpec("a2", "1 + x1 + x2", "0 + x2", propensity_column="pi2"),
    ]
    glm = fit_dwglm(data, stages, "y", DwglmConfig(link="identity", replicates=1))
    ols = fit_dwols(data, stages, "y")
    assert glm.stages[1].psi.values[0] > 0
    np.testing.assert_allclose(glm.stages[1].psi.values, ols.stages[1].psi.values, atol=1e-8)
    np.testing.assert_allclose(glm.stages[0].psi.values, ols.stages[0].psi.values, atol=1e-8)
    np.testing.assert_allclose(glm.stages[0].beta.values, ols.stages[0].beta.values, atol=1e-8)


def test_final_stage_is_deterministic():
    sc = Scenario("dwglm_appB", n=3000, seed=1)
    data = sc.generate().data
    a = fit_dwglm(data, sc.analysis_stages(), "y", DwglmConfig(rng_seed=1))
    b = fit_dwglm(data, sc.analysis_stages(), "y", DwglmConfig(rng_seed=2))
    assert np.array_equal(a.stages[1].psi.values, b.stages[1].psi.values)
    assert not np.array_equal(a.stages[0].psi.values, b.stages[0].psi.values)


def test_replicates_are_reproducible():
    sc = Scenario("dwglm_appB", n=2000, seed=2)
    data = sc.generate().data
    a = DWGLM(stages=sc.analysis_stages(), replicates=5, random_state=7).fit(data)
    b = DWGLM(stages=sc.analysis_stages(), replicates=5, random_state=7).fit(data)
    assert np.array_equal(a.blip_coefficients(), b.blip_coefficients())
    reps = a.result_.stages[0].extras["replicate_psi"]
    assert reps.shape == (5, 2)
    np.testing.assert_allclose(reps.mean(axis=0), a.result_.stages[0].psi.values, rtol=0, atol=1e-14)


def test_weights_nonnegative():
    sc = Scenario("dwglm_appB", n=2000, seed=3)
    fit = fit_dwglm(sc.generate().data, sc.analysis_stages(), "y", DwglmConfig(replicates=3))
    for s in fit.stages:
        assert np.all(s.weights >= 0)


def test_single_run_stage_two():
    sc = Scenario("dwglm_appB", n=10000, seed=4)
    fit = fit_dwglm(sc.generate().data, sc.analysis_stages(), "y", DwglmConfig(replicates=3))
    np.testing.assert_allclose(fit.stages[1].psi.values, [-2.0, 1.0], atol=0.6)


def test_averaging_reduces_variance():
    est1, est50 = [], []
    for seed in range(8):
        sc = Scenario("dwglm_appB", n=4000, seed=100 + seed)
        data = sc.generate().data
        est1.append(fit_dwglm(data, sc.analysis_stages(), "y", DwglmConfig(replicates=1, rng_seed=seed)).stages[0].psi.values)
        est50.append(fit_dwglm(data, sc.analysis_stages(), "y", DwglmConfig(replicates=50, rng_seed=seed)).stages[0].psi.values)
    # conditional on the data, drawing noise only adds variance
    assert np.all(np.var(est50, axis=0) <= np.var(est1, axis=0))


def test_non_binary_outcome(rng):
    data = Dataset({"a": [0.0, 1.0, 0.0, 1.0], "y": [0.0, 0.5, 1.0, 1.0]})
    with pytest.raises((InvalidData, ValidationError)):
        fit_dwglm(data, [StageSpec("a", "1", "1")], "y")


def test_config_validation():
    with pytest.raises(ValidationError):
        DwglmConfig(replicates=0)
