import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dtrwols import DWSurvMT
from dtrwols.dwsurv import fit_dwsurv
from dtrwols.dwsurv_mt import (
    MultiStageSpec,
    TargetedBlipFit,
    blip_matrix_value,
    fit_dwsurv_mt,
    recover_reference,
    transform_design,
    transformed_blocks,
)
from dtrwols.exceptions import DimensionMismatch, InvalidTreatment, InvalidTreatmentWeights, ValidationError
from dtrwols.glm_core import Coefficients
from dtrwols.simgen import Scenario
from dtrwols.weights import TreatmentWeights

H = np.array([1.0, 0.5, -2.0])


class TestTransformDesign:
    def test_own_block(self):
        np.testing.assert_array_equal(transform_design(H, 1, TreatmentWeights.uniform(3)), [H, 0 * H])

    def test_reference_row_uniform(self):
        np.testing.assert_array_equal(transform_design(H, 3, TreatmentWeights.uniform(3)), [-H, -H])

    def test_reference_row_weighted(self):
        out = transform_design(H, 3, TreatmentWeights([0.5, 0.25, 0.25]))
        np.testing.assert_array_equal(out, [-2 * H, -H])

    @pytest.mark.parametrize("a", [0, 4, 1.5])
    def test_invalid_treatment(self, a):
        with pytest.raises(InvalidTreatment):
            transform_design(H, a, TreatmentWeights.uniform(3))

    def test_vectorised_matches_rowwise(self, rng):
        m = TreatmentWeights([0.2, 0.3, 0.1, 0.4])
        X = rng.standard_normal((30, 3))
        a = rng.integers(1, 5, 30)
        T = transformed_blocks(X, a, m)
        for i in range(30):
            np.testing.assert_array_equal(T[i], transform_design(X[i], a[i], m).reshape(-1))


def targeted(psi, m):
    psi = np.asarray(psi, float)
    return TargetedBlipFit(psi, Coefficients(np.zeros(1), ("(Intercept)",)), m, ("(Intercept)", "x"))


class TestBlipMatrixValue:
    def test_constructed(self):
        c = np.array([0.3, -1.2])
        fit = targeted([c, c, -2 * c], TreatmentWeights.uniform(3))
        h = np.array([1.0, 2.0])
        v = blip_matrix_value(fit, h)
        np.testing.assert_allclose(v, [c @ h, c @ h, -2 * c @ h], rtol=0, atol=1e-15)
        assert abs(v.mean()) < 1e-15

    def test_null_history(self):
        fit = targeted([[1.0, 2.0], [3.0, 4.0], [-4.0, -6.0]], TreatmentWeights.uniform(3))
        np.testing.assert_array_equal(blip_matrix_value(fit, [0.0, 0.0]), 0.0)

    def test_dimension(self):
        fit = targeted([[1.0, 2.0], [-1.0, -2.0]], TreatmentWeights.uniform(2))
        with pytest.raises(DimensionMismatch):
            blip_matrix_value(fit, [1.0])


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), N=st.integers(2, 5), q=st.integers(1, 4))
def test_reconstruction_sums_to_zero(seed, N, q):
    rng = np.random.default_rng(seed)
    m = TreatmentWeights(rng.dirichlet(np.ones(N)) * 0.9 + 0.1 / N)
    psi = recover_reference(rng.normal(0, 5, (N - 1, q)), m)
    assert np.max(np.abs(m.values @ psi)) <= 1e-8
    v = psi @ rng.standard_normal(q)
    assert abs(m.values @ v) <= 1e-8


def binary_as_labels(data):
    return data.with_columns(a1=data["a1"] + 1, a2=data["a2"] + 1)


def mt_stages_from(stages):
    return [
        MultiStageSpec(s.treatment, s.tf_terms, s.blip_terms, s.treat_terms, time=s.time, entry=s.entry,
                       cens_terms=s.cens_terms, n_treatments=2, treatment_weights=[0.5, 0.5])
        for s in stages
    ]


class TestFitDwsurvMt:
    def test_sum_to_zero_on_fit(self):
        sc = Scenario("dwsurvmt_appD", n=4000, seed=1)
        fit = fit_dwsurv_mt(sc.generate().data, sc.analysis_stages())
        for s in fit.stages:
            tb = s.extras["targeted"]
            assert np.max(np.abs(tb.m.values @ tb.psi)) <= 1e-8

    def test_binary_reduction(self):
        sc = Scenario("dwsurv_appC", n=4000, seed=2)
        data = sc.generate().data
        # the multicategory weight m(a)/(pi_a g) is the inverse-probability
        # rule, so the binary comparison uses ipw weights
        stages = sc.analysis_stages(weight="ipw")
        binary = fit_dwsurv(data, stages)
        multi = fit_dwsurv_mt(binary_as_labels(data), mt_stages_from(stages))
        for b, m in zip(binary.stages, multi.stages):
            psi = m.extras["targeted"].psi
            # treatment label 2 is the binary "treated" arm
            np.testing.assert_allclose(psi[1] - psi[0], b.psi.values, rtol=0, atol=1e-8)
        np.testing.assert_array_equal(multi.regime.recommend(binary_as_labels(data)) - 1,
                                      binary.regime.recommend(data))

    def test_optimal_received_pseudo_outcome(self):
        sc = Scenario("dwsurvmt_appD", n=4000, seed=3)
        data = sc.generate().data
        fit = fit_dwsurv_mt(data, sc.analysis_stages())
        best = fit.stages[1].rule.recommend(data) == data["a2"]
        ytil = fit.stages[0].pseudo_outcome
        expected = data["y1"] + data["eta2"] * data["y2"]
        np.testing.assert_array_equal(ytil[best], expected[best])

    def test_oracle_agreement_single_run(self):
        sc = Scenario("dwsurvmt_appD", n=10000, seed=4)
        gen = sc.generate()
        est = DWSurvMT(stages=sc.analysis_stages()).fit(gen.data)
        agree = np.mean(est.predict(gen.data) == gen.optimal_actions, axis=0)
        assert agree[1] >= 0.97

    def test_choice_of_m(self):
        sc = Scenario("dwsurvmt_appD", n=10000, seed=5)
        data = sc.generate().data
        uni = fit_dwsurv_mt(data, sc.analysis_stages(treatment_weights="uniform"))
        emp = fit_dwsurv_mt(data, sc.analysis_stages(treatment_weights="empirical"))
        agree = np.mean(uni.regime.recommend(data) == emp.regime.recommend(data), axis=0)
        assert np.all(agree >= 0.99)

    def test_censored_rows_do_not_matter(self):
        sc = Scenario("dwsurvmt_appD", n=3000, seed=6)
        data = sc.generate().data
        n = data.n
        extra = {f"p{j}{k}": np.full(n, 1 / 3) for j in (1, 2) for k in (1, 2, 3)}
        data = data.with_columns(g=np.full(n, 0.9), **extra)
        stages = [
            MultiStageSpec("a1", "1 + x11 + x12", "1 + x11 + x12", time="y1", n_treatments=3,
                           propensity_column=("p11", "p12", "p13"), censoring_column="g"),
            MultiStageSpec("a2", "1 + x22", "1 + x22", time="y2", entry="eta2", n_treatments=3,
                           propensity_column=("p21", "p22", "p23"), censoring_column="g"),
        ]
        full = fit_dwsurv_mt(data, stages)
        kept = fit_dwsurv_mt(data.take(data["delta"] == 1), stages)
        assert np.array_equal(full.psi_vector(), kept.psi_vector())

    def test_weight_count_mismatch(self):
        sc = Scenario("dwsurvmt_appD", n=500, seed=7)
        stages = sc.analysis_stages(treatment_weights=[0.5, 0.5])
        with pytest.raises(ValidationError):
            fit_dwsurv_mt(sc.generate().data, stages)

    def test_invalid_weights(self):
        with pytest.raises(InvalidTreatmentWeights):
            MultiStageSpec("a", "1", "1", time="y", treatment_weights=[0.7, 0.7])
