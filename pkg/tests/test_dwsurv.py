import numpy as np
import pytest
from scipy import integrate, special

from dtrwols import DWSurv
from dtrwols.dwols import StageSpec, fit_dwols
from dtrwols.dwsurv import SurvivalStageSpec, fit_censoring, fit_dwsurv, pseudo_survival
from dtrwols.exceptions import MissingClass, NonpositiveSurvivalTime, ValidationError
from dtrwols.simgen import Scenario
from dtrwols.tabular import Dataset


class TestPseudoSurvival:
    def test_optimal_received(self):
        out = pseudo_survival(np.array([1.0]), (np.array([2.0]), np.array([0.0]), np.array([1.0])))
        assert out[0] == 3.0

    def test_non_entrant(self):
        out = pseudo_survival(np.array([1.5]), (np.array([0.0]), np.array([0.7]), np.array([0.0])))
        assert out[0] == 1.5

    def test_exponential_adjustment(self):
        out = pseudo_survival(np.array([1.0]), (np.array([2.0]), np.array([0.5]), np.array([1.0])))
        assert out[0] == pytest.approx(4.2974, abs=1e-4)
        assert out[0] == pytest.approx(1 + 2 * np.exp(0.5), abs=1e-15)

    def test_final_stage(self):
        y = np.array([1.0, 2.0])
        assert pseudo_survival(y, None) is y


class TestCensoringFit:
    def test_intercept_only(self, rng):
        d = (rng.random(10000) < 0.85).astype(float)
        fit = fit_censoring(Dataset({"delta": d}), "1")
        assert np.mean(fit.fitted) == pytest.approx(0.85, abs=0.02)
        assert np.all((fit.fitted > 0) & (fit.fitted < 1))

    def test_all_uncensored(self):
        with pytest.raises(MissingClass):
            fit_censoring(Dataset({"delta": np.ones(20)}), "1")

    def test_scenario_slope(self):
        data = Scenario("dwsurv_appC", n=10000, seed=1).generate().data
        fit = fit_censoring(data, "1 + x1")
        assert fit.coefficients["x1"] == pytest.approx(-1.0, abs=0.1)

    def test_scenario_censoring_fraction_quadrature(self):
        expected = integrate.quad(lambda x: 1 - special.expit(2.1 - x), 0.1, 1.29)[0] / 1.19
        data = Scenario("dwsurv_appC", n=10000, seed=2).generate().data
        assert 1 - np.mean(data["delta"]) == pytest.approx(expected, abs=0.02)


def known_nuisance(data):
    return data.with_columns(
        pi1=special.expit(2 * data["x1"] - 1),
        pi2=special.expit(-2 * data["x2"] + 2.8),
        g=special.expit(2.1 - data["x1"]),
    )


def known_stages():
    return [
        SurvivalStageSpec("a1", "1 + x1 + x1^4", "1 + x1", time="y1", propensity_column="pi1",
                          censoring_column="g"),
        SurvivalStageSpec("a2", "1 + x2 + x2^3", "1 + x2", time="y2", entry="eta2",
                          propensity_column="pi2", censoring_column="g"),
    ]


class TestFitDwsurv:
    def test_censored_rows_do_not_matter(self):
        data = known_nuisance(Scenario("dwsurv_appC", n=3000, seed=3).generate().data)
        full = fit_dwsurv(data, known_stages())
        kept = fit_dwsurv(data.take(data["delta"] == 1), known_stages())
        assert np.array_equal(full.psi_vector(), kept.psi_vector())

    def test_no_censoring_matches_dwols_on_log_scale(self, rng):
        data = Scenario("dwsurv_appC", n=3000, seed=4).generate().data
        data = data.with_columns(delta=np.ones(data.n))
        stages = [
            SurvivalStageSpec("a1", "1 + x1", "1 + x1", "1 + x1", time="y1"),
            SurvivalStageSpec("a2", "1 + x2 + x2^3", "1 + x2", "1 + x2", time="y2", entry="eta2"),
        ]
        surv = fit_dwsurv(data, stages)
        ref = fit_dwols(data.with_columns(logy2=np.log(data["y2"])),
                        [StageSpec("a2", "1 + x2 + x2^3", "1 + x2", "1 + x2")], "logy2")
        np.testing.assert_allclose(surv.stages[1].psi.values, ref.stages[0].psi.values, rtol=0, atol=1e-10)
        np.testing.assert_allclose(surv.stages[1].beta.values, ref.stages[0].beta.values, rtol=0, atol=1e-10)

    def test_pseudo_outcome_dominance(self):
        data = Scenario("dwsurv_appC", n=3000, seed=5).generate().data
        sc = Scenario("dwsurv_appC", n=3000, seed=5)
        fit = fit_dwsurv(data, sc.analysis_stages())
        observed = data["y1"] + data["eta2"] * data["y2"]
        rule = fit.stages[1].rule
        optimal = rule.recommend(data) == data["a2"]
        ytil = fit.stages[0].pseudo_outcome
        assert np.all(ytil >= observed * (1 - 1e-15))
        np.testing.assert_array_equal(ytil[optimal], observed[optimal])
        assert np.all(ytil[~optimal] > observed[~optimal])

    def test_single_run_recovers_truth(self):
        sc = Scenario("dwsurv_appC", n=10000, seed=6)
        est = DWSurv(stages=sc.analysis_stages()).fit(sc.generate().data)
        np.testing.assert_allclose(est.result_.stages[0].psi.values, [0.1, 0.1], atol=0.15)
        np.testing.assert_allclose(est.result_.stages[1].psi.values, [-0.9, 0.6], atol=0.15)

    def test_uncensored_rows_only(self):
        sc = Scenario("dwsurv_appC", n=2000, seed=7)
        data = sc.generate().data
        fit = fit_dwsurv(data, sc.analysis_stages())
        for s in fit.stages:
            assert np.all(data["delta"][s.rows] == 1)
            assert np.all(s.weights[~s.rows] == 0)

    def test_nonpositive_time(self):
        data = Scenario("dwsurv_appC", n=500, seed=8).generate().data
        y2 = data["y2"].copy()
        y2[np.flatnonzero(data["delta"] == 1)[0]] = 0.0
        with pytest.raises(NonpositiveSurvivalTime):
            fit_dwsurv(data.with_columns(y2=y2), Scenario("dwsurv_appC", n=500).analysis_stages())

    def test_no_censored_individuals_falls_back(self):
        data = Scenario("dwsurv_appC", n=1000, seed=9).generate().data
        data = data.with_columns(delta=np.ones(data.n))
        with pytest.warns(RuntimeWarning, match="no censored"):
            fit_dwsurv(data, Scenario("dwsurv_appC", n=1000).analysis_stages())

    def test_time_column_required(self):
        with pytest.raises(ValidationError):
            SurvivalStageSpec("a1", "1", "1")
