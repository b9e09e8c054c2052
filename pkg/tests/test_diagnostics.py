import numpy as np
import pytest

from dtrwols import DWOLS
from dtrwols.diagnostics import regression_calibration, validate_tf_model
from dtrwols.dwols import fit_dwols
from dtrwols.exceptions import NoValidationSubsample, PreconditionError
from dtrwols.inference import BootstrapConfig
from dtrwols.simgen import Scenario
from dtrwols.tabular import Dataset

VARIANTS = {"correct": "1 + x{j}", "null": "1", "quadratic": "1 + x{j} + x{j}^2"}


def variants():
    return {k: [v.format(j=1), v.format(j=2)] for k, v in VARIANTS.items()}


def estimator(tf_wrong=False, seed=0, n=10000):
    sc = Scenario("dwols_basic", n=n, seed=seed, misspecify={"tf": (1, 2)} if tf_wrong else {})
    return DWOLS(stages=sc.analysis_stages()), sc.generate().data


class TestValidation:
    def test_consistent_when_tf_correct(self):
        est, data = estimator()
        rep = validate_tf_model(est, data, variants(), tolerance=0.1)
        assert rep.max_pairwise_distance < 0.1
        assert rep.verdict == "consistent"
        assert set(rep.estimates) == set(VARIANTS)

    def test_suspect_when_tf_wrong(self):
        est, data = estimator(tf_wrong=True)
        rep = validate_tf_model(est, data, variants(), tolerance=0.1)
        assert rep.max_pairwise_distance > 0.1
        assert rep.verdict == "suspect"

    def test_default_tolerance_from_bootstrap(self):
        est, data = estimator(n=1000)
        rep = validate_tf_model(est, data, ["1 + x1", "1"], bootstrap=BootstrapConfig(B=20))
        assert rep.tolerance > 0
        assert rep.verdict == ("suspect" if rep.max_pairwise_distance > rep.tolerance else "consistent")

    def test_single_variant(self):
        est, data = estimator(n=200)
        with pytest.raises(PreconditionError):
            validate_tf_model(est, data, ["1 + x1"], tolerance=0.1)

    def test_failed_variant_is_excluded(self):
        est, data = estimator(n=500)
        bad = ["1 + nothing", "1 + nothing"]
        with pytest.warns(RuntimeWarning, match="failed"):
            rep = validate_tf_model(est, data, {"ok": "1 + x1", "null": "1", "bad": bad},
                                    tolerance=0.1)
        assert rep.failed == ("bad",)
        assert set(rep.estimates) == {"ok", "null"}


class TestCalibration:
    def test_identity_calibration(self, rng):
        x = rng.standard_normal(300)
        z = rng.standard_normal(300)
        data = Dataset({"x": x, "xs": x.copy(), "z": z, "v": (rng.random(300) < 0.3).astype(float)})
        fit, out = regression_calibration(data, "xs", ["z"], truth="x", validation="v")
        np.testing.assert_allclose(fit.coefficients.values, [0.0, 1.0, 0.0], atol=1e-8)
        np.testing.assert_allclose(out["xhat"], x, atol=1e-8)

    def test_attenuation(self, rng):
        x = rng.standard_normal(20000)
        xs = x + rng.standard_normal(20000)
        data = Dataset({"x": x, "xs": xs, "v": np.ones(20000)})
        fit, _ = regression_calibration(data, "xs", truth="x", validation="v")
        assert fit.coefficients["xs"] == pytest.approx(0.5, abs=0.05)

    def test_no_validation_subsample(self, rng):
        data = Dataset({"x": np.zeros(5), "xs": rng.standard_normal(5), "v": np.zeros(5)})
        with pytest.raises(NoValidationSubsample):
            regression_calibration(data, "xs", truth="x", validation="v")
        with pytest.raises(NoValidationSubsample):
            regression_calibration(data, "xs", truth="x", validation="missing")

    def test_imputed_column_finite(self):
        data = Scenario("dwols_measerr", n=2000, seed=1).generate().data
        fit, out = regression_calibration(data, "xstar", truth="x", validation="valid")
        assert np.all(np.isfinite(out["xhat"]))
        assert fit.n_validation == int(data["valid"].sum())

    def test_calibration_reduces_bias(self):
        sc = Scenario("dwols_measerr", n=10000, seed=2)
        data = sc.generate().data
        naive = fit_dwols(data, sc.analysis_stages(covariate="xstar"), "y").stages[0].psi.values
        _, cal = regression_calibration(data, "xstar", truth="x", validation="valid")
        fixed = fit_dwols(cal, sc.analysis_stages(covariate="xhat"), "y").stages[0].psi.values
        assert abs(fixed[1] - 1.0) < abs(naive[1] - 1.0)
