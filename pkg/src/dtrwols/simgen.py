"""Seeded data-generating processes with known optimal regimes.

Every scenario draws from numpy's PCG64 generator seeded through
``SeedSequence(seed)``, so a (name, n, seed, params) tuple fully determines
the data. Misspecification flags change only the analysis models returned
by :meth:`Scenario.analysis_stages`, never the data.

Scenarios
---------
dwols_basic
    Two stages, binary treatments, linear treatment-free and blip models.
gdwols_appA
    Two stages, Gaussian doses, quadratic blips, non-linear treatment-free
    models.
dwglm_appB
    Two stages, binary treatments, binary outcome on the logit scale.
dwsurv_appC
    Two stages, binary treatments, log-normal survival times with
    covariate-dependent censoring.
dwsurvmt_appD
    Two stages, three treatments, 80% stage-two entry, independent
    exponential censoring.
dwols_measerr
    One stage with a covariate measured with additive error and a
    validation subsample where the true value is known.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np
from scipy.special import expit

from .dwols import StageSpec
from .dwsurv import SurvivalStageSpec
from .dwsurv_mt import MultiStageSpec
from .exceptions import UnknownScenario, ValidationError
from .gdwols import DoseStageSpec
from .tabular import Dataset, as_dataset

__all__ = ["Scenario", "GeneratedData", "SCENARIOS", "generate", "true_regime"]


@dataclass(frozen=True, eq=False)
class GeneratedData:
    """Simulated data with its ground truth.

    Attributes
    ----------
    data : Dataset
    optimal_actions : ndarray of shape (n, K)
        True optimal action per individual and stage.
    optimal_outcome : ndarray of shape (n,) or None
        Outcome (or total survival time) the individual would have had under
        the optimal regime, with the same noise draws.
    redraws : int
        Number of noise redraws made to keep stage-one times positive.
    """

    data: Dataset
    optimal_actions: np.ndarray
    optimal_outcome: np.ndarray | None
    scenario: "Scenario"
    redraws: int = 0


def _normal_pos(x):
    return np.maximum(x, 0.0)


class _Generator:
    """Interface shared by the scenario implementations."""

    n_stages = 2
    defaults: dict[str, Any] = {}
    method = "dwols"

    def draw(self, rng, n, p) -> tuple[dict, np.ndarray | None, int]:
        raise NotImplementedError

    def regime(self, data: Dataset, p) -> np.ndarray:
        raise NotImplementedError

    def stages(self, p, misspecify: Mapping[str, Sequence[int]], options) -> list:
        raise NotImplementedError

    def value(self, data: Dataset, actions: np.ndarray, p) -> np.ndarray:
        raise NotImplementedError(f"no closed-form value for {type(self).__name__}")


def _pick(flags, model, stage, correct, wrong):
    return wrong if stage in flags.get(model, ()) else correct


class _DwolsBasic(_Generator):
    defaults = {
        "beta": ((1.0, 1.0), (1.0, 1.0)),
        "psi": ((1.0, 1.0), (1.0, 1.0)),
        "alpha": ((0.0, 1.0), (0.0, 1.0)),
        "sigma": 1.0,
        "x_uniform": None,
    }

    def draw(self, rng, n, p):
        cols = {}
        if p["x_uniform"] is None:
            x1 = rng.standard_normal(n)
            x2 = rng.standard_normal(n)
        else:
            lo, hi = p["x_uniform"]
            x1 = rng.uniform(lo, hi, n)
            x2 = rng.uniform(lo, hi, n)
        xs = (x1, x2)
        y = np.zeros(n)
        opt = np.zeros(n)
        for j in range(2):
            x = xs[j]
            al = p["alpha"][j]
            a = (rng.random(n) < expit(al[0] + al[1] * x)).astype(float)
            b, s = p["beta"][j], p["psi"][j]
            blip = s[0] + s[1] * x
            y += b[0] + b[1] * x + a * blip
            opt += b[0] + b[1] * x + _normal_pos(blip)
            cols[f"x{j + 1}"] = x
            cols[f"a{j + 1}"] = a
        eps = p["sigma"] * rng.standard_normal(n)
        cols["y"] = y + eps
        return cols, opt + eps, 0

    def regime(self, data, p):
        return np.column_stack(
            [(p["psi"][j][0] + p["psi"][j][1] * data[f"x{j + 1}"] > 0).astype(float) for j in range(2)]
        )

    def value(self, data, actions, p):
        out = np.zeros(data.n)
        for j in range(2):
            x = data[f"x{j + 1}"]
            b, s = p["beta"][j], p["psi"][j]
            out += b[0] + b[1] * x + actions[:, j] * (s[0] + s[1] * x)
        return out

    def stages(self, p, flags, options):
        stages = []
        for j in (1, 2):
            x = f"x{j}"
            stages.append(
                StageSpec(
                    treatment=f"a{j}",
                    tf_terms=_pick(flags, "tf", j, f"1 + {x}", "1"),
                    blip_terms=f"1 + {x}",
                    treat_terms=_pick(flags, "treat", j, f"1 + {x}", "1"),
                    weight=options.get("weight", "absdiff"),
                    stage=j,
                )
            )
        return stages


class _GdwolsA(_Generator):
    method = "gdwols"
    defaults = {
        "psi": ((1.0, 1.0, -1.0), (1.0, 1.0, -1.0)),
        "alpha": ((-1.0, 1.0), (-1.0, 1.0)),
        "x_mean": 10.0,
        "x_sd": 1.0,
        "sigma": 1.0,
    }

    @staticmethod
    def _gamma(a, x, s):
        return a * (s[0] + s[1] * x) + a * a * s[2]

    @staticmethod
    def _dose(x, s):
        return -(s[0] + s[1] * x) / (2 * s[2])

    def draw(self, rng, n, p):
        x1 = np.abs(rng.normal(p["x_mean"], p["x_sd"], n))
        x2 = np.abs(rng.normal(p["x_mean"], p["x_sd"], n))
        (a10, a11), (a20, a21) = p["alpha"]
        a1 = rng.normal(a10 + a11 * x1, 1.0)
        a2 = rng.normal(a20 + a21 * x2, 1.0)
        s1, s2 = p["psi"]
        tf = np.log(x1) + np.sin(x1) + np.log(x2) + np.sin(x2)
        eps = rng.normal(0.0, p["sigma"], n)
        y = tf + self._gamma(a1, x1, s1) + self._gamma(a2, x2, s2) + eps
        opt = (
            tf
            + self._gamma(self._dose(x1, s1), x1, s1)
            + self._gamma(self._dose(x2, s2), x2, s2)
            + eps
        )
        return {"y": y, "x1": x1, "x2": x2, "a1": a1, "a2": a2}, opt, 0

    def regime(self, data, p):
        s1, s2 = p["psi"]
        return np.column_stack([self._dose(data["x1"], s1), self._dose(data["x2"], s2)])

    def value(self, data, actions, p):
        s1, s2 = p["psi"]
        x1, x2 = data["x1"], data["x2"]
        tf = np.log(x1) + np.sin(x1) + np.log(x2) + np.sin(x2)
        return tf + self._gamma(actions[:, 0], x1, s1) + self._gamma(actions[:, 1], x2, s2)

    def stages(self, p, flags, options):
        tf_correct = {
            1: "1 + log(x1) + sin(x1)",
            2: "1 + log(x2) + sin(x2) + log(x1) + sin(x1) + a1 + x1:a1 + a1^2",
        }
        weight = options.get("weight", "ipw")
        return [
            DoseStageSpec(
                treatment=f"a{j}",
                tf_terms=_pick(flags, "tf", j, tf_correct[j], f"1 + x{j}"),
                blip_terms=f"1 + x{j}",
                quadratic_terms="1",
                treat_terms=_pick(flags, "treat", j, f"1 + x{j}", "1"),
                weight=weight,
                numerator=options.get("numerator"),
                stage=j,
            )
            for j in (1, 2)
        ]


class _DwglmB(_Generator):
    method = "dwglm"
    defaults = {"psi": ((-2.0, 1.0), (-2.0, 1.0))}

    @staticmethod
    def _optimal_logit(x1):
        return x1 + np.log(np.abs(x1)) + np.cos(np.pi * x1)

    def draw(self, rng, n, p):
        x1 = rng.normal(2.0, 1.0, n)
        x2 = rng.normal(1.0 + 0.5 * x1, 1.0)
        a1 = (rng.random(n) < expit(-5 + x1 + x1**2)).astype(float)
        a2 = (rng.random(n) < expit(-2.5 * x2 + np.sin(x2) + x2**2)).astype(float)
        (s10, s11), (s20, s21) = p["psi"]
        b1, b2 = s10 + s11 * x1, s20 + s21 * x2
        reg1 = b1 * ((b1 > 0) - a1)
        reg2 = b2 * ((b2 > 0) - a2)
        prob = expit(self._optimal_logit(x1) - reg1 - reg2)
        y = (rng.random(n) < prob).astype(float)
        cols = {"x1": x1, "x2": x2, "a1": a1, "a2": a2, "y": y, "x1c": x1 - 2.0, "x2c": x2 - 2.0}
        return cols, expit(self._optimal_logit(x1)), 0

    def regime(self, data, p):
        (s10, s11), (s20, s21) = p["psi"]
        return np.column_stack(
            [(s10 + s11 * data["x1"] > 0).astype(float), (s20 + s21 * data["x2"] > 0).astype(float)]
        )

    def value(self, data, actions, p):
        (s10, s11), (s20, s21) = p["psi"]
        b1, b2 = s10 + s11 * data["x1"], s20 + s21 * data["x2"]
        reg1 = b1 * ((b1 > 0) - actions[:, 0])
        reg2 = b2 * ((b2 > 0) - actions[:, 1])
        return expit(self._optimal_logit(data["x1"]) - reg1 - reg2)

    def stages(self, p, flags, options):
        # positive parts (x - 2)_+ are spanned by x and |x - 2|
        tf_correct = {
            1: "1 + x1 + log(abs(x1)) + cos(pi*x1) + abs(x1c)",
            2: "1 + x1 + log(abs(x1)) + cos(pi*x1) + abs(x1c) + a1 + x1:a1 + x2 + abs(x2c)",
        }
        tf_wrong = {1: "1 + x1", 2: "1 + x1 + a1 + x1:a1 + x2 + log(abs(x1)) + cos(pi*x1)"}
        treat_correct = {1: "1 + x1 + x1^2", 2: "1 + x2 + sin(x2) + x2^2"}
        return [
            StageSpec(
                treatment=f"a{j}",
                tf_terms=_pick(flags, "tf", j, tf_correct[j], tf_wrong[j]),
                blip_terms=f"1 + x{j}",
                treat_terms=_pick(flags, "treat", j, treat_correct[j], "1"),
                stage=j,
            )
            for j in (1, 2)
        ]


class _DwsurvC(_Generator):
    method = "dwsurv"
    defaults = {
        "beta1": (6.3, 1.5, -0.8),
        "psi1": (0.1, 0.1),
        "beta2": (4.0, 1.1, -0.2),
        "psi2": (-0.9, 0.6),
        "sigma": 0.3,
        "censor_mean": 300.0,
        "delta_alpha": (2.1, -1.0),
    }

    def draw(self, rng, n, p):
        x1 = rng.uniform(0.1, 1.29, n)
        x2 = rng.uniform(0.9, 2.0, n)
        a1 = (rng.random(n) < expit(2 * x1 - 1)).astype(float)
        a2 = (rng.random(n) < expit(-2 * x2 + 2.8)).astype(float)
        d0, d1 = p["delta_alpha"]
        delta = (rng.random(n) < expit(d0 + d1 * x1)).astype(float)
        b1, s1, b2, s2 = p["beta1"], p["psi1"], p["beta2"], p["psi2"]
        blip1 = s1[0] + s1[1] * x1
        blip2 = s2[0] + s2[1] * x2
        f1 = b1[0] + b1[1] * x1 + b1[2] * x1**4
        f2 = b2[0] + b2[1] * x2 + b2[2] * x2**3
        shift2 = ((blip2 > 0) - a2) * blip2
        e1 = rng.normal(0.0, p["sigma"], n)
        e2 = rng.normal(0.0, p["sigma"], n)
        redraws = 0
        while True:
            t2 = np.exp(f2 + a2 * blip2 + e2)
            ttilde = np.exp(f1 + a1 * blip1 + e1)
            t1 = ttilde - t2 * np.exp(shift2)
            bad = np.flatnonzero(t1 <= 0)
            if bad.size == 0:
                break
            redraws += bad.size
            e1[bad] = rng.normal(0.0, p["sigma"], bad.size)
            e2[bad] = rng.normal(0.0, p["sigma"], bad.size)
        c = rng.exponential(p["censor_mean"], n)
        c1 = rng.uniform(0.0, c)
        c2 = _normal_pos(c - c1)
        cens = delta == 0
        y1 = np.where(cens, c1, t1)
        y2 = np.where(cens, c2, t2)
        cols = {
            "x1": x1, "a1": a1, "x2": x2, "a2": a2,
            "y1": y1, "y2": y2, "delta": delta, "eta2": np.ones(n),
        }
        opt = np.exp(f1 + (blip1 > 0) * blip1 + e1)
        return cols, opt, redraws

    def regime(self, data, p):
        s1, s2 = p["psi1"], p["psi2"]
        return np.column_stack(
            [(s1[0] + s1[1] * data["x1"] > 0).astype(float), (s2[0] + s2[1] * data["x2"] > 0).astype(float)]
        )

    def stages(self, p, flags, options):
        tf_correct = {1: "1 + x1 + x1^4", 2: "1 + x2 + x2^3"}
        weight = options.get("weight", "absdiff")
        return [
            SurvivalStageSpec(
                treatment=f"a{j}",
                time=f"y{j}",
                entry=None if j == 1 else "eta2",
                tf_terms=_pick(flags, "tf", j, tf_correct[j], f"1 + x{j}"),
                blip_terms=f"1 + x{j}",
                treat_terms=_pick(flags, "treat", j, f"1 + x{j}", "1"),
                cens_terms=_pick(flags, "cens", j, "1 + x1", "1"),
                weight=weight,
                stage=j,
            )
            for j in (1, 2)
        ]


class _DwsurvMtD(_Generator):
    method = "dwsurv_mt"
    defaults = {
        # rows: treatments 1..3; columns: (1, x11, x12) and (1, x22)
        "psi1": ((0.3, 0.4, -0.2), (-0.1, -0.3, 0.4), (-0.2, -0.1, -0.2)),
        "psi2": ((0.5, -0.7), (0.0, 0.8), (-0.5, -0.1)),
        "beta1": (0.2, 0.1, -0.1, 0.1, 0.05),
        "beta2": (-4.0, 0.1, 0.1),
        "alpha1": ((0.3, 0.5, -0.3), (-0.2, -0.4, 0.5)),
        "alpha2": ((0.2, 0.8, -0.5), (-0.3, -0.6, 0.4)),
        "entry_prob": 0.8,
        "censor_rate": 0.1,
        "sigma": 0.3,
    }

    @staticmethod
    def _multinomial(rng, logits):
        full = np.column_stack(logits + [np.zeros(logits[0].shape[0])])
        full = np.exp(full - full.max(axis=1, keepdims=True))
        prob = full / full.sum(axis=1, keepdims=True)
        u = rng.random(prob.shape[0])
        return (u[:, None] > np.cumsum(prob, axis=1)[:, :-1]).sum(axis=1).astype(float) + 1.0

    @staticmethod
    def _blips(psi, H):
        return H @ np.asarray(psi, dtype=float).T

    def draw(self, rng, n, p):
        def mixture():
            centre = np.where(rng.random(n) < 0.5, -1.0, 1.0)
            return centre + rng.standard_normal(n)

        x11, x12 = mixture(), mixture()
        (c1, c2) = p["alpha1"]
        a1 = self._multinomial(
            rng, [c1[0] + c1[1] * x11 + c1[2] * x12, c2[0] + c2[1] * x11 + c2[2] * x12]
        )
        eta2 = (rng.random(n) < p["entry_prob"]).astype(float)
        x22 = rng.integers(-1, 2, n).astype(float)
        (d1, d2) = p["alpha2"]
        a2 = self._multinomial(
            rng, [d1[0] + d1[1] * x22 + d1[2] * x22**2, d2[0] + d2[1] * x22 + d2[2] * x22**2]
        )
        B1 = self._blips(p["psi1"], np.column_stack([np.ones(n), x11, x12]))
        B2 = self._blips(p["psi2"], np.column_stack([np.ones(n), x22]))
        rows = np.arange(n)
        b = p["beta1"]
        f1 = b[0] + b[1] * np.log(np.abs(x11)) + b[2] * x12**2 + b[3] * x11 + b[4] * x12
        g = p["beta2"]
        f2 = g[0] + g[1] * np.exp(2 * x22) + g[2] * x22
        shift2 = B2.max(axis=1) - B2[rows, a2.astype(int) - 1]
        e1 = rng.normal(0.0, p["sigma"], n)
        e2 = rng.normal(0.0, p["sigma"], n)
        redraws = 0
        while True:
            ttilde = np.exp(f1 + B1[rows, a1.astype(int) - 1] + e1)
            t2 = eta2 * np.exp(f2 + B2[rows, a2.astype(int) - 1] + e2)
            t1 = ttilde - t2 * np.exp(shift2)
            bad = np.flatnonzero(t1 <= 0)
            if bad.size == 0:
                break
            redraws += bad.size
            e1[bad] = rng.normal(0.0, p["sigma"], bad.size)
            e2[bad] = rng.normal(0.0, p["sigma"], bad.size)
        c = rng.exponential(1.0 / p["censor_rate"], n)
        total = t1 + t2
        delta = (total <= c).astype(float)
        in_stage1 = c < t1
        y1 = np.where(in_stage1, c, t1)
        eta_obs = np.where(in_stage1, 0.0, eta2)
        y2 = np.where(delta == 1, t2, np.where(in_stage1, 0.0, c - t1))
        y2 = y2 * eta_obs
        cols = {
            "x11": x11, "x12": x12, "a1": a1, "y1": y1,
            "eta2": eta_obs, "x22": x22, "a2": a2, "y2": y2, "delta": delta,
        }
        opt = np.exp(f1 + B1.max(axis=1) + e1)
        return cols, opt, redraws

    def regime(self, data, p):
        n = data.n
        B1 = self._blips(p["psi1"], np.column_stack([np.ones(n), data["x11"], data["x12"]]))
        B2 = self._blips(p["psi2"], np.column_stack([np.ones(n), data["x22"]]))
        return np.column_stack([np.argmax(B1, axis=1) + 1.0, np.argmax(B2, axis=1) + 1.0])

    def stages(self, p, flags, options):
        tf_correct = {1: "1 + log(abs(x11)) + x12^2 + x11 + x12", 2: "1 + exp(2*x22) + x22"}
        blip = {1: "1 + x11 + x12", 2: "1 + x22"}
        treat = {1: "1 + x11 + x12", 2: "1 + x22 + x22^2"}
        cens = {1: "1 + x11 + x12", 2: "1 + x11 + x12 + x22"}
        m = options.get("treatment_weights", "uniform")
        return [
            MultiStageSpec(
                treatment=f"a{j}",
                time=f"y{j}",
                entry=None if j == 1 else "eta2",
                tf_terms=_pick(flags, "tf", j, tf_correct[j], "1"),
                blip_terms=blip[j],
                treat_terms=_pick(flags, "treat", j, treat[j], "1"),
                cens_terms=_pick(flags, "cens", j, cens[j], "1"),
                n_treatments=3,
                treatment_weights=m,
                stage=j,
            )
            for j in (1, 2)
        ]


class _MeasurementError(_Generator):
    n_stages = 1
    defaults = {"psi": (1.0, 1.0), "beta": (1.0, 1.0), "error_sd": 1.0, "validation_fraction": 0.2}

    def draw(self, rng, n, p):
        x = rng.standard_normal(n)
        xstar = x + p["error_sd"] * rng.standard_normal(n)
        a = (rng.random(n) < expit(xstar)).astype(float)
        (b0, b1), (s0, s1) = p["beta"], p["psi"]
        eps = rng.standard_normal(n)
        blip = s0 + s1 * x
        y = b0 + b1 * x + a * blip + eps
        valid = (rng.random(n) < p["validation_fraction"]).astype(float)
        cols = {"x": x, "xstar": xstar, "a": a, "y": y, "valid": valid}
        return cols, b0 + b1 * x + _normal_pos(blip) + eps, 0

    def regime(self, data, p):
        s0, s1 = p["psi"]
        return (s0 + s1 * data["x"] > 0).astype(float)[:, None]

    def value(self, data, actions, p):
        (b0, b1), (s0, s1) = p["beta"], p["psi"]
        x = data["x"]
        return b0 + b1 * x + actions[:, 0] * (s0 + s1 * x)

    def stages(self, p, flags, options):
        x = options.get("covariate", "xstar")
        return [
            StageSpec(
                treatment="a",
                tf_terms=_pick(flags, "tf", 1, f"1 + {x}", "1"),
                blip_terms=f"1 + {x}",
                treat_terms=_pick(flags, "treat", 1, f"1 + {x}", "1"),
                stage=1,
            )
        ]


SCENARIOS: dict[str, _Generator] = {
    "dwols_basic": _DwolsBasic(),
    "gdwols_appA": _GdwolsA(),
    "dwglm_appB": _DwglmB(),
    "dwsurv_appC": _DwsurvC(),
    "dwsurvmt_appD": _DwsurvMtD(),
    "dwols_measerr": _MeasurementError(),
}

_MODELS = ("tf", "treat", "cens")


def _lookup(name: str) -> _Generator:
    try:
        return SCENARIOS[name]
    except KeyError:
        raise UnknownScenario(f"unknown scenario {name!r}; known: {sorted(SCENARIOS)}") from None


def _normalise_flags(flags) -> dict[str, tuple[int, ...]]:
    out: dict[str, tuple[int, ...]] = {}
    for model, stages in dict(flags or {}).items():
        if model not in _MODELS:
            raise ValidationError(f"unknown model {model!r} in misspecification flags; use {_MODELS}")
        if isinstance(stages, (int, np.integer)):
            stages = (int(stages),)
        out[model] = tuple(int(s) for s in stages)
    return out


@dataclass(frozen=True)
class Scenario:
    """A named generator plus sample size, seed and parameter overrides.

    Parameters
    ----------
    name : str
        One of :data:`SCENARIOS`.
    n : int
    seed : int
    params : mapping, optional
        Overrides of the generator's true parameters.
    misspecify : mapping of {"tf", "treat", "cens"} to stage indices
        Analysis models to replace by misspecified ones.
    """

    name: str
    n: int = 10000
    seed: int = 0
    params: Mapping[str, Any] = field(default_factory=dict)
    misspecify: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        gen = _lookup(self.name)
        if int(self.n) != self.n or self.n < 1:
            raise ValidationError(f"n must be a positive integer, got {self.n}")
        unknown = set(self.params) - set(gen.defaults)
        if unknown:
            raise ValidationError(f"unknown parameters for {self.name}: {sorted(unknown)}")
        object.__setattr__(self, "misspecify", _normalise_flags(self.misspecify))

    @property
    def generator(self) -> _Generator:
        return _lookup(self.name)

    @property
    def n_stages(self) -> int:
        return self.generator.n_stages

    @property
    def method(self) -> str:
        """Estimator the scenario is designed for."""
        return self.generator.method

    @property
    def true_params(self) -> dict[str, Any]:
        params = dict(self.generator.defaults)
        params.update(self.params)
        return params

    def generate(self) -> GeneratedData:
        rng = np.random.default_rng(np.random.SeedSequence(int(self.seed)))
        cols, opt, redraws = self.generator.draw(rng, int(self.n), self.true_params)
        data = Dataset(cols)
        actions = self.generator.regime(data, self.true_params)
        return GeneratedData(data, actions, opt, self, redraws)

    def true_regime(self, data) -> np.ndarray:
        """True optimal actions, shape (n, K)."""
        return self.generator.regime(as_dataset(data), self.true_params)

    def value(self, data, actions) -> np.ndarray:
        """Expected outcome per individual under the given (n, K) actions."""
        actions = np.asarray(actions, dtype=np.float64).reshape(as_dataset(data).n, -1)
        return self.generator.value(as_dataset(data), actions, self.true_params)

    def analysis_stages(self, misspecify: Mapping[str, Any] | None = None, **options) -> list:
        """Stage specifications for fitting this scenario.

        Parameters
        ----------
        misspecify : mapping, optional
            Overrides the scenario's own flags.
        **options
            Scenario-specific choices such as ``weight`` or, for
            ``dwols_measerr``, ``covariate``.
        """
        flags = self.misspecify if misspecify is None else _normalise_flags(misspecify)
        return self.generator.stages(self.true_params, flags, options)


def generate(scenario: Scenario) -> GeneratedData:
    """Draw data for ``scenario``."""
    return scenario.generate()


def true_regime(scenario: Scenario, rows) -> np.ndarray:
    """True optimal actions for the covariate rows under ``scenario``."""
    return scenario.true_regime(rows)
