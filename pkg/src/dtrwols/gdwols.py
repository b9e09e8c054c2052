"""Generalised dWOLS for continuous doses with blips quadratic in the dose.

The blip at a stage is ``a * psi1'h1 + a^2 * psi2'h2``. Balancing weights come
from a Gaussian generalised propensity score, either as inverse densities
or stabilised by a uniform numerator.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, ClassVar, Mapping, Sequence, Union

import numpy as np

from .base import RegimeEstimator
from .exceptions import ConcavityViolation, DegenerateGps, OutOfSupport, ValidationError
from .glm_core import Coefficients, gaussian_density, weighted_least_squares
from .dwols import DTRFit, StageFit, StageSpec, check_stages, split_coefficients, stacked_design
from .regime import DoseRule, Regime
from .tabular import TermsLike, as_dataset, as_terms, build_design
from .weights import continuous_ipw

__all__ = [
    "UniformContinuous",
    "UniformDiscrete",
    "DoseStageSpec",
    "GpsFit",
    "fit_gps",
    "sipw_numerator",
    "fit_gdwols",
    "GDWOLS",
]


@dataclass(frozen=True)
class UniformContinuous:
    """Flat numerator density on ``[lo, hi]``."""

    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValidationError(f"need lo < hi, got [{self.lo}, {self.hi}]")


@dataclass(frozen=True)
class UniformDiscrete:
    """Empirical frequencies over ``bins`` equal-width bins of the observed range."""

    bins: int = 5

    def __post_init__(self):
        if int(self.bins) != self.bins or self.bins < 1:
            raise ValidationError(f"bins must be a positive integer, got {self.bins}")


NumeratorKind = Union[UniformContinuous, UniformDiscrete]


def as_numerator(kind) -> NumeratorKind:
    if kind is None:
        return UniformDiscrete(5)
    if isinstance(kind, (UniformContinuous, UniformDiscrete)):
        return kind
    if isinstance(kind, Mapping):
        name = kind.get("kind", "discrete")
        if name in ("discrete", "uniform_discrete"):
            return UniformDiscrete(int(kind.get("bins", 5)))
        if name in ("continuous", "uniform_continuous"):
            return UniformContinuous(float(kind["lo"]), float(kind["hi"]))
    raise ValidationError(f"cannot interpret SIPW numerator {kind!r}")


def sipw_numerator(a, kind: NumeratorKind) -> np.ndarray:
    """Treatment-only numerator for stabilised weights.

    Raises
    ------
    OutOfSupport
        If a continuous support does not contain every dose.
    """
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    kind = as_numerator(kind)
    if isinstance(kind, UniformContinuous):
        if np.any((a < kind.lo) | (a > kind.hi)):
            raise OutOfSupport(f"doses fall outside [{kind.lo}, {kind.hi}]")
        return np.full(a.shape, 1.0 / (kind.hi - kind.lo))
    lo, hi = float(a.min()), float(a.max())
    if hi == lo:
        return np.ones_like(a)
    edges = np.linspace(lo, hi, kind.bins + 1)
    idx = np.clip(np.searchsorted(edges, a, side="right") - 1, 0, kind.bins - 1)
    freq = np.bincount(idx, minlength=kind.bins) / a.size
    return freq[idx]


@dataclass(frozen=True, eq=False)
class GpsFit:
    """Gaussian dose model ``A | h ~ N(alpha'h, sd^2)``."""

    mean_coefficients: Coefficients
    sd_hat: float
    densities: np.ndarray
    fitted_mean: np.ndarray


def fit_gps(data, gps_terms: TermsLike, treatment_column: str) -> GpsFit:
    """Least-squares mean model with residual sd on ``n - p`` degrees of freedom.

    Raises
    ------
    DegenerateGps
        If the dose is an exact function of the terms.
    """
    data = as_dataset(data)
    X = build_design(data, gps_terms)
    a = data[treatment_column]
    fit = weighted_least_squares(X, a)
    n, p = X.shape
    if n <= p:
        raise DegenerateGps("no residual degrees of freedom for the dose model")
    resid = fit.residuals
    sd = float(np.sqrt(resid @ resid / (n - p)))
    scale = max(1.0, float(np.max(np.abs(a))))
    if not sd > 1e-10 * scale:
        raise DegenerateGps("dose is deterministic given the dose-model terms")
    mean = a - resid
    return GpsFit(fit.coefficients, sd, gaussian_density(a, mean, sd), mean)


@dataclass(frozen=True)
class DoseStageSpec(StageSpec):
    """Stage declaration for a continuous dose.

    ``blip_terms`` multiply the dose and ``quadratic_terms`` multiply its
    square. ``treat_terms`` give the mean of the Gaussian dose model.
    ``weight`` is ``"ipw"`` or ``"sipw"``; ``numerator`` configures the
    latter (default five equal-width bins).
    """

    weight: str = "ipw"
    quadratic_terms: TermsLike = "1"
    numerator: Any = None

    weight_rules: ClassVar[tuple[str, ...]] = ("ipw", "sipw")

    def __post_init__(self):
        super().__post_init__()
        object.__setattr__(self, "quadratic_terms", as_terms(self.quadratic_terms))
        if self.quadratic_terms.n_columns == 0:
            raise ValidationError("quadratic_terms must contain at least one column")
        if self.weight == "sipw":
            object.__setattr__(self, "numerator", as_numerator(self.numerator))

    def variables(self) -> tuple[str, ...]:
        return tuple(dict.fromkeys(super().variables() + self.quadratic_terms.variables))


def dose_regret(lin: np.ndarray, quad: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Blip at the interior optimum minus blip at the received dose."""
    if np.any(quad >= 0):
        raise ConcavityViolation(
            f"blip is not concave in the dose for {np.count_nonzero(quad >= 0)} individuals"
        )
    opt = -lin / (2.0 * quad)
    return (opt * lin + opt * opt * quad) - (a * lin + a * a * quad)


def fit_gdwols(data, stages: Sequence[DoseStageSpec], outcome: str = "y") -> DTRFit:
    """Fit a K-stage dose regime backwards.

    Raises
    ------
    ConcavityViolation
        If a later-stage fit is not concave in the dose for some individual,
        which leaves the regret needed by earlier stages undefined.
    """
    data = as_dataset(data)
    stages = check_stages(stages, DoseStageSpec)
    pseudo = data[outcome]
    everyone = np.ones(data.n, dtype=bool)
    fits: list[StageFit] = []
    for j in range(len(stages) - 1, -1, -1):
        spec = stages[j]
        a = data[spec.treatment]
        if spec.propensity_column is not None:
            density = data[spec.propensity_column]
            gps = None
        else:
            gps = fit_gps(data, spec.treat_terms, spec.treatment)
            density = gps.densities
        numerator = sipw_numerator(a, spec.numerator) if spec.weight == "sipw" else None
        w = continuous_ipw(density, numerator)
        Xtf = build_design(data, spec.tf_terms)
        X1 = build_design(data, spec.blip_terms)
        X2 = build_design(data, spec.quadratic_terms)
        X = stacked_design(Xtf, [(spec.treatment, a, X1), (f"{spec.treatment}^2", a * a, X2)])
        wls = weighted_least_squares(X, pseudo, w)
        beta, psi1, psi2 = split_coefficients(
            wls.coefficients,
            [
                (Xtf.shape[1], Xtf.column_labels),
                (X1.shape[1], X1.column_labels),
                (X2.shape[1], X2.column_labels),
            ],
        )
        psi = Coefficients(
            np.concatenate([psi1.values, psi2.values]),
            psi1.labels + tuple(f"{spec.treatment}^2:{lab}" for lab in psi2.labels),
        )
        rule = DoseRule(psi1, psi2, spec.blip_terms, spec.quadratic_terms)
        extras: dict[str, Any] = {"density": density}
        if gps is not None:
            extras["gps_sd"] = gps.sd_hat
        fits.append(
            StageFit(
                stage=j + 1,
                spec=spec,
                psi=psi,
                beta=beta,
                alpha=None if gps is None else gps.mean_coefficients,
                weights=w,
                pseudo_outcome=pseudo,
                rows=everyone,
                rule=rule,
                covariance=wls.covariance,
                extras=extras,
            )
        )
        if j > 0:
            lin = X1.values @ psi1.values
            quad = X2.values @ psi2.values
            pseudo = pseudo + dose_regret(lin, quad, a)
    fits.reverse()
    return DTRFit("gdwols", tuple(fits), Regime(tuple(f.rule for f in fits)), data.n)


class GDWOLS(RegimeEstimator):
    """Dose-finding regime estimator with quadratic blips.

    Parameters
    ----------
    stages : sequence of DoseStageSpec
    outcome : str, default="y"
    """

    def __init__(self, stages: Sequence[DoseStageSpec] = (), outcome: str = "y"):
        self.stages = stages
        self.outcome = outcome

    def _fit_dataset(self, data):
        return fit_gdwols(data, self.stages, self.outcome)
