"""Dynamic weighted survival modelling for right-censored outcomes.

Each stage fits an accelerated failure time model for log survival time by
weighted least squares over individuals who entered the stage and were not
censored. Weights combine ``|a - pi|`` with the inverse probability of
remaining uncensored. The pseudo survival time for an earlier stage adds the
later-stage time rescaled to the optimal later treatment::

    y_tilde_j = y_j + eta_{j+1} * y_tilde_{j+1} * exp(psi'h * (a_opt - a))
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .base import RegimeEstimator
from .exceptions import (
    InvalidData,
    MissingClass,
    NonpositiveSurvivalTime,
    ValidationError,
)
from .dwols import (
    DTRFit,
    StageFit,
    StageSpec,
    binary_column,
    check_stages,
    fit_propensity,
    split_coefficients,
    stacked_design,
    treatment_meta,
)
from .glm_core import Coefficients, logistic_irls, weighted_least_squares
from .regime import BinaryRule, Regime
from .tabular import Dataset, DesignMatrix, TermsLike, as_dataset, as_terms, build_design
from .weights import binary_ipw_weights, censoring_absdiff_weights

__all__ = ["SurvivalStageSpec", "CensoringFit", "fit_censoring", "fit_dwsurv", "DWSurv"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SurvivalStageSpec(StageSpec):
    """Stage declaration for survival outcomes.

    Parameters
    ----------
    time : str
        Column with the time spent in this stage (zero for non-entrants).
    entry : str, optional
        0/1 column flagging entry into the stage; everyone enters when omitted.
    cens_terms : str or TermList, optional
        Terms of the logistic model for being uncensored. ``None`` declares
        that no censoring model is used at this stage.
    censoring_column : str, optional
        Column of known probabilities of remaining uncensored.
    """

    time: str = ""
    entry: str | None = None
    cens_terms: TermsLike | None = None
    censoring_column: Any = None

    def __post_init__(self):
        super().__post_init__()
        if not self.time:
            raise ValidationError("survival stages need a time column")
        if self.cens_terms is not None:
            object.__setattr__(self, "cens_terms", as_terms(self.cens_terms))

    def variables(self) -> tuple[str, ...]:
        names = list(super().variables()) + [self.time]
        if self.entry:
            names.append(self.entry)
        if self.cens_terms is not None:
            names.extend(self.cens_terms.variables)
        return tuple(dict.fromkeys(names))


@dataclass(frozen=True, eq=False)
class CensoringFit:
    """Logistic model for ``P(uncensored | h, a)``."""

    coefficients: Coefficients
    fitted: np.ndarray
    converged: bool


def fit_censoring(data, cens_terms: TermsLike, delta_column: str = "delta") -> CensoringFit:
    """Logistic regression of the uncensored indicator on ``cens_terms``.

    Raises
    ------
    MissingClass
        If every individual is censored or every individual is uncensored.
    """
    data = as_dataset(data)
    delta = binary_column(data, delta_column)
    fit = logistic_irls(build_design(data, cens_terms), delta)
    return CensoringFit(fit.coefficients, fit.fitted_probabilities, fit.converged)


def stage_entry(data: Dataset, spec: SurvivalStageSpec) -> np.ndarray:
    if not spec.entry:
        return np.ones(data.n)
    return binary_column(data, spec.entry)


def censoring_probability(sub: Dataset, spec: SurvivalStageSpec, delta_column: str, stage: int):
    """Probabilities of remaining uncensored among stage entrants."""
    if spec.censoring_column is not None:
        return sub[spec.censoring_column], None
    if spec.cens_terms is None:
        return np.ones(sub.n), None
    try:
        cfit = fit_censoring(sub, spec.cens_terms, delta_column)
    except MissingClass:
        warnings.warn(
            f"stage {stage}: no censored individuals; using uncensored probability 1",
            RuntimeWarning,
            stacklevel=3,
        )
        return np.ones(sub.n), None
    return cfit.fitted, cfit


def survival_weights(rule: str, pi, a, g) -> np.ndarray:
    if rule == "absdiff":
        return censoring_absdiff_weights(pi, a, g)
    if rule == "ipw":
        return binary_ipw_weights(pi, a, g)
    raise ValidationError(f"unknown weight rule {rule!r}")


def log_times(times: np.ndarray, stage: int) -> np.ndarray:
    bad = np.flatnonzero(~(times > 0))
    if bad.size:
        raise NonpositiveSurvivalTime(
            f"stage {stage}: {bad.size} uncensored entrants have nonpositive (pseudo) survival time"
        )
    return np.log(times)


def pseudo_survival(y_j, later) -> np.ndarray:
    """Stage pseudo survival time given ``(y_tilde, shift, eta)`` of the next stage."""
    if later is None:
        return y_j
    y_next, shift_next, eta_next = later
    return y_j + eta_next * y_next * np.exp(shift_next)


def fit_dwsurv(data, stages: Sequence[SurvivalStageSpec], delta: str = "delta") -> DTRFit:
    """Fit a K-stage regime for right-censored survival times.

    Parameters
    ----------
    data : Dataset or mapping
    stages : sequence of SurvivalStageSpec
    delta : str
        Overall 0/1 indicator, 1 when the survival time is observed.

    Returns
    -------
    DTRFit
        ``rows`` of each stage marks the uncensored entrants used in its
        regression.
    """
    data = as_dataset(data)
    stages = check_stages(stages, SurvivalStageSpec)
    d = binary_column(data, delta)
    n = data.n
    fits: list[StageFit] = []
    later = None
    for j in range(len(stages) - 1, -1, -1):
        spec = stages[j]
        stage = j + 1
        eta = stage_entry(data, spec)
        entered = eta == 1
        if not np.any(entered):
            raise InvalidData(f"stage {stage}: nobody entered")
        pseudo = pseudo_survival(data[spec.time], later)
        sub = data.take(entered)
        a = binary_column(sub, spec.treatment)
        pi, tfit = fit_propensity(sub, spec, a)
        g, cfit = censoring_probability(sub, spec, delta, stage)
        w_sub = survival_weights(spec.weight, pi, a, g)
        Xtf = build_design(sub, spec.tf_terms)
        Xb = build_design(sub, spec.blip_terms)
        X = stacked_design(Xtf, [(spec.treatment, a, Xb)])
        used = d[entered] == 1
        z = log_times(pseudo[entered][used], stage)
        Xr = DesignMatrix(X.values[used], X.column_labels)
        wls = weighted_least_squares(Xr, z, w_sub[used])
        beta, psi = split_coefficients(
            wls.coefficients, [(Xtf.shape[1], Xtf.column_labels), (Xb.shape[1], Xb.column_labels)]
        )
        rows = np.zeros(n, dtype=bool)
        rows[np.flatnonzero(entered)[used]] = True
        weights = np.zeros(n)
        weights[rows] = w_sub[used]
        extras: dict[str, Any] = {"propensity": pi, "uncensored_probability": g}
        if cfit is not None:
            extras["censoring"] = cfit.coefficients
        fits.append(
            StageFit(
                stage=stage,
                spec=spec,
                psi=psi,
                beta=beta,
                weights=weights,
                pseudo_outcome=pseudo,
                rows=rows,
                rule=BinaryRule(psi, spec.blip_terms),
                covariance=wls.covariance,
                extras=extras,
                **treatment_meta(tfit),
            )
        )
        blip = Xb.values @ psi.values
        shift = np.zeros(n)
        shift[entered] = blip * ((blip > 0) - a)
        later = (pseudo, shift, eta)
        log.debug("stage %d: %d entrants, %d uncensored", stage, sub.n, int(used.sum()))
    fits.reverse()
    return DTRFit("dwsurv", tuple(fits), Regime(tuple(f.rule for f in fits)), n)


class DWSurv(RegimeEstimator):
    """Regime estimator for censored survival times and binary treatments.

    Parameters
    ----------
    stages : sequence of SurvivalStageSpec
    delta : str, default="delta"
        Column equal to 1 for uncensored individuals.
    """

    def __init__(self, stages: Sequence[SurvivalStageSpec] = (), delta: str = "delta"):
        self.stages = stages
        self.delta = delta

    def _fit_dataset(self, data):
        return fit_dwsurv(data, self.stages, self.delta)
