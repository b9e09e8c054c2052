"""Dynamic weighted ordinary least squares for binary treatments.

Stages are fitted backwards. At each stage a propensity model gives balancing
weights, a weighted regression of the pseudo-outcome on
``[h_beta | a * h_psi]`` estimates the blip, and the fitted regret of the
received action is added to the pseudo-outcome passed to the earlier stage.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, ClassVar, Mapping, Sequence

import numpy as np

from .base import RegimeEstimator
from .exceptions import InvalidTreatment, StageOrderError, ValidationError
from .glm_core import Coefficients, LogisticFit, logistic_irls, weighted_least_squares
from .regime import BinaryRule, Regime
from .tabular import Dataset, DesignMatrix, TermList, TermsLike, as_dataset, as_terms, build_design
from .weights import absdiff_weights, binary_ipw_weights

__all__ = ["StageSpec", "StageFit", "DTRFit", "fit_dwols", "DWOLS"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class StageSpec:
    """Model declaration for one decision stage.

    Parameters
    ----------
    treatment : str
        Column holding the treatment received at this stage.
    tf_terms : str or TermList
        Treatment-free model terms.
    blip_terms : str or TermList
        Terms interacting with treatment in the blip.
    treat_terms : str or TermList
        Treatment (propensity) model terms; ``"1"`` is the null model.
    weight : str
        Balancing weight rule. Binary stages accept ``"absdiff"`` and ``"ipw"``.
    propensity_column : str, optional
        Column with known treatment probabilities to use instead of fitting
        the treatment model.
    stage : int, optional
        1-based stage index, checked against the position in the stage list.
    """

    treatment: str
    tf_terms: TermsLike
    blip_terms: TermsLike
    treat_terms: TermsLike = "1"
    weight: str = "absdiff"
    propensity_column: Any = None
    stage: int | None = None

    weight_rules: ClassVar[tuple[str, ...]] = ("absdiff", "ipw")

    def __post_init__(self):
        for name in ("tf_terms", "blip_terms", "treat_terms"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, as_terms(value))
        if self.blip_terms is None or self.blip_terms.n_columns == 0:
            raise ValidationError("blip_terms must contain at least one column")
        if self.tf_terms is None:
            object.__setattr__(self, "tf_terms", TermList((), True))
        if self.treat_terms is None:
            object.__setattr__(self, "treat_terms", TermList((), True))
        if self.weight not in self.weight_rules:
            raise ValidationError(
                f"weight rule {self.weight!r} not in {self.weight_rules} for {type(self).__name__}"
            )

    def variables(self) -> tuple[str, ...]:
        """Columns this stage reads."""
        names = [self.treatment]
        for terms in (self.tf_terms, self.blip_terms, self.treat_terms):
            names.extend(terms.variables)
        return tuple(dict.fromkeys(names))


@dataclass(frozen=True, eq=False)
class StageFit:
    """Everything estimated at one stage.

    Vectors indexed by individual (``weights``, ``pseudo_outcome``) have the
    full dataset length; rows outside ``rows`` carry weight zero.
    """

    stage: int
    spec: StageSpec
    psi: Coefficients
    beta: Coefficients
    alpha: Coefficients | None
    weights: np.ndarray
    pseudo_outcome: np.ndarray
    rows: np.ndarray
    rule: Any
    covariance: np.ndarray | None = None
    treatment_converged: bool = True
    treatment_iterations: int = 0
    extras: Mapping[str, Any] = field(default_factory=dict)

    @property
    def psi_covariance(self) -> np.ndarray | None:
        """Covariance block of the blip coefficients, if available."""
        if self.covariance is None:
            return None
        p = len(self.beta)
        return self.covariance[p:, p:]


@dataclass(frozen=True, eq=False)
class DTRFit:
    """Result of a backward-induction fit."""

    method: str
    stages: tuple[StageFit, ...]
    regime: Regime
    n: int
    notes: tuple[str, ...] = ()

    def psi_vector(self) -> np.ndarray:
        return np.concatenate([s.psi.values for s in self.stages])

    def psi_labels(self) -> list[str]:
        return [f"stage{s.stage}:{label}" for s in self.stages for label in s.psi.labels]

    def stage(self, j: int) -> StageFit:
        return self.stages[j - 1]


# -- helpers shared by the binary-treatment estimators --------------------------


def check_stages(stages: Sequence[StageSpec], kind: type = StageSpec) -> tuple:
    stages = tuple(stages)
    if not stages:
        raise ValidationError("at least one stage is required")
    for j, spec in enumerate(stages, start=1):
        if not isinstance(spec, kind):
            raise ValidationError(f"stage {j} must be a {kind.__name__}, got {type(spec).__name__}")
        if spec.stage is not None and spec.stage != j:
            raise StageOrderError(f"stage at position {j} declares index {spec.stage}")
    return stages


def binary_column(data: Dataset, name: str) -> np.ndarray:
    a = data[name]
    if not np.all((a == 0) | (a == 1)):
        raise InvalidTreatment(f"column {name!r} must be binary 0/1")
    return a


def fit_propensity(data: Dataset, spec: StageSpec, a: np.ndarray):
    """Treatment probabilities P(A=1|h) and the fitted model (None if supplied)."""
    if spec.propensity_column is not None:
        return data[spec.propensity_column], None
    X = build_design(data, spec.treat_terms)
    fit = logistic_irls(X, a)
    return fit.fitted_probabilities, fit



def binary_weights(rule: str, pi: np.ndarray, a: np.ndarray) -> np.ndarray:
    if rule == "absdiff":
        return absdiff_weights(pi, a)
    if rule == "ipw":
        return binary_ipw_weights(pi, a)
    raise ValidationError(f"unknown weight rule {rule!r}")


def stacked_design(Xtf: DesignMatrix, blocks: Sequence[tuple[str, np.ndarray, DesignMatrix]]) -> DesignMatrix:
    """``[Xtf | s_1 * X_1 | ...]`` where each block is scaled row-wise."""
    values = [Xtf.values]
    labels = list(Xtf.column_labels)
    for prefix, scale, X in blocks:
        values.append(scale[:, None] * X.values)
        labels.extend(f"{prefix}:{lab}" for lab in X.column_labels)
    return DesignMatrix(np.hstack(values), tuple(labels))


def split_coefficients(wls_coef: Coefficients, sizes: Sequence[tuple[int, tuple[str, ...]]]):
    out, start = [], 0
    for size, labels in sizes:
        out.append(Coefficients(wls_coef.values[start:start + size], labels))
        start += size
    return out


def treatment_meta(fit: LogisticFit | None) -> dict:
    if fit is None:
        return {"alpha": None, "treatment_converged": True, "treatment_iterations": 0}
    return {
        "alpha": fit.coefficients,
        "treatment_converged": fit.converged,
        "treatment_iterations": fit.iterations,
    }


# -- estimator ----------------------------------------------------------------


def fit_dwols(data, stages: Sequence[StageSpec], outcome: str = "y") -> DTRFit:
    """Fit a K-stage regime by dWOLS.

    Parameters
    ----------
    data : Dataset or mapping
    stages : sequence of StageSpec
        Stage 1 first.
    outcome : str
        Continuous outcome column (larger is better).

    Returns
    -------
    DTRFit
    """
    data = as_dataset(data)
    stages = check_stages(stages)
    y = data[outcome]
    everyone = np.ones(data.n, dtype=bool)
    pseudo = y
    fits: list[StageFit] = []
    for j in range(len(stages) - 1, -1, -1):
        spec = stages[j]
        a = binary_column(data, spec.treatment)
        pi, tfit = fit_propensity(data, spec, a)
        w = binary_weights(spec.weight, pi, a)
        Xtf = build_design(data, spec.tf_terms)
        Xb = build_design(data, spec.blip_terms)
        X = stacked_design(Xtf, [(spec.treatment, a, Xb)])
        wls = weighted_least_squares(X, pseudo, w)
        beta, psi = split_coefficients(
            wls.coefficients, [(Xtf.shape[1], Xtf.column_labels), (Xb.shape[1], Xb.column_labels)]
        )
        rule = BinaryRule(psi, spec.blip_terms)
        fits.append(
            StageFit(
                stage=j + 1,
                spec=spec,
                psi=psi,
                beta=beta,
                weights=w,
                pseudo_outcome=pseudo,
                rows=everyone,
                rule=rule,
                covariance=wls.covariance,
                extras={"propensity": pi},
                **treatment_meta(tfit),
            )
        )
        blip = Xb.values @ psi.values
        pseudo = pseudo + blip * ((blip > 0) - a)
    fits.reverse()
    return DTRFit("dwols", tuple(fits), Regime(tuple(f.rule for f in fits)), data.n)


class DWOLS(RegimeEstimator):
    """dWOLS regime estimator for binary treatments and continuous outcomes.

    Parameters
    ----------
    stages : sequence of StageSpec
        One specification per decision stage, stage 1 first.
    outcome : str, default="y"
        Outcome column.

    Examples
    --------
    >>> from dtrwols import DWOLS, StageSpec
    >>> from dtrwols.simgen import Scenario
    >>> sc = Scenario("dwols_basic", n=2000, seed=1)
    >>> est = DWOLS(stages=sc.analysis_stages()).fit(sc.generate().data)
    >>> est.predict(sc.generate().data).shape
    (2000, 2)
    """

    def __init__(self, stages: Sequence[StageSpec] = (), outcome: str = "y"):
        self.stages = stages
        self.outcome = outcome

    def _fit_dataset(self, data):
        return fit_dwols(data, self.stages, self.outcome)
