"""Survival regimes with more than two treatment options.

Blips are defined against an ``m``-weighted average over treatments, so the
stage coefficient rows satisfy ``sum_a m(a) psi_a = 0``. Eliminating the
reference row ``psi_N`` turns the stage model into one weighted regression on
transformed blip columns.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, ClassVar, Sequence

import numpy as np

from .base import RegimeEstimator
from .exceptions import DimensionMismatch, InvalidData, InvalidTreatment, ValidationError
from .dwols import DTRFit, StageFit, check_stages
from .dwsurv import (
    SurvivalStageSpec,
    censoring_probability,
    log_times,
    pseudo_survival,
    stage_entry,
)
from .glm_core import Coefficients, multinomial_irls, weighted_least_squares
from .regime import ArgmaxRule, Regime
from .tabular import Dataset, DesignMatrix, as_dataset, build_design
from .weights import TreatmentWeights, multicategory_weights

__all__ = [
    "MultiStageSpec",
    "TargetedBlipFit",
    "transform_design",
    "transformed_blocks",
    "blip_matrix_value",
    "fit_dwsurv_mt",
    "DWSurvMT",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MultiStageSpec(SurvivalStageSpec):
    """Stage declaration for a treatment coded ``1..N``.

    Parameters
    ----------
    n_treatments : int, optional
        ``N``; inferred from the largest observed label when omitted.
    treatment_weights : {"uniform", "empirical"} or sequence of float
        The weights ``m(a)`` defining the blip reference.
    propensity_column : sequence of str, optional
        ``N`` columns of known treatment probabilities.
    """

    weight: str = "multicategory"
    n_treatments: int | None = None
    treatment_weights: Any = "uniform"

    weight_rules: ClassVar[tuple[str, ...]] = ("multicategory",)

    def __post_init__(self):
        super().__post_init__()
        tw = self.treatment_weights
        if isinstance(tw, str):
            if tw not in ("uniform", "empirical"):
                raise ValidationError(f"treatment_weights must be 'uniform', 'empirical' or numbers, got {tw!r}")
        elif not isinstance(tw, TreatmentWeights):
            object.__setattr__(self, "treatment_weights", TreatmentWeights.from_mapping(tw))
        if isinstance(self.propensity_column, str):
            raise ValidationError("propensity_column must list one column per treatment")

    def resolve_weights(self, a: np.ndarray, N: int) -> TreatmentWeights:
        tw = self.treatment_weights
        if tw == "uniform":
            return TreatmentWeights.uniform(N)
        if tw == "empirical":
            return TreatmentWeights.empirical(a, N)
        if tw.n_treatments != N:
            raise ValidationError(f"{tw.n_treatments} treatment weights for {N} treatments")
        return tw


@dataclass(frozen=True, eq=False)
class TargetedBlipFit:
    """Stage blip coefficients, one row per treatment, and treatment-free fit."""

    psi: np.ndarray
    beta: Coefficients
    m: TreatmentWeights
    labels: tuple[str, ...]


def _check_m(m) -> TreatmentWeights:
    return m if isinstance(m, TreatmentWeights) else TreatmentWeights.from_mapping(m)


def transform_design(h_psi_row, a_i: int, m) -> np.ndarray:
    """Transformed blip columns for one individual as ``N - 1`` blocks.

    Block ``a`` is ``h`` when ``a_i = a``, ``-(m(a)/m(N)) h`` when ``a_i = N``
    and zero otherwise.
    """
    m = _check_m(m)
    N = m.n_treatments
    if int(a_i) != a_i or not 1 <= a_i <= N:
        raise InvalidTreatment(f"treatment {a_i} not in 1..{N}")
    h = np.asarray(h_psi_row, dtype=np.float64).reshape(-1)
    out = np.zeros((N - 1, h.size))
    if a_i == N:
        out[:] = -(m.values[:-1] / m.values[-1])[:, None] * h
    else:
        out[int(a_i) - 1] = h
    return out


def transformed_blocks(Xb: np.ndarray, a: np.ndarray, m: TreatmentWeights) -> np.ndarray:
    """Vectorised :func:`transform_design`: an ``n x (N - 1) q`` matrix."""
    N = m.n_treatments
    ratio = m.values[:-1] / m.values[-1]
    blocks = []
    for k in range(N - 1):
        coef = (a == k + 1).astype(np.float64) - (a == N) * ratio[k]
        blocks.append(coef[:, None] * Xb)
    return np.hstack(blocks)


def recover_reference(free: np.ndarray, m: TreatmentWeights) -> np.ndarray:
    """Append ``psi_N = -sum_{a<N} m(a) psi_a / m(N)`` to the free rows."""
    last = -(m.values[:-1] @ free) / m.values[-1]
    return np.vstack([free, last])


def _full_covariance(cov: np.ndarray, p: int, q: int, m: TreatmentWeights) -> np.ndarray:
    # psi_full = A psi_free, so Cov[beta, psi_full] = J Cov J' with J = diag(I, A)
    N = m.n_treatments
    ratio = -(m.values[:-1] / m.values[-1])
    A = np.vstack([np.eye((N - 1) * q), np.kron(ratio[None, :], np.eye(q))])
    J = np.zeros((p + N * q, p + (N - 1) * q))
    J[:p, :p] = np.eye(p)
    J[p:, p:] = A
    return J @ cov @ J.T


def blip_matrix_value(fit, h_psi_row) -> np.ndarray:
    """Targeted blip of every treatment at one evaluated blip-design row."""
    psi = fit.psi
    h = np.asarray(h_psi_row, dtype=np.float64).reshape(-1)
    if h.size != psi.shape[1]:
        raise DimensionMismatch(f"history row has {h.size} entries, expected {psi.shape[1]}")
    return psi @ h


def _categorical(sub: Dataset, spec: MultiStageSpec) -> tuple[np.ndarray, int]:
    a = sub[spec.treatment]
    if not np.all((a == np.round(a)) & (a >= 1)):
        raise InvalidTreatment(f"column {spec.treatment!r} must hold labels 1..N")
    N = int(a.max()) if spec.n_treatments is None else int(spec.n_treatments)
    if a.max() > N or N < 2:
        raise InvalidTreatment(f"column {spec.treatment!r} has labels outside 1..{N}")
    return a.astype(int), N


def _probabilities(sub: Dataset, spec: MultiStageSpec, a: np.ndarray, N: int):
    if spec.propensity_column is not None:
        cols = list(spec.propensity_column)
        if len(cols) != N:
            raise ValidationError(f"need {N} propensity columns, got {len(cols)}")
        return np.column_stack([sub[c] for c in cols]), None
    fit = multinomial_irls(build_design(sub, spec.treat_terms), a, N)
    return fit.fitted_probabilities, fit


def fit_dwsurv_mt(data, stages: Sequence[MultiStageSpec], delta: str = "delta") -> DTRFit:
    """Fit a K-stage multi-treatment survival regime.

    The stage ``psi`` coefficients in the returned fit are the full ``N x q``
    matrices flattened row-wise (treatment 1 first); the matrix itself is in
    ``extras["targeted"]``.
    """
    data = as_dataset(data)
    stages = check_stages(stages, MultiStageSpec)
    d = data[delta]
    if not np.all((d == 0) | (d == 1)):
        raise InvalidData(f"column {delta!r} must be 0/1")
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
        a, N = _categorical(sub, spec)
        m = spec.resolve_weights(a, N)
        P, tfit = _probabilities(sub, spec, a, N)
        g, cfit = censoring_probability(sub, spec, delta, stage)
        w_sub = multicategory_weights(P, a, g, m)
        Xtf = build_design(sub, spec.tf_terms)
        Xb = build_design(sub, spec.blip_terms)
        q = Xb.shape[1]
        T = transformed_blocks(Xb.values, a, m)
        labels = list(Xtf.column_labels)
        for k in range(1, N):
            labels.extend(f"{spec.treatment}={k}:{lab}" for lab in Xb.column_labels)
        used = d[entered] == 1
        X = DesignMatrix(np.hstack([Xtf.values, T])[used], tuple(labels))
        z = log_times(pseudo[entered][used], stage)
        wls = weighted_least_squares(X, z, w_sub[used])
        beta = Coefficients(wls.coefficients.values[: Xtf.shape[1]], Xtf.column_labels)
        free = wls.coefficients.values[Xtf.shape[1]:].reshape(N - 1, q)
        psi_mat = recover_reference(free, m)
        flat_labels = tuple(
            f"{spec.treatment}={k + 1}:{lab}" for k in range(N) for lab in Xb.column_labels
        )
        psi = Coefficients(psi_mat.reshape(-1), flat_labels)
        targeted = TargetedBlipFit(psi_mat, beta, m, Xb.column_labels)
        rule = ArgmaxRule(psi_mat, spec.blip_terms, m)
        rows = np.zeros(n, dtype=bool)
        rows[np.flatnonzero(entered)[used]] = True
        weights = np.zeros(n)
        weights[rows] = w_sub[used]
        extras: dict[str, Any] = {
            "targeted": targeted,
            "propensity": P,
            "uncensored_probability": g,
        }
        if cfit is not None:
            extras["censoring"] = cfit.coefficients
        fits.append(
            StageFit(
                stage=stage,
                spec=spec,
                psi=psi,
                beta=beta,
                alpha=None if tfit is None else Coefficients(
                    tfit.coefficients.reshape(-1),
                    tuple(f"{spec.treatment}={k + 1}:{lab}" for k in range(N - 1) for lab in tfit.labels),
                ),
                weights=weights,
                pseudo_outcome=pseudo,
                rows=rows,
                rule=rule,
                covariance=_full_covariance(wls.covariance, Xtf.shape[1], q, m),
                treatment_converged=True if tfit is None else tfit.converged,
                treatment_iterations=0 if tfit is None else tfit.iterations,
                extras=extras,
            )
        )
        B = Xb.values @ psi_mat.T
        shift = np.zeros(n)
        shift[entered] = B.max(axis=1) - B[np.arange(sub.n), a - 1]
        later = (pseudo, shift, eta)
        log.debug("stage %d: N=%d, %d uncensored entrants", stage, N, int(used.sum()))
    fits.reverse()
    return DTRFit("dwsurv_mt", tuple(fits), Regime(tuple(f.rule for f in fits)), n)


class DWSurvMT(RegimeEstimator):
    """Regime estimator for censored survival times and ``N``-level treatments.

    Parameters
    ----------
    stages : sequence of MultiStageSpec
    delta : str, default="delta"
    """

    def __init__(self, stages: Sequence[MultiStageSpec] = (), delta: str = "delta"):
        self.stages = stages
        self.delta = delta

    def _fit_dataset(self, data):
        return fit_dwsurv_mt(data, self.stages, self.delta)
