"""Treatment-free model validation and regression calibration.

If the treatment-free model is right, the blip estimates should not move
when only the treatment model changes. :func:`validate_tf_model` refits an
estimator under several treatment models and compares the results.
:func:`regression_calibration` replaces an error-prone covariate by its
linear prediction from a validation subsample, so downstream weights balance
the imputed covariate across treatment arms.
"""

from __future__ import annotations

import dataclasses
import itertools
import logging
import warnings
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from sklearn.base import clone

from .exceptions import DTRError, NoValidationSubsample, PreconditionError
from .glm_core import Coefficients, weighted_least_squares
from .inference import BootstrapConfig, bootstrap_ci
from .tabular import Dataset, TermList, as_dataset, as_terms, build_design

__all__ = ["ValidationReport", "validate_tf_model", "CalibrationFit", "regression_calibration"]

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ValidationReport:
    """Blip estimates under each treatment-model variant.

    ``verdict`` is ``"suspect"`` exactly when ``max_pairwise_distance``
    exceeds ``tolerance``.
    """

    estimates: Mapping[str, Coefficients]
    max_pairwise_distance: float
    tolerance: float
    verdict: str
    failed: tuple[str, ...] = ()


def _variant_terms(variant, n_stages: int) -> tuple[TermList, ...]:
    if isinstance(variant, (str, TermList)):
        return (as_terms(variant),) * n_stages
    terms = tuple(as_terms(v) for v in variant)
    if len(terms) != n_stages:
        raise PreconditionError(f"variant lists {len(terms)} treatment models for {n_stages} stages")
    return terms


def _label(variant) -> str:
    if isinstance(variant, (str, TermList)):
        return str(as_terms(variant))
    return " | ".join(str(as_terms(v)) for v in variant)


def _with_treatment_models(estimator, terms: Sequence[TermList]):
    stages = [dataclasses.replace(s, treat_terms=t) for s, t in zip(estimator.stages, terms)]
    return clone(estimator).set_params(stages=stages)


def validate_tf_model(estimator, data, variants, tolerance: float | None = None,
                      bootstrap: BootstrapConfig | None = None) -> ValidationReport:
    """Refit ``estimator`` under each treatment model and compare blip estimates.

    Parameters
    ----------
    estimator : RegimeEstimator
        Unfitted estimator whose ``stages`` hold the treatment-free and blip
        models under scrutiny.
    data : Dataset
    variants : sequence or mapping
        Each variant is a term list used at every stage, or a sequence of
        one term list per stage. A mapping supplies labels.
    tolerance : float, optional
        Largest acceptable L-infinity distance between any two variants'
        blip vectors. Defaults to twice the largest bootstrap standard error
        across variants.
    bootstrap : BootstrapConfig, optional
        Resampling used for the default tolerance (B=100 if omitted).

    Raises
    ------
    PreconditionError
        With fewer than two variants, or fewer than two that fit.
    """
    data = as_dataset(data)
    if isinstance(variants, Mapping):
        items = list(variants.items())
    else:
        items = [(_label(v), v) for v in variants]
    if len(items) < 2:
        raise PreconditionError("validation needs at least two treatment-model variants")
    K = len(estimator.stages)
    estimates: dict[str, Coefficients] = {}
    candidates = {}
    failed = []
    for label, variant in items:
        est = _with_treatment_models(estimator, _variant_terms(variant, K))
        try:
            est.fit(data)
        except DTRError as exc:
            warnings.warn(f"treatment-model variant {label!r} failed: {exc}", RuntimeWarning, stacklevel=2)
            failed.append(label)
            continue
        estimates[label] = Coefficients(est.blip_coefficients(), tuple(est.result_.psi_labels()))
        candidates[label] = est
    if len(estimates) < 2:
        raise PreconditionError("fewer than two treatment-model variants could be fitted")
    distance = max(
        float(np.max(np.abs(a.values - b.values)))
        for a, b in itertools.combinations(estimates.values(), 2)
    )
    if tolerance is None:
        config = bootstrap or BootstrapConfig(B=100)
        se = [float(np.max(bootstrap_ci(clone(est), data, config).standard_error)) for est in candidates.values()]
        tolerance = 2.0 * max(se)
    verdict = "suspect" if distance > tolerance else "consistent"
    log.info("tf validation: distance %.4g, tolerance %.4g -> %s", distance, tolerance, verdict)
    return ValidationReport(estimates, distance, float(tolerance), verdict, tuple(failed))


@dataclass(frozen=True, eq=False)
class CalibrationFit:
    """Linear imputation ``X_hat = c0 + c1 X* + c' Z`` from the validation rows."""

    coefficients: Coefficients
    imputed: np.ndarray
    column: str
    n_validation: int


def regression_calibration(data, error_prone: str, error_free: Sequence[str] = (), *,
                           truth: str, validation: str,
                           imputed_column: str | None = None) -> tuple[CalibrationFit, Dataset]:
    """Impute an error-prone covariate from its validation-subsample regression.

    Parameters
    ----------
    data : Dataset
    error_prone : str
        Column ``X*`` observed for everyone.
    error_free : sequence of str
        Columns ``Z`` measured without error.
    truth : str
        Column holding the true ``X``; only read on validation rows.
    validation : str
        0/1 column flagging the validation subsample.
    imputed_column : str, optional
        Name of the added column, ``truth + "hat"`` by default.

    Returns
    -------
    CalibrationFit, Dataset
        The fit and ``data`` with the imputed column added.

    Raises
    ------
    NoValidationSubsample
        If the validation column is absent or flags no rows.
    """
    data = as_dataset(data)
    if validation not in data or not np.any(data[validation] == 1):
        raise NoValidationSubsample(f"no rows flagged by validation column {validation!r}")
    terms = TermList.parse(" + ".join(["1", error_prone, *error_free]))
    X = build_design(data, terms)
    flagged = data[validation] == 1
    data.require([truth])
    fit = weighted_least_squares(X.values[flagged], data[truth][flagged])
    coef = Coefficients(fit.coefficients.values, X.column_labels)
    imputed = X.values @ coef.values
    name = imputed_column or f"{truth}hat"
    return (
        CalibrationFit(coef, imputed, name, int(flagged.sum())),
        data.with_columns(**{name: imputed}),
    )
