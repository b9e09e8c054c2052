"""Dynamic weighted GLM for binary outcomes.

Blips live on the link scale. Each stage is fitted in two steps: a weighted
binary regression with ``|a - pi|`` weights, then a refit with weights
multiplied by the inverse-link derivative evaluated at the flipped
treatment. Earlier stages are fitted to Bernoulli pseudo-outcomes whose
success probability adds the later-stage link-scale regrets to the
final-stage linear predictor; ``R`` replicate draws are averaged.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .base import RegimeEstimator
from .exceptions import DomainError, ProbabilityOverflow, ValidationError
from .dwols import (
    DTRFit,
    StageFit,
    StageSpec,
    binary_column,
    binary_weights,
    check_stages,
    fit_propensity,
    split_coefficients,
    stacked_design,
    treatment_meta,
)
from .glm_core import Coefficients, LinkFunction, as_link, binary_glm
from .regime import BinaryRule, Regime
from .tabular import as_dataset, build_design
from .weights import dwglm_correction

__all__ = ["LinkFunction", "DwglmConfig", "link_apply", "link_invert", "fit_dwglm", "DWGLM"]

log = logging.getLogger(__name__)

IDENTITY_CLAMP = 1e-9


def link_apply(link, p):
    """``g(p)`` for ``p`` strictly inside (0, 1)."""
    p = np.asarray(p, dtype=np.float64)
    bad = np.flatnonzero(~((p > 0) & (p < 1)).reshape(-1))
    if bad.size:
        raise DomainError(f"{as_link(link).kind} link", int(bad[0]))
    out = as_link(link).apply(p)
    return float(out) if out.ndim == 0 else out


def link_invert(link, u):
    """``g^{-1}(u)``. For the identity link ``u`` must already lie in (0, 1)."""
    link = as_link(link)
    u = np.asarray(u, dtype=np.float64)
    bad = ~np.isfinite(u)
    if link.kind == "identity":
        bad |= (u <= 0) | (u >= 1)
    idx = np.flatnonzero(bad.reshape(-1))
    if idx.size:
        raise DomainError(f"inverse {link.kind} link", int(idx[0]))
    out = link.inverse(u)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class DwglmConfig:
    """Settings for the pseudo-outcome resampling.

    Parameters
    ----------
    link : {"logit", "probit", "identity"}
    replicates : int
        Number ``R`` of Bernoulli pseudo-outcome draws per earlier stage.
    rng_seed : int
        Root seed; replicate ``r`` at stage ``j`` draws from
        ``SeedSequence([rng_seed, j, r])``.
    keep_observed : bool
        Use the observed outcome instead of a draw for individuals whose
        later-stage regret is exactly zero.
    """

    link: str = "logit"
    replicates: int = 25
    rng_seed: int = 0
    keep_observed: bool = True

    def __post_init__(self):
        object.__setattr__(self, "link", as_link(self.link).kind)
        if int(self.replicates) != self.replicates or self.replicates < 1:
            raise ValidationError(f"replicates must be a positive integer, got {self.replicates}")


def success_probability(link: LinkFunction, u: np.ndarray) -> tuple[np.ndarray, int]:
    """Inverse link of the pseudo-outcome predictor and the number of clamped values."""
    if not np.all(np.isfinite(u)):
        raise ProbabilityOverflow("pseudo-outcome linear predictor is not finite")
    p = link.inverse(u)
    if link.kind != "identity":
        return p, 0
    clamped = int(np.count_nonzero((p < IDENTITY_CLAMP) | (p > 1 - IDENTITY_CLAMP)))
    return np.clip(p, IDENTITY_CLAMP, 1 - IDENTITY_CLAMP), clamped


def _two_step(X, y, w, Xtf, Xb, a, link):
    first = binary_glm(X, y, w, link)
    beta1, psi1 = split_coefficients(
        first.coefficients, [(Xtf.shape[1], Xtf.column_labels), (Xb.shape[1], Xb.column_labels)]
    )
    k = dwglm_correction(beta1, psi1, Xtf, Xb, 1.0 - a, link)
    w_new = w * k
    second = binary_glm(X, y, w_new, link, start=first.coefficients.values)
    return second, w_new


def fit_dwglm(data, stages: Sequence[StageSpec], outcome: str = "y",
              config: DwglmConfig | None = None) -> DTRFit:
    """Fit a K-stage regime for a binary outcome.

    Returns
    -------
    DTRFit
        Earlier-stage coefficients are averages over the replicate fits;
        ``extras["replicate_psi"]`` holds the individual replicate estimates.
    """
    config = config or DwglmConfig()
    link = as_link(config.link)
    data = as_dataset(data)
    stages = check_stages(stages)
    y = binary_column(data, outcome)
    n = data.n
    everyone = np.ones(n, dtype=bool)
    K = len(stages)
    fits: list[StageFit] = []
    regret = np.zeros(n)
    base_eta = None
    for j in range(K - 1, -1, -1):
        spec = stages[j]
        a = binary_column(data, spec.treatment)
        pi, tfit = fit_propensity(data, spec, a)
        w = binary_weights(spec.weight, pi, a)
        Xtf = build_design(data, spec.tf_terms)
        Xb = build_design(data, spec.blip_terms)
        X = stacked_design(Xtf, [(spec.treatment, a, Xb)])
        sizes = [(Xtf.shape[1], Xtf.column_labels), (Xb.shape[1], Xb.column_labels)]
        extras: dict = {"propensity": pi}
        if j == K - 1:
            final, w_used = _two_step(X, y, w, Xtf, Xb, a, link)
            beta, psi = split_coefficients(final.coefficients, sizes)
            base_eta = final.linear_predictor
            covariance = final.covariance
            pseudo = y
        else:
            p_success, clamped = success_probability(link, base_eta + regret)
            if clamped:
                warnings.warn(
                    f"stage {j + 1}: {clamped} success probabilities clamped to "
                    f"[{IDENTITY_CLAMP:g}, {1 - IDENTITY_CLAMP:g}]",
                    RuntimeWarning,
                    stacklevel=2,
                )
            keep = (regret == 0) if config.keep_observed else np.zeros(n, dtype=bool)
            coefs = np.empty((config.replicates, X.shape[1]))
            weights_sum = np.zeros(n)
            for r in range(config.replicates):
                rng = np.random.default_rng(np.random.SeedSequence([config.rng_seed, j + 1, r]))
                draw = (rng.random(n) < p_success).astype(np.float64)
                draw = np.where(keep, y, draw)
                fit_r, w_r = _two_step(X, draw, w, Xtf, Xb, a, link)
                coefs[r] = fit_r.coefficients.values
                weights_sum += w_r
            mean = Coefficients(coefs.mean(axis=0), X.column_labels)
            beta, psi = split_coefficients(mean, sizes)
            w_used = weights_sum / config.replicates
            covariance = None
            pseudo = p_success
            extras.update(replicate_psi=coefs[:, Xtf.shape[1]:], clamped=clamped)
            log.debug("stage %d: %d replicates, %d clamped", j + 1, config.replicates, clamped)
        rule = BinaryRule(psi, spec.blip_terms)
        fits.append(
            StageFit(
                stage=j + 1,
                spec=spec,
                psi=psi,
                beta=beta,
                weights=w_used,
                pseudo_outcome=pseudo,
                rows=everyone,
                rule=rule,
                covariance=covariance,
                extras=extras,
                **treatment_meta(tfit),
            )
        )
        blip = Xb.values @ psi.values
        regret = regret + blip * ((blip > 0) - a)
    fits.reverse()
    return DTRFit("dwglm", tuple(fits), Regime(tuple(f.rule for f in fits)), n)


class DWGLM(RegimeEstimator):
    """Regime estimator for binary outcomes with link-scale blips.

    Parameters
    ----------
    stages : sequence of StageSpec
    outcome : str, default="y"
        Binary outcome column (1 is the desirable event).
    link : {"logit", "probit", "identity"}, default="logit"
    replicates : int, default=25
    random_state : int, default=0
    keep_observed : bool, default=True
    """

    def __init__(self, stages: Sequence[StageSpec] = (), outcome: str = "y", link: str = "logit",
                 replicates: int = 25, random_state: int = 0, keep_observed: bool = True):
        self.stages = stages
        self.outcome = outcome
        self.link = link
        self.replicates = replicates
        self.random_state = random_state
        self.keep_observed = keep_observed

    def _fit_dataset(self, data):
        config = DwglmConfig(self.link, self.replicates, self.random_state, self.keep_observed)
        return fit_dwglm(data, self.stages, self.outcome, config)
