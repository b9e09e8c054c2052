"""Bootstrap intervals and a sample measure of non-regularity."""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np
from scipy import stats
from sklearn.base import clone

from .exceptions import DTRError, MissingCovariance, ResampleFitFailure, ValidationError
from .tabular import Dataset, as_dataset, build_design

__all__ = [
    "BootstrapConfig",
    "BootstrapResult",
    "NonRegularityEstimate",
    "estimate_nonregularity",
    "adaptive_m",
    "bootstrap_ci",
    "blip_statistic",
]

log = logging.getLogger(__name__)

MAX_FAILURE_FRACTION = 0.05


@dataclass(frozen=True)
class BootstrapConfig:
    """Resampling settings.

    Parameters
    ----------
    B : int
        Number of resamples.
    mode : {"full_n", "fixed_m", "adaptive_m"}
        Resample size ``n``, a fixed ``m``, or ``m`` chosen from the
        non-regularity estimate.
    m : int, optional
        Resample size for ``mode="fixed_m"``.
    alpha_tuning : float
        Exponent parameter of the adaptive rule
        ``m = n ** ((1 + a * (1 - p)) / (1 + a))``.
    rng_seed : int
        Resample ``b`` uses ``SeedSequence([rng_seed, b])``.
    confidence_level : float
    """

    B: int = 200
    mode: Literal["full_n", "fixed_m", "adaptive_m"] = "full_n"
    m: int | None = None
    alpha_tuning: float = 0.05
    rng_seed: int = 0
    confidence_level: float = 0.95

    def __post_init__(self):
        if int(self.B) != self.B or self.B < 1:
            raise ValidationError(f"B must be a positive integer, got {self.B}")
        if self.mode not in ("full_n", "fixed_m", "adaptive_m"):
            raise ValidationError(f"unknown bootstrap mode {self.mode!r}")
        if self.mode == "fixed_m" and (self.m is None or self.m < 1):
            raise ValidationError("fixed_m mode needs a positive m")
        if not 0 < self.confidence_level < 1:
            raise ValidationError("confidence_level must lie in (0, 1)")
        if not self.alpha_tuning > 0:
            raise ValidationError("alpha_tuning must be positive")


@dataclass(frozen=True, eq=False)
class BootstrapResult:
    """Percentile intervals per coefficient."""

    estimate: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    samples: np.ndarray
    m: int
    n: int
    n_failed: int
    confidence_level: float

    @property
    def standard_error(self) -> np.ndarray:
        if self.samples.shape[0] < 2:
            return np.zeros(self.estimate.shape)
        return self.samples.std(axis=0, ddof=1) * math.sqrt(self.m / self.n)

    def interval(self, level: float) -> tuple[np.ndarray, np.ndarray]:
        """Recompute intervals at another confidence level from the same resamples."""
        return _percentile(self.estimate, self.samples, level, self.m, self.n)


@dataclass(frozen=True)
class NonRegularityEstimate:
    """Share of individuals whose optimal action is statistically ambiguous."""

    p_hat: float
    threshold: float


def estimate_nonregularity(fit, data, critical: float | None = None,
                           level: float = 0.95) -> NonRegularityEstimate:
    """Fraction of individuals with ``|psi'h| / se(psi'h)`` below a critical value.

    Parameters
    ----------
    fit : StageFit
        A binary-treatment stage fit carrying a covariance matrix.
    data : Dataset
        The data the fit was computed on (only the rows used by the fit are
        classified) or a separate set of individuals to classify.
    critical : float, optional
        Threshold on the standardised blip; the two-sided normal quantile at
        ``level`` by default.

    Raises
    ------
    MissingCovariance
        If the fit carries no covariance matrix.
    """
    cov = fit.psi_covariance
    if cov is None:
        raise MissingCovariance(f"stage {fit.stage} fit has no covariance matrix")
    if critical is None:
        critical = float(stats.norm.ppf(0.5 + level / 2))
    data = as_dataset(data)
    if data.n == fit.rows.size:
        data = data.take(fit.rows)
    H = build_design(data, fit.spec.blip_terms).values
    if H.shape[1] != cov.shape[0]:
        raise MissingCovariance("covariance does not match the blip design")
    blip = H @ fit.psi.values
    se = np.sqrt(np.maximum(np.einsum("ij,jk,ik->i", H, cov, H), 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        ambiguous = np.where(se > 0, np.abs(blip) < critical * se, blip == 0)
    return NonRegularityEstimate(float(np.mean(ambiguous)), critical)


def adaptive_m(n: int, p_hat: float, alpha_tuning: float = 0.05) -> int:
    """``ceil(n ** ((1 + a (1 - p)) / (1 + a)))``: ``n`` when ``p = 0``."""
    if not 0 <= p_hat <= 1:
        raise ValidationError("p_hat must lie in [0, 1]")
    exponent = (1 + alpha_tuning * (1 - p_hat)) / (1 + alpha_tuning)
    return int(min(n, math.ceil(n**exponent - 1e-9)))


def _percentile(estimate, samples, level, m, n):
    tail = (1 - level) / 2
    q = np.quantile(samples, [tail, 1 - tail], axis=0)
    lo, hi = q[0], q[1]
    if m != n:
        # m-out-of-n: shrink deviations from the point estimate by sqrt(m/n)
        scale = math.sqrt(m / n)
        lo = estimate + scale * (lo - estimate)
        hi = estimate + scale * (hi - estimate)
    return lo, hi


def blip_statistic(estimator) -> Callable[[Dataset], np.ndarray]:
    """Closure refitting a clone of ``estimator`` and returning all blip coefficients."""

    def statistic(data: Dataset) -> np.ndarray:
        return clone(estimator).fit(data).blip_coefficients()

    return statistic


def bootstrap_ci(estimator, data, config: BootstrapConfig | None = None,
                 p_hat: float | None = None, workers: int = 1) -> BootstrapResult:
    """Percentile bootstrap intervals for a vector statistic.

    Parameters
    ----------
    estimator : callable or RegimeEstimator
        Either ``f(Dataset) -> 1-D array`` or an unfitted estimator whose blip
        coefficients are the statistic.
    data : Dataset
        Resampling is by row, so each row must hold one individual's full
        history.
    config : BootstrapConfig
    p_hat : float, optional
        Non-regularity estimate used by ``mode="adaptive_m"``.
    workers : int
        Threads used for refits. Results do not depend on this value.

    Raises
    ------
    ResampleFitFailure
        If more than 5% of the refits fail.
    """
    config = config or BootstrapConfig()
    data = as_dataset(data)
    stat = estimator if callable(estimator) and not hasattr(estimator, "fit") else blip_statistic(estimator)
    n = data.n
    if config.mode == "full_n":
        m = n
    elif config.mode == "fixed_m":
        if config.m > n:
            raise ValidationError(f"m={config.m} exceeds n={n}")
        m = int(config.m)
    else:
        if p_hat is None:
            raise ValidationError("adaptive_m mode needs p_hat")
        m = adaptive_m(n, p_hat, config.alpha_tuning)
    estimate = np.asarray(stat(data), dtype=np.float64)

    def one(b: int):
        rng = np.random.default_rng(np.random.SeedSequence([config.rng_seed, b]))
        idx = rng.integers(0, n, size=m)
        try:
            return np.asarray(stat(data.take(idx)), dtype=np.float64)
        except (DTRError, np.linalg.LinAlgError, FloatingPointError) as exc:
            log.debug("resample %d failed: %s", b, exc)
            return None

    # resample fits are noisy by design; their warnings are not actionable
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        if workers and workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(one, range(config.B)))
        else:
            results = [one(b) for b in range(config.B)]
    ok = [r for r in results if r is not None]
    failed = config.B - len(ok)
    if failed > MAX_FAILURE_FRACTION * config.B or not ok:
        raise ResampleFitFailure(failed, config.B)
    if failed:
        warnings.warn(f"{failed} of {config.B} bootstrap refits failed", RuntimeWarning, stacklevel=2)
    if config.B == 1:
        warnings.warn("B=1 gives a zero-width interval", RuntimeWarning, stacklevel=2)
    samples = np.vstack(ok)
    lo, hi = _percentile(estimate, samples, config.confidence_level, m, n)
    return BootstrapResult(estimate, lo, hi, samples, m, n, failed, config.confidence_level)
