"""Balancing weights.

Each constructor returns weights ``w(h, a)`` that satisfy the balancing
condition of its estimator given fitted treatment (and censoring)
probabilities. Positivity violations raise instead of being clamped.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .exceptions import (
    DimensionMismatch,
    InvalidTreatment,
    InvalidTreatmentWeights,
    NearDegenerateWeight,
    NonpositiveDensity,
    ProbabilityOutOfRange,
)
from .glm_core import Coefficients, as_link
from .tabular import DesignMatrix

__all__ = [
    "TreatmentWeights",
    "absdiff_weights",
    "binary_ipw_weights",
    "continuous_ipw",
    "censoring_absdiff_weights",
    "multicategory_weights",
    "dwglm_correction",
]

K_UNDERFLOW = 1e-12


def _as_float(v, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise ProbabilityOutOfRange(f"{name} contains non-finite values")
    return arr


def _open_unit(p: np.ndarray, name: str, allow_one: bool = False) -> None:
    upper_ok = p <= 1 if allow_one else p < 1
    if not np.all((p > 0) & upper_ok):
        raise ProbabilityOutOfRange(f"{name} must lie strictly inside (0, 1)")


def _binary(a, n: int) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    if a.shape[0] != n:
        raise DimensionMismatch(f"treatment has length {a.shape[0]}, expected {n}")
    if not np.all((a == 0) | (a == 1)):
        raise InvalidTreatment("binary treatment must contain only 0 and 1")
    return a


def absdiff_weights(pi_hat, a) -> np.ndarray:
    """``|a - pi|``: the overlap-style weight for binary treatments."""
    pi = _as_float(pi_hat, "pi_hat")
    _open_unit(pi, "pi_hat")
    a = _binary(a, pi.shape[0])
    return np.abs(a - pi)


def binary_ipw_weights(pi_hat, a, delta_prob=None) -> np.ndarray:
    """Inverse probability of the received binary treatment, optionally
    divided by the probability of remaining uncensored."""
    pi = _as_float(pi_hat, "pi_hat")
    _open_unit(pi, "pi_hat")
    a = _binary(a, pi.shape[0])
    w = 1.0 / np.where(a == 1, pi, 1.0 - pi)
    if delta_prob is not None:
        g = _as_float(delta_prob, "delta_prob")
        _open_unit(g, "delta_prob", allow_one=True)
        w = w / g
    return w


def continuous_ipw(density_at_a, numerator=None) -> np.ndarray:
    """``numerator / density`` with numerator 1 (IPW) unless supplied (SIPW)."""
    dens = np.asarray(density_at_a, dtype=np.float64).reshape(-1)
    if not np.all(dens > 0) or not np.all(np.isfinite(dens)):
        raise NonpositiveDensity("treatment density must be strictly positive")
    if numerator is None:
        return 1.0 / dens
    num = np.asarray(numerator, dtype=np.float64).reshape(-1)
    if num.shape != dens.shape:
        raise DimensionMismatch("numerator and density lengths differ")
    if not np.all(num > 0):
        raise NonpositiveDensity("stabilising numerator must be strictly positive")
    return num / dens


def censoring_absdiff_weights(pi_hat, a, delta_prob) -> np.ndarray:
    """``|a - pi| / P(uncensored)``. A probability of exactly one is allowed
    for the censoring term so that the uncensored case reduces exactly."""
    pi = _as_float(pi_hat, "pi_hat")
    _open_unit(pi, "pi_hat")
    g = _as_float(delta_prob, "delta_prob")
    if g.shape != pi.shape:
        raise DimensionMismatch("delta_prob and pi_hat lengths differ")
    _open_unit(g, "delta_prob", allow_one=True)
    a = _binary(a, pi.shape[0])
    return np.abs(a - pi) / g


@dataclass(frozen=True, eq=False)
class TreatmentWeights:
    """Positive weights ``m(a)`` over treatments ``1..N`` summing to one."""

    values: np.ndarray

    def __post_init__(self):
        m = np.array(self.values, dtype=np.float64).reshape(-1)
        if m.size < 2:
            raise InvalidTreatmentWeights("need weights for at least two treatments")
        if not np.all(m > 0) or not np.all(np.isfinite(m)):
            raise InvalidTreatmentWeights("treatment weights must be positive")
        if abs(m.sum() - 1.0) > 1e-12:
            raise InvalidTreatmentWeights(f"treatment weights sum to {m.sum()!r}, not 1")
        m.setflags(write=False)
        object.__setattr__(self, "values", m)

    @classmethod
    def uniform(cls, n_treatments: int) -> "TreatmentWeights":
        return cls(np.full(n_treatments, 1.0 / n_treatments))

    @classmethod
    def empirical(cls, a, n_treatments: int) -> "TreatmentWeights":
        a = np.asarray(a, dtype=int)
        counts = np.bincount(a, minlength=n_treatments + 1)[1:].astype(float)
        return cls(counts / counts.sum())

    @classmethod
    def from_mapping(cls, m: Mapping[int, float] | Sequence[float]) -> "TreatmentWeights":
        if isinstance(m, Mapping):
            keys = sorted(m)
            if keys != list(range(1, len(keys) + 1)):
                raise InvalidTreatmentWeights("treatment weight keys must be 1..N")
            return cls([m[k] for k in keys])
        return cls(m)

    @property
    def n_treatments(self) -> int:
        return self.values.size

    def __getitem__(self, a: int) -> float:
        return float(self.values[a - 1])

    def __eq__(self, other):
        return isinstance(other, TreatmentWeights) and np.array_equal(self.values, other.values)

    __hash__ = None


def _categories(a, n: int, N: int) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    if a.shape[0] != n:
        raise DimensionMismatch(f"treatment has length {a.shape[0]}, expected {n}")
    if not np.all((a == np.round(a)) & (a >= 1) & (a <= N)):
        raise InvalidTreatment(f"categorical treatment must take values in 1..{N}")
    return a.astype(int)


def multicategory_weights(prob_matrix, a, delta_prob, m: TreatmentWeights) -> np.ndarray:
    """``m(a_i) / (P(A = a_i | h_i) * P(uncensored | h_i, a_i))``."""
    P = np.asarray(prob_matrix, dtype=np.float64)
    if P.ndim != 2:
        raise DimensionMismatch("prob_matrix must be n x N")
    n, N = P.shape
    if not isinstance(m, TreatmentWeights):
        m = TreatmentWeights(m)
    if m.n_treatments != N:
        raise InvalidTreatmentWeights(f"{m.n_treatments} treatment weights for {N} treatments")
    a = _categories(a, n, N)
    pa = P[np.arange(n), a - 1]
    _open_unit(pa, "treatment probability", allow_one=False)
    g = np.ones(n) if delta_prob is None else _as_float(delta_prob, "delta_prob")
    if g.shape[0] != n:
        raise DimensionMismatch("delta_prob length differs from prob_matrix rows")
    _open_unit(g, "delta_prob", allow_one=True)
    return m.values[a - 1] / (pa * g)


def dwglm_correction(beta_hat, psi_hat, Xtf, Xblip, a_flip, link) -> np.ndarray:
    """Derivative of the inverse link at ``beta'h + a_flip * psi'h``.

    Used as the multiplicative correction to balancing weights for
    non-identity links. Values below ``1e-12`` trigger a
    :class:`NearDegenerateWeight` warning.
    """
    link = as_link(link)
    Xb = Xtf.values if isinstance(Xtf, DesignMatrix) else np.asarray(Xtf, dtype=np.float64)
    Xp = Xblip.values if isinstance(Xblip, DesignMatrix) else np.asarray(Xblip, dtype=np.float64)
    beta = np.asarray(beta_hat.values if isinstance(beta_hat, Coefficients) else beta_hat, dtype=np.float64)
    psi = np.asarray(psi_hat.values if isinstance(psi_hat, Coefficients) else psi_hat, dtype=np.float64)
    if Xb.ndim != 2 or Xb.shape[1] != beta.size:
        raise DimensionMismatch(f"treatment-free design has {Xb.shape[-1]} columns, beta has {beta.size}")
    if Xp.ndim != 2 or Xp.shape[1] != psi.size:
        raise DimensionMismatch(f"blip design has {Xp.shape[-1]} columns, psi has {psi.size}")
    if Xb.shape[0] != Xp.shape[0]:
        raise DimensionMismatch("designs have different row counts")
    flip = np.asarray(a_flip, dtype=np.float64).reshape(-1)
    if flip.shape[0] != Xb.shape[0]:
        raise DimensionMismatch("a_flip length differs from design rows")
    u = Xb @ beta + flip * (Xp @ psi)
    k = link.inverse_derivative(u)
    small = int(np.count_nonzero(k < K_UNDERFLOW))
    if small:
        warnings.warn(
            f"{small} correction factors below {K_UNDERFLOW:g}",
            NearDegenerateWeight,
            stacklevel=2,
        )
    return k
