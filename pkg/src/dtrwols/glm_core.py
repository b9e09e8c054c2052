"""Estimation kernels: weighted least squares, binary and multinomial IRLS,
link functions and the Gaussian density."""

from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import special, stats

from .exceptions import (
    DimensionMismatch,
    InvalidData,
    InvalidTreatment,
    MissingCategory,
    MissingClass,
    NegativeWeight,
    NonpositiveSd,
    SeparationDetected,
    SingularDesign,
    ValidationError,
)
from .tabular import DesignMatrix

__all__ = [
    "Coefficients",
    "WlsFit",
    "LogisticFit",
    "MultinomialFit",
    "LinkFunction",
    "weighted_least_squares",
    "logistic_irls",
    "binary_glm",
    "multinomial_irls",
    "gaussian_density",
]

SINGULAR_RTOL = 1e-10
IRLS_TOL = 1e-8
IRLS_MAX_ITER = 100
_P_EDGE = 1e-12
_ETA_EDGE = 30.0


@dataclass(frozen=True, eq=False)
class Coefficients:
    """Labelled coefficient vector."""

    values: np.ndarray
    labels: tuple[str, ...]

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64).reshape(-1)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", tuple(self.labels))
        if len(self.labels) != values.size:
            raise DimensionMismatch(
                f"{values.size} coefficients but {len(self.labels)} labels"
            )

    def __len__(self) -> int:
        return self.values.size

    def __iter__(self):
        return iter(self.values)

    def __getitem__(self, key):
        if isinstance(key, str):
            return float(self.values[self.labels.index(key)])
        return self.values[key]

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, Coefficients):
            return NotImplemented
        return self.labels == other.labels and np.array_equal(self.values, other.values)

    __hash__ = None

    def as_dict(self) -> dict[str, float]:
        return {k: float(v) for k, v in zip(self.labels, self.values)}

    def __repr__(self) -> str:
        body = ", ".join(f"{k}={v:.6g}" for k, v in zip(self.labels, self.values))
        return f"Coefficients({body})"


def _unpack(X, name: str = "X") -> tuple[np.ndarray, tuple[str, ...]]:
    if isinstance(X, DesignMatrix):
        return X.values, X.column_labels
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise DimensionMismatch(f"{name} must be two-dimensional")
    return arr, tuple(f"x{j}" for j in range(arr.shape[1]))


def _vector(v, n: int, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64).reshape(-1)
    if arr.shape[0] != n:
        raise DimensionMismatch(f"{name} has length {arr.shape[0]}, expected {n}")
    return arr


def _prior_weights(w, n: int) -> np.ndarray:
    if w is None:
        return np.ones(n)
    w = _vector(w, n, "w")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise NegativeWeight("weights must be finite and nonnegative")
    return w


# -- weighted least squares -------------------------------------------------


@dataclass(frozen=True, eq=False)
class WlsFit:
    """Result of a weighted least-squares fit.

    Attributes
    ----------
    coefficients : Coefficients
        Minimiser of ``sum(w * (y - X b)**2)``.
    residuals : ndarray
        ``y - X b`` for every row, including zero-weight rows.
    xtwx_inverse : ndarray
        ``(X' W X)^{-1}``.
    covariance : ndarray
        Heteroscedasticity-robust sandwich ``B M B`` with bread
        ``B = xtwx_inverse`` and meat ``sum (w_i r_i)^2 x_i x_i'``.
    """

    coefficients: Coefficients
    residuals: np.ndarray
    xtwx_inverse: np.ndarray
    covariance: np.ndarray


def weighted_least_squares(X, y, w=None) -> WlsFit:
    """Solve a weighted least-squares problem through the SVD of ``sqrt(W) X``.

    Raises
    ------
    SingularDesign
        When the smallest singular value is below ``1e-10`` times the largest,
        or fewer rows than columns carry weight.
    NegativeWeight
        When any weight is negative or non-finite.
    """
    Xv, labels = _unpack(X)
    n, p = Xv.shape
    y = _vector(y, n, "y")
    w = _prior_weights(w, n)
    if n < p or np.count_nonzero(w) < p:
        raise SingularDesign(f"{np.count_nonzero(w)} weighted rows for {p} columns")
    root = np.sqrt(w)
    Xw = Xv * root[:, None]
    try:
        u, s, vt = np.linalg.svd(Xw, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise SingularDesign(str(exc)) from exc
    if p == 0:
        raise SingularDesign("empty design")
    if s[-1] < SINGULAR_RTOL * s[0] or s[0] == 0:
        raise SingularDesign(
            f"design is rank deficient (singular values {s[0]:.3g} .. {s[-1]:.3g})"
        )
    beta = vt.T @ ((u.T @ (root * y)) / s)
    resid = y - Xv @ beta
    v_scaled = vt.T / s
    bread = v_scaled @ v_scaled.T
    score = Xv * (w * resid)[:, None]
    cov = bread @ (score.T @ score) @ bread
    return WlsFit(
        Coefficients(beta, labels),
        _frozen(resid),
        _frozen(0.5 * (bread + bread.T)),
        _frozen(0.5 * (cov + cov.T)),
    )


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


# -- links ------------------------------------------------------------------


class LinkFunction:
    """Link ``g`` mapping a mean in (0, 1) to the linear-predictor scale.

    Parameters
    ----------
    kind : {"identity", "logit", "probit"}
    """

    KINDS = ("identity", "logit", "probit")

    def __init__(self, kind: str = "logit"):
        if isinstance(kind, LinkFunction):
            kind = kind.kind
        if kind not in self.KINDS:
            raise ValidationError(f"unknown link {kind!r}; expected one of {self.KINDS}")
        self.kind = kind

    def __repr__(self):
        return f"LinkFunction({self.kind!r})"

    def __eq__(self, other):
        return isinstance(other, LinkFunction) and other.kind == self.kind

    def __hash__(self):
        return hash(self.kind)

    def apply(self, p):
        p = np.asarray(p, dtype=np.float64)
        if self.kind == "identity":
            return p
        if self.kind == "logit":
            return special.logit(p)
        return special.ndtri(p)

    def inverse(self, u):
        u = np.asarray(u, dtype=np.float64)
        if self.kind == "identity":
            return u
        if self.kind == "logit":
            return special.expit(u)
        return special.ndtr(u)

    def inverse_derivative(self, u):
        u = np.asarray(u, dtype=np.float64)
        if self.kind == "identity":
            return np.ones_like(u)
        if self.kind == "logit":
            p = special.expit(u)
            return p * (1.0 - p)
        return stats.norm.pdf(u)


def as_link(link) -> LinkFunction:
    return link if isinstance(link, LinkFunction) else LinkFunction(link)


# -- binary GLM -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LogisticFit:
    """Binary regression fit.

    ``fitted_probabilities`` are the inverse link of the linear predictor.
    For the identity link they are the raw linear predictor and may leave
    (0, 1).
    """

    coefficients: Coefficients
    fitted_probabilities: np.ndarray
    linear_predictor: np.ndarray
    converged: bool
    iterations: int
    covariance: np.ndarray | None = None


def _check_binary(a: np.ndarray, w: np.ndarray, name: str) -> None:
    if not np.all((a == 0) | (a == 1)):
        raise InvalidData(f"{name} must contain only 0 and 1")
    active = a[w > 0]
    if active.size == 0 or np.all(active == active[0]):
        raise MissingClass(f"{name} has a single observed class")


def _logistic_loglik(y, w, eta):
    # y * eta - log(1 + e^eta), stable for large |eta|
    return float(np.sum(w * (y * eta - np.logaddexp(0.0, eta))))


def binary_glm(X, y, w=None, link="logit", start=None, max_iter: int = IRLS_MAX_ITER,
               tol: float = IRLS_TOL) -> LogisticFit:
    """Solve ``sum_i w_i x_i (y_i - g^{-1}(x_i' b)) = 0`` by damped Newton steps.

    For the logit link this is the weighted maximum-likelihood equation and
    step-halving guards the log-likelihood. For other links the same
    estimating equation is solved and step-halving guards the squared norm of
    the estimating function.

    Parameters
    ----------
    X : DesignMatrix or array of shape (n, p)
    y : array of shape (n,)
        Binary response.
    w : array of shape (n,), optional
        Nonnegative prior weights.
    link : str or LinkFunction
    start : array of shape (p,), optional
        Starting coefficients; zero by default.

    Raises
    ------
    MissingClass
        If the weighted rows contain a single response class.
    SeparationDetected
        If iteration fails to converge while fitted probabilities approach 0 or 1.
    SingularDesign
        If the Newton system is rank deficient.
    """
    link = as_link(link)
    Xv, labels = _unpack(X)
    n, p = Xv.shape
    y = _vector(y, n, "y")
    w = _prior_weights(w, n)
    _check_binary(y, w, "response")
    if n < p:
        raise SingularDesign(f"{n} rows for {p} columns")
    beta = np.zeros(p) if start is None else _vector(start, p, "start").copy()

    def objective(eta):
        if link.kind == "logit":
            return -_logistic_loglik(y, w, eta)
        mu = link.inverse(eta)
        score = Xv.T @ (w * (y - mu))
        return float(score @ score)

    eta = Xv @ beta
    current = objective(eta)
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        mu = link.inverse(eta)
        d = link.inverse_derivative(eta)
        score = Xv.T @ (w * (y - mu))
        hess = (Xv * (w * d)[:, None]).T @ Xv
        try:
            step = _solve_spd(hess, score)
        except SingularDesign:
            if iterations > 1 and _at_edge(mu, eta):
                raise SeparationDetected(
                    "binary model diverged: Newton system degenerate with fitted probabilities at 0 or 1"
                ) from None
            raise
        t = 1.0
        for _ in range(30):
            cand = beta + t * step
            cand_eta = Xv @ cand
            value = objective(cand_eta)
            if np.isfinite(value) and value <= current + 1e-12 * max(1.0, abs(current)):
                break
            t *= 0.5
        delta = cand - beta
        beta, eta, current = cand, cand_eta, value
        if np.max(np.abs(delta)) < tol:
            converged = True
            break
    mu = link.inverse(eta)
    if not converged:
        if _at_edge(mu, eta):
            raise SeparationDetected(
                "binary model did not converge and fitted probabilities reached 0 or 1"
            )
        warnings.warn(
            f"binary model did not converge in {max_iter} iterations", RuntimeWarning, stacklevel=2
        )
    d = link.inverse_derivative(eta)
    bread = np.linalg.pinv((Xv * (w * d)[:, None]).T @ Xv)
    sc = Xv * (w * (y - mu))[:, None]
    cov = bread @ (sc.T @ sc) @ bread
    return LogisticFit(
        Coefficients(beta, labels),
        _frozen(np.asarray(mu, dtype=np.float64)),
        _frozen(eta),
        converged,
        iterations,
        _frozen(0.5 * (cov + cov.T)),
    )


def _at_edge(mu, eta) -> bool:
    return bool(np.any((mu <= _P_EDGE) | (mu >= 1 - _P_EDGE)) or np.any(np.abs(eta) > _ETA_EDGE))


def _solve_spd(H: np.ndarray, g: np.ndarray) -> np.ndarray:
    if not (np.all(np.isfinite(H)) and np.all(np.isfinite(g))):
        raise SingularDesign("Newton system has non-finite entries")
    try:
        s = np.linalg.svd(H, compute_uv=False)
        # the Newton matrix is X'DX, so its condition number is the square of X's
        if s[0] == 0 or s[-1] < SINGULAR_RTOL**2 * s[0]:
            raise SingularDesign("Newton system is rank deficient")
        return np.linalg.solve(H, g)
    except np.linalg.LinAlgError as exc:
        raise SingularDesign(str(exc)) from None


def logistic_irls(X, a, w=None, start=None, max_iter: int = IRLS_MAX_ITER,
                  tol: float = IRLS_TOL) -> LogisticFit:
    """Logistic regression by iteratively reweighted least squares.

    Starts at zero, halves steps that lower the log-likelihood, and stops
    when the largest coefficient change is below ``tol``. Probabilities
    that round to exactly 0 or 1 in floating point are moved to the nearest
    representable interior value.
    """
    fit = binary_glm(X, a, w, "logit", start=start, max_iter=max_iter, tol=tol)
    p = saturation_guard(fit.fitted_probabilities)
    if p is fit.fitted_probabilities:
        return fit
    return dataclasses.replace(fit, fitted_probabilities=_frozen(p))


_P_LOW = np.finfo(np.float64).tiny
_P_HIGH = 1.0 - np.finfo(np.float64).epsneg


def saturation_guard(p: np.ndarray) -> np.ndarray:
    """Clip probabilities equal to 0 or 1 into (0, 1); others are untouched.

    ``expit`` returns exactly 1.0 for linear predictors above about 37
    even though the model probability is below one.
    """
    if np.any((p <= 0) | (p >= 1)):
        return np.clip(p, _P_LOW, _P_HIGH)
    return p


# -- multinomial ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MultinomialFit:
    """Baseline-category logit fit with the last category as reference.

    Attributes
    ----------
    coefficients : ndarray of shape (N - 1, p)
    fitted_probabilities : ndarray of shape (n, N)
    """

    coefficients: np.ndarray
    labels: tuple[str, ...]
    fitted_probabilities: np.ndarray
    converged: bool
    iterations: int

    @property
    def n_categories(self) -> int:
        return self.fitted_probabilities.shape[1]


def _softmax_ref(eta: np.ndarray) -> np.ndarray:
    full = np.hstack([eta, np.zeros((eta.shape[0], 1))])
    full -= full.max(axis=1, keepdims=True)
    np.exp(full, out=full)
    full /= full.sum(axis=1, keepdims=True)
    return full


def multinomial_irls(X, a, n_categories: int | None = None, w=None,
                     max_iter: int = IRLS_MAX_ITER, tol: float = IRLS_TOL) -> MultinomialFit:
    """Multinomial logistic regression by Newton-Raphson.

    Categories are the integers ``1..N``; category ``N`` is the reference.

    Raises
    ------
    MissingCategory
        If some category in ``1..N`` has no weighted observation.
    SeparationDetected
        If iteration fails while fitted probabilities collapse.
    """
    Xv, labels = _unpack(X)
    n, p = Xv.shape
    a = _vector(a, n, "a")
    w = _prior_weights(w, n)
    if not np.all((a == np.round(a)) & (a >= 1)):
        raise InvalidTreatment("categorical treatment must take values in 1..N")
    a = a.astype(int)
    N = int(a.max()) if n_categories is None else int(n_categories)
    if a.max() > N:
        raise InvalidTreatment(f"treatment value {a.max()} exceeds N={N}")
    counts = np.bincount(a[w > 0], minlength=N + 1)[1:]
    for k in range(N):
        if counts[k] == 0:
            raise MissingCategory(k + 1)
    if N < 2:
        raise MissingCategory(2)
    K = N - 1
    if n < K * p:
        raise SingularDesign(f"{n} rows for {K * p} parameters")
    Y = np.zeros((n, N))
    Y[np.arange(n), a - 1] = 1.0
    theta = np.zeros((K, p))

    def loglik(th):
        P = _softmax_ref(Xv @ th.T)
        with np.errstate(divide="ignore"):
            return float(np.sum(w * np.log(P[np.arange(n), a - 1])))

    current = loglik(theta)
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        P = _softmax_ref(Xv @ theta.T)[:, :K]
        grad = ((Y[:, :K] - P) * w[:, None]).T @ Xv  # K x p
        WX = Xv * w[:, None]
        H = np.empty((K, p, K, p))
        for k in range(K):
            for l in range(k, K):
                c = P[:, k] * ((k == l) - P[:, l])
                block = (WX * c[:, None]).T @ Xv
                H[k, :, l, :] = block
                H[l, :, k, :] = block.T
        step = _solve_spd(H.reshape(K * p, K * p), grad.reshape(-1)).reshape(K, p)
        t = 1.0
        for _ in range(30):
            cand = theta + t * step
            value = loglik(cand)
            if np.isfinite(value) and value >= current - 1e-12 * max(1.0, abs(current)):
                break
            t *= 0.5
        delta = cand - theta
        theta, current = cand, value
        if np.max(np.abs(delta)) < tol:
            converged = True
            break
    P = _softmax_ref(Xv @ theta.T)
    if not converged:
        if np.any(P <= _P_EDGE):
            raise SeparationDetected("multinomial model did not converge; probabilities reached 0")
        warnings.warn(
            f"multinomial model did not converge in {max_iter} iterations",
            RuntimeWarning,
            stacklevel=2,
        )
    theta.setflags(write=False)
    return MultinomialFit(theta, labels, _frozen(P), converged, iterations)


def predict_multinomial(fit: MultinomialFit, X) -> np.ndarray:
    Xv, _ = _unpack(X)
    return _softmax_ref(Xv @ fit.coefficients.T)


# -- densities --------------------------------------------------------------


def gaussian_density(a, mean, sd):
    """Normal density at ``a``; vectorised over all arguments.

    Raises
    ------
    NonpositiveSd
        If any ``sd`` is not strictly positive.
    """
    sd_arr = np.asarray(sd, dtype=np.float64)
    if np.any(~(sd_arr > 0)):
        raise NonpositiveSd("standard deviation must be positive")
    z = (np.asarray(a, dtype=np.float64) - np.asarray(mean, dtype=np.float64)) / sd_arr
    out = np.exp(-0.5 * z * z) / (sd_arr * np.sqrt(2.0 * np.pi))
    return float(out) if np.ndim(out) == 0 else out


def coefficient_block(coef: Coefficients, start: int, labels: Sequence[str]) -> Coefficients:
    stop = start + len(labels)
    return Coefficients(coef.values[start:stop], tuple(labels))
