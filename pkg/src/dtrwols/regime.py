"""Decision rules derived from fitted blip coefficients."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .exceptions import ConcavityViolation, DimensionMismatch
from .glm_core import Coefficients
from .tabular import TermList, as_dataset, build_design
from .weights import TreatmentWeights

__all__ = [
    "BinaryRule",
    "DoseRule",
    "ArgmaxRule",
    "Regime",
    "recommend",
    "regret_value",
]


def _fmt(v: float) -> str:
    return format(float(v), ".6g")


def _linear_text(coef: Coefficients) -> str:
    parts = []
    for label, value in zip(coef.labels, coef.values):
        if label == "(Intercept)":
            parts.append(_fmt(value))
        else:
            parts.append(f"{_fmt(value)}*{label}")
    text = " + ".join(parts) if parts else "0"
    return text.replace("+ -", "- ")


@dataclass(frozen=True, eq=False)
class BinaryRule:
    """Treat (action 1) iff ``psi' h > 0``; a zero blip selects control."""

    psi: Coefficients
    blip_terms: TermList
    kind = "binary"

    def blip(self, data) -> np.ndarray:
        X = build_design(as_dataset(data), self.blip_terms).values
        return X @ self.psi.values

    def recommend(self, data) -> np.ndarray:
        return (self.blip(data) > 0).astype(np.float64)

    def describe(self) -> str:
        return f"treat if {_linear_text(self.psi)} > 0"

    @property
    def variables(self) -> tuple[str, ...]:
        return self.blip_terms.variables


@dataclass(frozen=True, eq=False)
class DoseRule:
    """Interior optimum of a blip ``a * psi1'h1 + a^2 * psi2'h2``.

    The optimum ``-psi1'h1 / (2 psi2'h2)`` exists only where the blip is
    concave in the dose, i.e. ``psi2'h2 < 0``.
    """

    linear: Coefficients
    quadratic: Coefficients
    linear_terms: TermList
    quadratic_terms: TermList
    kind = "dose"

    def slope(self, data) -> np.ndarray:
        return build_design(as_dataset(data), self.linear_terms).values @ self.linear.values

    def curvature(self, data) -> np.ndarray:
        return build_design(as_dataset(data), self.quadratic_terms).values @ self.quadratic.values

    def blip(self, data, dose) -> np.ndarray:
        dose = np.asarray(dose, dtype=np.float64)
        return dose * self.slope(data) + dose**2 * self.curvature(data)

    def recommend_rows(self, data) -> tuple[np.ndarray, np.ndarray]:
        """Doses where defined (NaN elsewhere) and the mask of concave rows."""
        data = as_dataset(data)
        lin = self.slope(data)
        quad = self.curvature(data)
        ok = quad < 0
        dose = np.full(lin.shape, np.nan)
        dose[ok] = -lin[ok] / (2.0 * quad[ok])
        return dose, ok

    def recommend(self, data) -> np.ndarray:
        dose, ok = self.recommend_rows(data)
        if not np.all(ok):
            row = int(np.flatnonzero(~ok)[0])
            raise ConcavityViolation(
                f"blip is not concave in the dose for {np.count_nonzero(~ok)} rows (first: {row})"
            )
        return dose

    def describe(self) -> str:
        return (
            f"dose = -({_linear_text(self.linear)}) / (2*({_linear_text(self.quadratic)})) "
            f"where {_linear_text(self.quadratic)} < 0"
        )

    @property
    def variables(self) -> tuple[str, ...]:
        seen = dict.fromkeys(self.linear_terms.variables + self.quadratic_terms.variables)
        return tuple(seen)


@dataclass(frozen=True, eq=False)
class ArgmaxRule:
    """Pick the treatment in ``1..N`` with the largest targeted blip.

    Ties go to the smallest treatment label.
    """

    psi: np.ndarray  # N x q
    blip_terms: TermList
    m: TreatmentWeights
    kind = "argmax"

    def __post_init__(self):
        psi = np.array(self.psi, dtype=np.float64)
        if psi.ndim != 2 or psi.shape[1] != self.blip_terms.n_columns:
            raise DimensionMismatch("psi must be N x (number of blip columns)")
        psi.setflags(write=False)
        object.__setattr__(self, "psi", psi)

    @property
    def n_treatments(self) -> int:
        return self.psi.shape[0]

    def blip_matrix(self, data) -> np.ndarray:
        X = build_design(as_dataset(data), self.blip_terms).values
        return X @ self.psi.T

    def recommend(self, data) -> np.ndarray:
        return (np.argmax(self.blip_matrix(data), axis=1) + 1).astype(np.float64)

    def describe(self) -> str:
        labels = self.blip_terms.labels
        rows = [
            f"a={k + 1}: {_linear_text(Coefficients(self.psi[k], labels))}"
            for k in range(self.n_treatments)
        ]
        return "choose argmax of [" + "; ".join(rows) + "]"

    @property
    def variables(self) -> tuple[str, ...]:
        return self.blip_terms.variables


Rule = Union[BinaryRule, DoseRule, ArgmaxRule]


@dataclass(frozen=True, eq=False)
class Regime:
    """One decision rule per stage, stage 1 first."""

    rules: tuple

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(self.rules))

    def __len__(self) -> int:
        return len(self.rules)

    def __getitem__(self, index: int) -> Rule:
        return self.rules[index]

    def stage(self, j: int) -> Rule:
        """Rule for stage ``j`` (1-based)."""
        return self.rules[j - 1]

    def recommend(self, data) -> np.ndarray:
        """Array of shape (n, K) with the recommended action per stage."""
        data = as_dataset(data)
        return np.column_stack([rule.recommend(data) for rule in self.rules])

    def describe(self) -> list[str]:
        return [f"Stage {j + 1}: {rule.describe()}" for j, rule in enumerate(self.rules)]


def _row(h, q: int) -> np.ndarray:
    h = np.asarray(h, dtype=np.float64).reshape(-1)
    if h.size != q:
        raise DimensionMismatch(f"history row has {h.size} entries, expected {q}")
    return h


def _psi_values(psi) -> np.ndarray:
    if isinstance(psi, BinaryRule):
        psi = psi.psi
    return np.asarray(psi.values if isinstance(psi, Coefficients) else psi, dtype=np.float64)


def recommend(rule, h_row) -> float:
    """Action for one evaluated blip-design row.

    ``rule`` may be a :class:`BinaryRule`, coefficient vector,
    :class:`ArgmaxRule` (row of blip columns) or :class:`DoseRule` (a pair of
    rows for the linear and quadratic blocks).
    """
    if isinstance(rule, DoseRule):
        h1, h2 = h_row
        lin = float(_row(h1, len(rule.linear)) @ rule.linear.values)
        quad = float(_row(h2, len(rule.quadratic)) @ rule.quadratic.values)
        if not quad < 0:
            raise ConcavityViolation(f"quadratic dose coefficient {quad:g} is not negative")
        return -lin / (2.0 * quad)
    if isinstance(rule, ArgmaxRule):
        values = rule.psi @ _row(h_row, rule.psi.shape[1])
        return float(np.argmax(values) + 1)
    psi = _psi_values(rule)
    return float(float(_row(h_row, psi.size) @ psi) > 0)


def regret_value(psi, h_row, a) -> float:
    """Blip forgone by taking binary action ``a`` instead of the rule's action."""
    psi = _psi_values(psi)
    blip = float(_row(h_row, psi.size) @ psi)
    opt = 1.0 if blip > 0 else 0.0
    return blip * (opt - float(a))
