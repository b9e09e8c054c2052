"""Column tables, a small term language, and design-matrix construction.

The term grammar covers the transformations needed by the built-in
scenarios::

    1 + x1 + x1^2 + I(x1^4) + log(x1) + log(abs(x1)) + abs(x1) + sin(x1)
      + cos(x1) + cos(pi*x1) + exp(2*x1) + x1:a1

An intercept is included unless the formula contains ``0`` or ``-1``.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from .exceptions import (
    DomainError,
    EmptyFile,
    InvalidData,
    MissingColumn,
    ParseError,
    TermSyntaxError,
)

__all__ = [
    "Dataset",
    "Term",
    "Var",
    "Pow",
    "Log",
    "LogAbs",
    "Abs",
    "Sin",
    "Cos",
    "CosPi",
    "Exp",
    "Interaction",
    "TermList",
    "DesignMatrix",
    "as_terms",
    "build_design",
    "load_csv",
    "write_csv",
]


def _readonly(values: np.ndarray) -> np.ndarray:
    values.setflags(write=False)
    return values


class Dataset:
    """Immutable table of equal-length float64 columns.

    Parameters
    ----------
    columns : mapping of str to array-like
        Column name to 1-D numeric values. Insertion order is kept.
    """

    __slots__ = ("_columns", "_n")

    def __init__(self, columns: Mapping[str, object]):
        if not columns:
            raise InvalidData("a dataset needs at least one column")
        cols: dict[str, np.ndarray] = {}
        n = None
        for name, values in columns.items():
            if not isinstance(name, str) or not name:
                raise InvalidData(f"column names must be non-empty strings, got {name!r}")
            try:
                arr = np.array(values, dtype=np.float64).reshape(-1)
            except (TypeError, ValueError) as exc:
                raise InvalidData(f"column {name!r} is not numeric") from exc
            if n is None:
                n = arr.shape[0]
            elif arr.shape[0] != n:
                raise InvalidData(
                    f"column {name!r} has length {arr.shape[0]}, expected {n}"
                )
            if not np.all(np.isfinite(arr)):
                raise InvalidData(f"column {name!r} contains missing or infinite values")
            cols[name] = _readonly(arr)
        if n == 0:
            raise InvalidData("a dataset needs at least one row")
        self._columns = cols
        self._n = n

    @classmethod
    def from_frame(cls, frame) -> "Dataset":
        """Build from any object exposing ``columns`` and ``__getitem__`` (e.g. a DataFrame)."""
        return cls({str(c): np.asarray(frame[c], dtype=np.float64) for c in frame.columns})

    @property
    def n(self) -> int:
        return self._n

    @property
    def column_names(self) -> tuple[str, ...]:
        return tuple(self._columns)

    @property
    def columns(self) -> Mapping[str, np.ndarray]:
        return dict(self._columns)

    def __len__(self) -> int:
        return self._n

    def __contains__(self, name: object) -> bool:
        return name in self._columns

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self._columns[name]
        except KeyError:
            raise MissingColumn(name) from None

    def __repr__(self) -> str:
        return f"Dataset(n={self._n}, columns={list(self._columns)})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return self.column_names == other.column_names and all(
            np.array_equal(self._columns[k], other._columns[k]) for k in self._columns
        )

    __hash__ = None

    def take(self, index) -> "Dataset":
        """Rows selected by an integer index array or a boolean mask."""
        index = np.asarray(index)
        return Dataset({k: v[index] for k, v in self._columns.items()})

    subset = take

    def with_columns(self, **new: object) -> "Dataset":
        """Copy with columns added or replaced."""
        cols: dict[str, object] = dict(self._columns)
        cols.update(new)
        return Dataset(cols)

    def require(self, names: Iterable[str]) -> None:
        for name in names:
            if name not in self._columns:
                raise MissingColumn(name)


def as_dataset(data) -> Dataset:
    """Coerce a Dataset, mapping of columns, or DataFrame-like object."""
    if isinstance(data, Dataset):
        return data
    if hasattr(data, "columns") and hasattr(data, "__getitem__") and not isinstance(data, Mapping):
        return Dataset.from_frame(data)
    if isinstance(data, Mapping):
        return Dataset(data)
    raise InvalidData(f"cannot interpret {type(data).__name__} as a dataset")


# -- terms ------------------------------------------------------------------


def _fmt(value: float) -> str:
    text = repr(float(value))
    return text[:-2] if text.endswith(".0") else text


class Term:
    """A single design column computed from dataset variables."""

    def evaluate(self, data: Dataset) -> np.ndarray:
        raise NotImplementedError

    @property
    def variables(self) -> tuple[str, ...]:
        return (self.name,)

    @property
    def label(self) -> str:
        raise NotImplementedError

    def __str__(self) -> str:
        return self.label


@dataclass(frozen=True)
class Var(Term):
    name: str

    def evaluate(self, data):
        return data[self.name]

    @property
    def label(self):
        return self.name


@dataclass(frozen=True)
class Pow(Term):
    name: str
    k: int

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 2:
            raise TermSyntaxError(f"power must be an integer >= 2, got {self.k}")

    def evaluate(self, data):
        return data[self.name] ** int(self.k)

    @property
    def label(self):
        return f"{self.name}^{int(self.k)}"


@dataclass(frozen=True)
class Log(Term):
    name: str

    def evaluate(self, data):
        x = data[self.name]
        bad = np.flatnonzero(x <= 0)
        if bad.size:
            raise DomainError(self.label, int(bad[0]))
        return np.log(x)

    @property
    def label(self):
        return f"log({self.name})"


@dataclass(frozen=True)
class LogAbs(Term):
    name: str

    def evaluate(self, data):
        x = data[self.name]
        bad = np.flatnonzero(x == 0)
        if bad.size:
            raise DomainError(self.label, int(bad[0]))
        return np.log(np.abs(x))

    @property
    def label(self):
        return f"log(abs({self.name}))"


@dataclass(frozen=True)
class Abs(Term):
    name: str

    def evaluate(self, data):
        return np.abs(data[self.name])

    @property
    def label(self):
        return f"abs({self.name})"


@dataclass(frozen=True)
class Sin(Term):
    name: str

    def evaluate(self, data):
        return np.sin(data[self.name])

    @property
    def label(self):
        return f"sin({self.name})"


@dataclass(frozen=True)
class Cos(Term):
    name: str

    def evaluate(self, data):
        return np.cos(data[self.name])

    @property
    def label(self):
        return f"cos({self.name})"


@dataclass(frozen=True)
class CosPi(Term):
    name: str

    def evaluate(self, data):
        return np.cos(np.pi * data[self.name])

    @property
    def label(self):
        return f"cos(pi*{self.name})"


@dataclass(frozen=True)
class Exp(Term):
    scale: float
    name: str

    def evaluate(self, data):
        return np.exp(self.scale * data[self.name])

    @property
    def label(self):
        if self.scale == 1:
            return f"exp({self.name})"
        return f"exp({_fmt(self.scale)}*{self.name})"


@dataclass(frozen=True)
class Interaction(Term):
    left: str
    right: str

    def evaluate(self, data):
        return data[self.left] * data[self.right]

    @property
    def variables(self):
        return (self.left, self.right)

    @property
    def label(self):
        return f"{self.left}:{self.right}"


_NAME = r"[A-Za-z_][A-Za-z0-9_.]*"
_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_PATTERNS = [
    (re.compile(rf"^({_NAME})\s*(?:\^|\*\*)\s*(\d+)$"), lambda m: _power(m[1], m[2])),
    (re.compile(rf"^log\(\s*abs\(\s*({_NAME})\s*\)\s*\)$"), lambda m: LogAbs(m[1])),
    (re.compile(rf"^log\(\s*({_NAME})\s*\)$"), lambda m: Log(m[1])),
    (re.compile(rf"^abs\(\s*({_NAME})\s*\)$"), lambda m: Abs(m[1])),
    (re.compile(rf"^sin\(\s*({_NAME})\s*\)$"), lambda m: Sin(m[1])),
    (re.compile(rf"^cos\(\s*pi\s*\*\s*({_NAME})\s*\)$"), lambda m: CosPi(m[1])),
    (re.compile(rf"^cos\(\s*({_NAME})\s*\)$"), lambda m: Cos(m[1])),
    (re.compile(rf"^exp\(\s*({_NUM})\s*\*\s*({_NAME})\s*\)$"), lambda m: Exp(float(m[1]), m[2])),
    (re.compile(rf"^exp\(\s*({_NAME})\s*\)$"), lambda m: Exp(1.0, m[1])),
    (re.compile(rf"^({_NAME})\s*:\s*({_NAME})$"), lambda m: Interaction(m[1], m[2])),
    (re.compile(rf"^({_NAME})$"), lambda m: Var(m[1])),
]
_RESERVED = {"log", "abs", "sin", "cos", "exp", "pi", "I"}


def _power(name: str, k: str) -> Term:
    k = int(k)
    if k == 1:
        return Var(name)
    if k < 1:
        raise TermSyntaxError(f"unsupported power {name}^{k}")
    return Pow(name, k)


def _strip_wrapper(token: str) -> str:
    # R's I(...) protects arithmetic inside formulas; here it is a no-op.
    while token.startswith("I(") and token.endswith(")"):
        token = token[2:-1].strip()
    return token


def parse_term(token: str) -> Term:
    """Parse one additive term."""
    token = _strip_wrapper(token.strip())
    for pattern, build in _PATTERNS:
        match = pattern.match(token)
        if match:
            term = build(match)
            if any(v in _RESERVED for v in term.variables):
                break
            return term
    raise TermSyntaxError(f"unrecognised term {token!r}")


def _split_top_level(text: str) -> list[str]:
    parts, depth, start = [], 0, 0
    for i, ch in enumerate(text):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth < 0:
                raise TermSyntaxError(f"unbalanced parentheses in {text!r}")
        elif ch == "+" and depth == 0:
            # a sign inside a numeric literal like 1e+3 sits inside exp(...)
            parts.append(text[start:i])
            start = i + 1
    if depth != 0:
        raise TermSyntaxError(f"unbalanced parentheses in {text!r}")
    parts.append(text[start:])
    return parts


@dataclass(frozen=True)
class TermList:
    """Ordered terms plus an intercept flag."""

    terms: tuple[Term, ...] = ()
    includes_intercept: bool = True

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        labels = [t.label for t in self.terms]
        if len(set(labels)) != len(labels):
            raise TermSyntaxError(f"duplicate terms in {labels}")

    @classmethod
    def parse(cls, formula: str) -> "TermList":
        text = formula.strip()
        if "~" in text:
            # a left-hand side names the response and does not enter the design
            text = text.split("~", 1)[1].strip()
        intercept = True
        removal = re.search(r"-\s*1\s*$", text)
        if removal:
            intercept = False
            text = text[: removal.start()].strip()
        if not text:
            return cls((), intercept)
        terms = []
        for raw in _split_top_level(text):
            token = raw.strip()
            if not token:
                raise TermSyntaxError(f"empty term in {formula!r}")
            if token == "1":
                intercept = True
            elif token in ("0", "-1"):
                intercept = False
            else:
                terms.append(parse_term(token))
        return cls(tuple(terms), intercept)

    @property
    def labels(self) -> tuple[str, ...]:
        head = ("(Intercept)",) if self.includes_intercept else ()
        return head + tuple(t.label for t in self.terms)

    @property
    def n_columns(self) -> int:
        return len(self.terms) + int(self.includes_intercept)

    @property
    def variables(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for term in self.terms:
            for v in term.variables:
                seen.setdefault(v)
        return tuple(seen)

    def __len__(self) -> int:
        return self.n_columns

    def __str__(self) -> str:
        parts = ["1" if self.includes_intercept else "0"]
        parts.extend(t.label for t in self.terms)
        return " + ".join(parts)


TermsLike = Union[TermList, str, Sequence[Union[str, Term]]]


def as_terms(spec: TermsLike | None) -> TermList | None:
    """Coerce a formula string, sequence of terms, or TermList."""
    if spec is None or isinstance(spec, TermList):
        return spec
    if isinstance(spec, str):
        return TermList.parse(spec)
    items = list(spec)
    if all(isinstance(t, Term) for t in items):
        return TermList(tuple(items), True)
    return TermList.parse(" + ".join(str(t) for t in items))


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    """Evaluated design: an n x p float matrix and its column labels."""

    values: np.ndarray
    column_labels: tuple[str, ...]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


def build_design(data: Dataset, terms: TermsLike) -> DesignMatrix:
    """Evaluate ``terms`` row-wise on ``data``.

    The intercept column, when present, comes first.

    Raises
    ------
    DomainError
        If a term is undefined for some row (log of a nonpositive value) or
        evaluates to a non-finite number.
    """
    terms = as_terms(terms)
    data.require(terms.variables)
    n = data.n
    out = np.empty((n, terms.n_columns), dtype=np.float64)
    col = 0
    if terms.includes_intercept:
        out[:, 0] = 1.0
        col = 1
    with np.errstate(over="ignore", invalid="ignore"):
        for term in terms.terms:
            values = term.evaluate(data)
            bad = np.flatnonzero(~np.isfinite(values))
            if bad.size:
                raise DomainError(term.label, int(bad[0]))
            out[:, col] = values
            col += 1
    return DesignMatrix(_readonly(out), terms.labels)


# -- CSV --------------------------------------------------------------------


def load_csv(path, schema: Sequence[str] | None = None) -> Dataset:
    """Read a comma-separated file with a header row.

    Parameters
    ----------
    path : path-like
        File to read (UTF-8).
    schema : sequence of str, optional
        Columns that must be present. Only these columns are parsed and
        returned; when omitted every column is parsed.

    Returns
    -------
    Dataset
        Parsed columns in file order. Row numbers in error messages count
        data rows from 1.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or not any(h.strip() for h in header):
            raise EmptyFile(f"{path}: no header row")
        header = [h.strip() for h in header]
        if len(set(header)) != len(header):
            dup = next(h for h in header if header.count(h) > 1)
            raise ParseError(0, dup, "duplicate column name")
        wanted = list(header) if schema is None else list(schema)
        for name in wanted:
            if name not in header:
                raise MissingColumn(name)
        index = [header.index(name) for name in wanted]
        rows: list[list[float]] = []
        for line_no, row in enumerate(reader, start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise ParseError(line_no, "*", f"expected {len(header)} fields, got {len(row)}")
            parsed = []
            for name, j in zip(wanted, index):
                token = row[j].strip()
                try:
                    value = float(token)
                except ValueError:
                    raise ParseError(line_no, name, token) from None
                if not math.isfinite(value):
                    raise ParseError(line_no, name, token)
                parsed.append(value)
            rows.append(parsed)
    if not rows:
        raise EmptyFile(f"{path}: no data rows")
    matrix = np.array(rows, dtype=np.float64)
    return Dataset({name: matrix[:, k] for k, name in enumerate(wanted)})


def read_header(path) -> list[str]:
    """Header names of a CSV file, or an empty list for an empty file."""
    with open(path, newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh), None)
    return [h.strip() for h in header] if header else []


def write_csv(data: Dataset, path) -> None:
    """Write ``data`` so that :func:`load_csv` recovers it exactly."""
    names = data.column_names
    cols = [data[name] for name in names]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names)
        for i in range(data.n):
            writer.writerow([repr(float(c[i])) for c in cols])
