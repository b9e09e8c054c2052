"""Fit reports: construction from fits, byte-stable rendering, parsing.

JSON reports keep a fixed field order and print floats with 17 significant
digits so that the same inputs always give the same bytes and every float
survives a render/parse round trip exactly.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from ._version import __version__
from .exceptions import SchemaMismatch
from .glm_core import Coefficients
from .regime import ArgmaxRule, BinaryRule, DoseRule, Regime
from .tabular import TermList
from .weights import TreatmentWeights

__all__ = [
    "SCHEMA_VERSION",
    "FitReport",
    "build_report",
    "render_json",
    "write_atomic",
    "rule_from_stage",
    "regime_from_report",
]

SCHEMA_VERSION = "1.0"
_FIELDS = ("schema_version", "method", "n", "regime", "stages", "bootstrap", "diagnostics", "provenance")


def _format_float(x: float) -> str:
    if not np.isfinite(x):
        return "null"
    text = format(x, ".17g")
    if all(c.isdigit() or c == "-" for c in text):
        text += ".0"
    return text


def _render(obj, level: int) -> str:
    pad = "  " * (level + 1)
    end = "  " * level
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _format_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, Mapping):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_render(v, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [pad + _render(v, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot render {type(obj).__name__}")


def render_json(obj) -> str:
    """Deterministic JSON text with 17-significant-digit floats."""
    return _render(obj, 0) + "\n"


def _plain(obj):
    """Convert numpy scalars and tuples to JSON-native Python values."""
    if isinstance(obj, Mapping):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if np.isfinite(x) else None
    return obj


@dataclass(eq=True)
class FitReport:
    """Machine-readable result of one ``fit`` run."""

    method: str
    n: int
    regime: list
    stages: list
    bootstrap: dict | None = None
    diagnostics: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    schema_version: str = SCHEMA_VERSION

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in _FIELDS}

    def render(self, fmt: str = "json") -> str:
        if fmt == "json":
            return render_json(self.to_dict())
        if fmt == "csv":
            return self._render_csv()
        raise ValueError(f"unknown report format {fmt!r}")

    @classmethod
    def parse(cls, text: str) -> "FitReport":
        """Inverse of :meth:`render` for JSON reports.

        Raises
        ------
        SchemaMismatch
            If the text is not a report or its major schema version is unknown.
        """
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SchemaMismatch(f"report is not valid JSON: {exc}") from None
        if not isinstance(raw, dict) or "schema_version" not in raw:
            raise SchemaMismatch("report has no schema_version")
        version = str(raw["schema_version"])
        if version.split(".")[0] != SCHEMA_VERSION.split(".")[0]:
            raise SchemaMismatch(f"unsupported report schema version {version}")
        missing = [k for k in ("method", "n", "regime", "stages") if k not in raw]
        if missing:
            raise SchemaMismatch(f"report lacks fields {missing}")
        return cls(**{k: raw.get(k) for k in _FIELDS if k in raw})

    @classmethod
    def load(cls, path) -> "FitReport":
        return cls.parse(Path(path).read_text(encoding="utf-8"))

    def _render_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["stage", "section", "term", "estimate", "se", "lower", "upper"])

        def cell(v):
            return "" if v is None else _format_float(float(v))

        for st in self.stages:
            for row in st["blip"]:
                writer.writerow([st["stage"], "blip", row["term"], cell(row["estimate"]),
                                 cell(row["se"]), cell(row["lower"]), cell(row["upper"])])
            for row in st["treatment_free"]:
                writer.writerow([st["stage"], "treatment_free", row["term"], cell(row["estimate"]), "", "", ""])
        return buf.getvalue()

    def summary(self) -> str:
        """Human-readable overview."""
        lines = [f"method: {self.method} (n={self.n})", "Recommended regime:"]
        lines += [f"  {r}" for r in self.regime]
        for st in self.stages:
            lines.append(f"Stage {st['stage']} blip estimates:")
            for row in st["blip"]:
                ci = ""
                if row["lower"] is not None:
                    ci = f"  [{row['lower']:.4g}, {row['upper']:.4g}]"
                lines.append(f"  {row['term']:<24} {row['estimate']: .6g}{ci}")
            if st.get("p_hat") is not None:
                lines.append(f"  non-regularity p_hat: {st['p_hat']:.4g}")
        return "\n".join(lines) + "\n"


def _stage_entry(fit, lower, upper) -> dict:
    spec = fit.spec
    rule = fit.rule
    cov = fit.psi_covariance
    se = None if cov is None else np.sqrt(np.maximum(np.diag(cov), 0.0))
    blip = []
    for i, (label, value) in enumerate(zip(fit.psi.labels, fit.psi.values)):
        blip.append({
            "term": label,
            "estimate": value,
            "se": None if se is None else se[i],
            "lower": None if lower is None else lower[i],
            "upper": None if upper is None else upper[i],
        })
    entry: dict[str, Any] = {
        "stage": fit.stage,
        "treatment": spec.treatment,
        "rule_kind": rule.kind,
        "rule": rule.describe(),
        "blip_terms": str(spec.blip_terms),
    }
    if isinstance(rule, DoseRule):
        entry["quadratic_terms"] = str(rule.quadratic_terms)
    if isinstance(rule, ArgmaxRule):
        entry["n_treatments"] = rule.n_treatments
        entry["treatment_weights"] = list(rule.m.values)
    entry["blip"] = blip
    entry["treatment_free"] = [{"term": k, "estimate": v} for k, v in zip(fit.beta.labels, fit.beta.values)]
    entry["treatment_model"] = {
        "terms": str(spec.treat_terms),
        "coefficients": None if fit.alpha is None else [
            {"term": k, "estimate": v} for k, v in zip(fit.alpha.labels, fit.alpha.values)
        ],
    }
    w = fit.weights[fit.rows]
    entry["weights"] = {
        "rule": spec.weight,
        "n_used": int(fit.rows.sum()),
        "min": float(w.min()),
        "max": float(w.max()),
        "mean": float(w.mean()),
    }
    entry["convergence"] = {
        "treatment_converged": bool(fit.treatment_converged),
        "iterations": int(fit.treatment_iterations),
    }
    entry["p_hat"] = None
    return entry


def build_report(fit, *, bootstrap=None, p_hat: Mapping[int, float] | None = None,
                 diagnostics: Mapping[str, Any] | None = None,
                 provenance: Mapping[str, Any] | None = None) -> FitReport:
    """Assemble a :class:`FitReport` from a ``DTRFit``.

    Parameters
    ----------
    fit : DTRFit
    bootstrap : BootstrapResult, optional
        Intervals over the concatenated blip vector, stage 1 first.
    p_hat : mapping of stage -> float, optional
    """
    stages = []
    offset = 0
    for sf in fit.stages:
        k = len(sf.psi)
        lo = hi = None
        if bootstrap is not None:
            lo = bootstrap.lower[offset: offset + k]
            hi = bootstrap.upper[offset: offset + k]
        offset += k
        entry = _stage_entry(sf, lo, hi)
        if p_hat and sf.stage in p_hat:
            entry["p_hat"] = p_hat[sf.stage]
        stages.append(entry)
    boot = None
    if bootstrap is not None:
        boot = {
            "B": int(bootstrap.samples.shape[0] + bootstrap.n_failed),
            "m": bootstrap.m,
            "n_failed": bootstrap.n_failed,
            "confidence_level": bootstrap.confidence_level,
        }
    return FitReport(
        method=fit.method,
        n=int(fit.n),
        regime=list(fit.regime.describe()),
        stages=_plain(stages),
        bootstrap=_plain(boot),
        diagnostics=_plain(dict(diagnostics or {})),
        provenance=_plain({"version": __version__, **dict(provenance or {})}),
    )


def write_atomic(path, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    directory.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def rule_from_stage(entry: Mapping[str, Any]):
    """Rebuild the decision rule stored in one report stage."""
    try:
        kind = entry["rule_kind"]
        terms = TermList.parse(entry["blip_terms"])
        values = np.array([row["estimate"] for row in entry["blip"]], dtype=np.float64)
        labels = tuple(row["term"] for row in entry["blip"])
        if kind == "binary":
            return BinaryRule(Coefficients(values, labels), terms)
        if kind == "dose":
            quad = TermList.parse(entry["quadratic_terms"])
            q = terms.n_columns
            return DoseRule(
                Coefficients(values[:q], labels[:q]),
                Coefficients(values[q:], labels[q:]),
                terms,
                quad,
            )
        if kind == "argmax":
            N = int(entry["n_treatments"])
            m = TreatmentWeights(np.asarray(entry["treatment_weights"], dtype=np.float64))
            return ArgmaxRule(values.reshape(N, terms.n_columns), terms, m)
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaMismatch(f"stage {entry.get('stage')}: malformed rule ({exc})") from None
    raise SchemaMismatch(f"unknown rule kind {kind!r}")


def regime_from_report(report: FitReport) -> Regime:
    return Regime(tuple(rule_from_stage(s) for s in report.stages))


def stage_columns(report: FitReport) -> Sequence[tuple[int, str]]:
    return [(int(s["stage"]), s["treatment"]) for s in report.stages]
