"""Command-line runner.

``fit`` reads a JSON or YAML run configuration::

    method: dwols                 # dwols | gdwols | dwglm | dwsurv | dwsurv_mt
    input:                        # either a CSV file ...
      csv: data.csv               # relative to the config file
    # ... or a built-in scenario
    # input: {scenario: dwols_basic, n: 10000, seed: 1, params: {}, misspecify: {}}
    outcome: y                    # dwols, gdwols, dwglm
    delta: delta                  # dwsurv, dwsurv_mt
    seed: 0
    stages:                       # optional for scenario input
      - treatment: a1
        tf: "1 + x1"
        blip: "1 + x1"
        treat: "1 + x1"
        weight: absdiff
    dwglm: {link: logit, replicates: 25}
    bootstrap: {B: 200, mode: full_n, m: null, alpha_tuning: 0.05, confidence_level: 0.95}
    output: {path: report.json, format: json}
    workers: 1

Stage keys beyond the common ones: ``quadratic`` and ``numerator`` for
gdwols; ``time``, ``entry``, ``cens``, ``no_censoring`` and
``censoring_column`` for the survival methods; ``n_treatments`` and
``treatment_weights`` for dwsurv_mt; ``propensity_column`` for all.

Exit codes: 0 success, 1 invalid input or configuration, 2 numerical
failure during estimation.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import io
import json
import logging
import os
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import yaml

from ._version import __version__
from .dwglm import DWGLM
from .dwols import DWOLS, StageSpec
from .dwsurv import DWSurv, SurvivalStageSpec
from .dwsurv_mt import DWSurvMT, MultiStageSpec
from .exceptions import (
    ConfigError,
    DTRError,
    EmptyFile,
    NumericalError,
    SchemaMismatch,
    ValidationError,
)
from .gdwols import GDWOLS, DoseStageSpec
from .inference import BootstrapConfig, bootstrap_ci, estimate_nonregularity
from .regime import BinaryRule, DoseRule
from .report import FitReport, build_report, regime_from_report, write_atomic
from .simgen import SCENARIOS, Scenario
from .tabular import load_csv, write_csv

__all__ = ["RunConfig", "prepare", "run", "execute", "predict_rows", "main"]

log = logging.getLogger("dtrwols")

METHODS = {
    "dwols": (DWOLS, StageSpec),
    "gdwols": (GDWOLS, DoseStageSpec),
    "dwglm": (DWGLM, StageSpec),
    "dwsurv": (DWSurv, SurvivalStageSpec),
    "dwsurv_mt": (DWSurvMT, MultiStageSpec),
}
SURVIVAL = ("dwsurv", "dwsurv_mt")
LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}

_TOP_KEYS = {"method", "input", "outcome", "delta", "seed", "stages", "weight", "dwglm",
             "bootstrap", "nonregularity", "output", "workers"}
_STAGE_KEYS = {
    "common": {"treatment", "tf", "blip", "treat", "weight", "propensity_column"},
    "gdwols": {"quadratic", "numerator"},
    "survival": {"time", "entry", "cens", "no_censoring", "censoring_column"},
    "dwsurv_mt": {"n_treatments", "treatment_weights"},
}
# settings that cannot change the report and so stay out of its hash
_UNHASHED = ("workers", "output")


@dataclass
class RunConfig:
    """Validated ``fit`` configuration."""

    method: str
    input: dict
    stages: list | None
    seed: int = 0
    outcome: str = "y"
    delta: str = "delta"
    dwglm: dict = field(default_factory=dict)
    bootstrap: BootstrapConfig | None = None
    nonregularity: bool = True
    output_path: str | None = None
    output_format: str = "json"
    workers: int | None = None
    raw: dict = field(default_factory=dict)
    base_dir: Path = Path(".")

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
        try:
            raw = json.loads(text) if path.suffix.lower() == ".json" else yaml.safe_load(text)
        except (json.JSONDecodeError, yaml.YAMLError) as exc:
            raise ConfigError("config", f"cannot parse {path}: {exc}") from None
        return cls.from_mapping(raw, path.parent)

    @classmethod
    def from_mapping(cls, raw, base_dir=".") -> "RunConfig":
        if not isinstance(raw, Mapping):
            raise ConfigError("config", "top level must be a mapping")
        raw = copy.deepcopy(dict(raw))
        unknown = set(raw) - _TOP_KEYS
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown key")
        method = raw.get("method")
        if method not in METHODS:
            raise ConfigError("method", f"must be one of {sorted(METHODS)}, got {method!r}")
        inp = raw.get("input")
        if not isinstance(inp, Mapping) or ("csv" in inp) == ("scenario" in inp):
            raise ConfigError("input", "give exactly one of 'csv' or 'scenario'")
        if "scenario" in inp and inp["scenario"] not in SCENARIOS:
            raise ConfigError("input.scenario", f"unknown scenario {inp['scenario']!r}")
        stages = raw.get("stages")
        if stages is None and "csv" in inp:
            raise ConfigError("stages", "required for CSV input")
        if stages is not None and (not isinstance(stages, list) or not stages):
            raise ConfigError("stages", "must be a non-empty list")
        seed = raw.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
            raise ConfigError("seed", "must be a non-negative integer")
        boot = raw.get("bootstrap")
        boot_cfg = None
        if boot is not None:
            if not isinstance(boot, Mapping):
                raise ConfigError("bootstrap", "must be a mapping")
            try:
                boot_cfg = BootstrapConfig(**{**dict(boot), "rng_seed": seed})
            except TypeError as exc:
                raise ConfigError("bootstrap", str(exc)) from None
            except ValidationError as exc:
                raise ConfigError("bootstrap", str(exc)) from None
        output = raw.get("output") or {}
        if not isinstance(output, Mapping):
            raise ConfigError("output", "must be a mapping")
        fmt = output.get("format", "json")
        if fmt not in ("json", "csv"):
            raise ConfigError("output.format", "must be 'json' or 'csv'")
        workers = raw.get("workers")
        if workers is not None and (not isinstance(workers, int) or workers < 1):
            raise ConfigError("workers", "must be a positive integer")
        dwglm = raw.get("dwglm") or {}
        if set(dwglm) - {"link", "replicates", "keep_observed"}:
            raise ConfigError("dwglm", f"unknown keys {sorted(set(dwglm) - {'link', 'replicates', 'keep_observed'})}")
        cfg = cls(
            method=method,
            input=dict(inp),
            stages=stages,
            seed=seed,
            outcome=raw.get("outcome", "y"),
            delta=raw.get("delta", "delta"),
            dwglm=dict(dwglm),
            bootstrap=boot_cfg,
            nonregularity=bool(raw.get("nonregularity", True)),
            output_path=output.get("path"),
            output_format=fmt,
            workers=workers,
            raw=raw,
            base_dir=Path(base_dir),
        )
        if stages is not None:
            cfg.stage_specs()  # validate early
        return cfg

    def config_hash(self) -> str:
        """SHA-256 of the canonical configuration, ignoring workers and output."""
        body = {k: v for k, v in self.raw.items() if k not in _UNHASHED}
        body["seed"] = self.seed
        canon = json.dumps(body, sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()

    def stage_specs(self) -> list:
        specs = []
        for i, raw in enumerate(self.stages):
            specs.append(_stage_spec(self.method, raw, f"stages[{i}]", i + 1, self.raw.get("weight")))
        return specs


def _stage_spec(method: str, raw, where: str, stage: int, default_weight):
    if not isinstance(raw, Mapping):
        raise ConfigError(where, "must be a mapping")
    allowed = set(_STAGE_KEYS["common"])
    if method == "gdwols":
        allowed |= _STAGE_KEYS["gdwols"]
    if method in SURVIVAL:
        allowed |= _STAGE_KEYS["survival"]
    if method == "dwsurv_mt":
        allowed |= _STAGE_KEYS["dwsurv_mt"]
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"{where}.{sorted(unknown)[0]}", f"not a {method} stage key")
    for key in ("treatment", "tf", "blip"):
        if key not in raw:
            raise ConfigError(f"{where}.{key}", "required")
    kwargs: dict[str, Any] = {
        "treatment": raw["treatment"],
        "tf_terms": raw["tf"],
        "blip_terms": raw["blip"],
        "treat_terms": raw.get("treat", "1"),
        "propensity_column": raw.get("propensity_column"),
        "stage": stage,
    }
    weight = raw.get("weight", default_weight)
    if weight is not None:
        kwargs["weight"] = weight
    if method == "gdwols":
        kwargs["quadratic_terms"] = raw.get("quadratic", "1")
        kwargs["numerator"] = raw.get("numerator")
    if method in SURVIVAL:
        if "time" not in raw:
            raise ConfigError(f"{where}.time", "required for survival methods")
        has_cens = "cens" in raw or "censoring_column" in raw
        if not has_cens and not raw.get("no_censoring", False):
            raise ConfigError(f"{where}.cens", "give censoring terms, a censoring_column, or no_censoring: true")
        if has_cens and raw.get("no_censoring", False):
            raise ConfigError(f"{where}.no_censoring", "conflicts with a censoring model")
        kwargs.update(time=raw["time"], entry=raw.get("entry"), cens_terms=raw.get("cens"),
                      censoring_column=raw.get("censoring_column"))
    if method == "dwsurv_mt":
        kwargs["n_treatments"] = raw.get("n_treatments")
        kwargs["treatment_weights"] = raw.get("treatment_weights", "uniform")
    cls = METHODS[method][1]
    try:
        return cls(**kwargs)
    except ValidationError as exc:
        raise ConfigError(where, str(exc)) from None


def _load_input(cfg: RunConfig):
    inp = cfg.input
    if "csv" in inp:
        path = Path(inp["csv"])
        if not path.is_absolute():
            path = cfg.base_dir / path
        return load_csv(path), None
    allowed = {"scenario", "n", "seed", "params", "misspecify", "options"}
    if set(inp) - allowed:
        raise ConfigError(f"input.{sorted(set(inp) - allowed)[0]}", "unknown key")
    try:
        scenario = Scenario(
            inp["scenario"],
            n=int(inp.get("n", 10000)),
            seed=int(inp.get("seed", cfg.seed)),
            params=inp.get("params") or {},
            misspecify=inp.get("misspecify") or {},
        )
    except ValidationError as exc:
        raise ConfigError("input", str(exc)) from None
    return scenario.generate().data, scenario


def _estimator(cfg: RunConfig, stages):
    cls = METHODS[cfg.method][0]
    if cfg.method in SURVIVAL:
        return cls(stages=stages, delta=cfg.delta)
    if cfg.method == "dwglm":
        return cls(stages=stages, outcome=cfg.outcome, random_state=cfg.seed, **cfg.dwglm)
    return cls(stages=stages, outcome=cfg.outcome)


def prepare(cfg: RunConfig):
    """Load the input and stage specifications; raises only validation errors."""
    data, scenario = _load_input(cfg)
    if cfg.stages is not None:
        stages = cfg.stage_specs()
    else:
        stages = scenario.analysis_stages(**(cfg.input.get("options") or {}))
    data.require(dict.fromkeys(v for s in stages for v in s.variables()))
    return data, scenario, stages


def run(cfg: RunConfig, workers: int | None = None) -> FitReport:
    """Fit the configured estimator and assemble the report."""
    return execute(cfg, *prepare(cfg), workers=workers)


def execute(cfg: RunConfig, data, scenario, stages, workers: int | None = None) -> FitReport:
    """Estimation step of :func:`run` on already loaded inputs."""
    estimator = _estimator(cfg, stages)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        estimator.fit(data)
        fit = estimator.result_
        p_hat = {}
        if cfg.nonregularity:
            for sf in fit.stages:
                if isinstance(sf.rule, BinaryRule) and sf.covariance is not None:
                    p_hat[sf.stage] = estimate_nonregularity(sf, data).p_hat
        boot = None
        if cfg.bootstrap is not None:
            final = p_hat.get(fit.stages[-1].stage)
            if cfg.bootstrap.mode == "adaptive_m" and final is None:
                raise ConfigError("bootstrap.mode", "adaptive_m needs a non-regularity estimate of the last stage")
            n_workers = workers or cfg.workers or os.cpu_count() or 1
            boot = bootstrap_ci(estimator, data, cfg.bootstrap, p_hat=final, workers=n_workers)
    messages = list(dict.fromkeys(str(w.message) for w in caught))
    for msg in messages:
        log.warning(msg)
    inp = {k: v for k, v in cfg.input.items()}
    if scenario is not None:
        inp = {"scenario": scenario.name, "n": scenario.n, "seed": scenario.seed}
    provenance = {"seed": cfg.seed, "config_hash": cfg.config_hash(), "input": inp}
    diagnostics = {"warnings": messages}
    if cfg.bootstrap is not None:
        diagnostics["bootstrap_mode"] = cfg.bootstrap.mode
    return build_report(fit, bootstrap=boot, p_hat=p_hat, diagnostics=diagnostics, provenance=provenance)


def predict_rows(report: FitReport, data) -> tuple[list[str], list[list[str]]]:
    """Per-row actions for every stage whose blip variables are present.

    Rows where a stage's rule is undefined get an empty action and the
    error class name in that stage's error column.
    """
    regime = regime_from_report(report)
    names = set(data.column_names)
    header: list[str] = []
    columns: list[tuple[list, list]] = []
    for entry, rule in zip(report.stages, regime.rules):
        if not set(rule.variables) <= names:
            continue
        j = entry["stage"]
        header += [f"stage{j}_action", f"stage{j}_error"]
        actions, errors = _predict_stage(rule, data)
        columns.append((actions, errors))
    if not columns:
        raise SchemaMismatch("no stage rule can be evaluated from the supplied columns")
    rows = []
    for i in range(data.n):
        row = []
        for actions, errors in columns:
            row += [actions[i], errors[i]]
        rows.append(row)
    return header, rows


def _fmt_action(v: float) -> str:
    return format(float(v), ".17g")


def _predict_stage(rule, data):
    n = data.n
    try:
        if isinstance(rule, DoseRule):
            dose, ok = rule.recommend_rows(data)
            return (
                [_fmt_action(d) if k else "" for d, k in zip(dose, ok)],
                ["" if k else "ConcavityViolation" for k in ok],
            )
        values = rule.recommend(data)
        return [_fmt_action(v) for v in values], [""] * n
    except DTRError:
        pass
    # isolate the failing rows
    actions, errors = [], []
    for i in range(n):
        row = data.take([i])
        try:
            value = rule.recommend(row)[0]
            actions.append(_fmt_action(value))
            errors.append("")
        except DTRError as exc:
            actions.append("")
            errors.append(type(exc).__name__)
    return actions, errors


def _configure_logging() -> None:
    level_name = os.environ.get("DTR_LOG_LEVEL", "warn").lower()
    if level_name not in LOG_LEVELS:
        raise ConfigError("DTR_LOG_LEVEL", f"must be one of {sorted(LOG_LEVELS)}, got {level_name!r}")
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger("dtrwols")
    root.handlers[:] = [handler]
    root.setLevel(LOG_LEVELS[level_name])
    root.propagate = False


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dtrwols", description="Dynamic treatment regime estimation")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="fit a regime from a configuration file")
    fit.add_argument("--config", required=True)
    fit.add_argument("--seed", type=int)
    fit.add_argument("--workers", type=int)
    fit.add_argument("--out")

    pred = sub.add_parser("predict", help="recommend actions for new individuals")
    pred.add_argument("--report", required=True)
    pred.add_argument("--data", required=True)
    pred.add_argument("--out", help="output CSV (standard output by default)")

    sim = sub.add_parser("simulate", help="write a simulated dataset")
    sim.add_argument("--scenario", required=True)
    sim.add_argument("--n", type=int, required=True)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", required=True)
    return parser


def _cmd_fit(args) -> int:
    cfg = RunConfig.load(args.config)
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed", "must be non-negative")
        cfg.seed = args.seed
        if cfg.bootstrap is not None:
            cfg.bootstrap = BootstrapConfig(**{**cfg.bootstrap.__dict__, "rng_seed": args.seed})
    if args.workers is not None and args.workers < 1:
        raise ConfigError("--workers", "must be a positive integer")
    out = args.out or cfg.output_path
    prepared = prepare(cfg)
    try:
        report = execute(cfg, *prepared, workers=args.workers)
    except ConfigError:
        raise
    except DTRError as exc:
        raise _EstimationFailure(exc) from exc
    text = report.render(cfg.output_format)
    if out:
        write_atomic(out, text)
        sys.stdout.write(report.summary())
    else:
        sys.stdout.write(text)
    return 0


class _EstimationFailure(Exception):
    def __init__(self, cause: DTRError):
        super().__init__(str(cause))
        self.cause = cause


def _cmd_predict(args) -> int:
    try:
        report = FitReport.load(args.report)
    except OSError as exc:
        raise ConfigError("--report", f"cannot read {args.report}: {exc.strerror}") from None
    try:
        data = load_csv(args.data)
    except EmptyFile:
        text = ""
    else:
        header, rows = predict_rows(report, data)
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        text = buf.getvalue()
    if args.out:
        write_atomic(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_simulate(args) -> int:
    scenario = Scenario(args.scenario, n=args.n, seed=args.seed)
    generated = scenario.generate()
    write_csv(generated.data, args.out)
    if generated.redraws:
        log.info("%d individuals redrawn to keep survival times positive", generated.redraws)
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        _configure_logging()
        handler = {"fit": _cmd_fit, "predict": _cmd_predict, "simulate": _cmd_simulate}[args.command]
        return handler(args)
    except _EstimationFailure as exc:
        sys.stderr.write(f"error: estimation failed: {type(exc.cause).__name__}: {exc.cause}\n")
        return 2
    except NumericalError as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return 2
    except (ValidationError, OSError) as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
