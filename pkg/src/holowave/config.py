"""Run configuration: a versioned TOML file validated before any run starts.

Minimal example::

    schema = 1

    [problem]
    n = 4
    mu = 0.0
    a = 0.5
    metric = "exact_ads"

    [checks]
    suites = ["hardy"]
"""

from __future__ import annotations

import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigParse, HolowaveError, ValidationFailed
from .geometry import COMPONENTS, MetricSeries, ads_metric
from .twisted import TwistParams

SCHEMA_VERSION = 1
SUITES = ("hardy", "morrey", "moser", "elliptic", "eigen", "evolve", "peel",
          "holo-linear", "holo-nonlinear", "causality")
METRICS = ("exact_ads", "model", "series")
PROFILE_KINDS = ("bump",)

DEFAULTS = {
    "problem": {"n": 4, "mu": 0.0, "a": 0.5, "metric": "exact_ads", "series_order": 6},
    "grid": {"N": 800, "grading": "graded", "ratio": 1.05, "x_min_factor": 1e-4,
             "evolution_x_min_factor": 5e-3},
    "evolution": {"T": 4.0, "cfl": 1.0, "stride": 20},
    "datum": {"modes": [{"ell": 0, "profile": "bump", "center": 1.5, "width": 0.5,
                         "amplitude": 1.0}]},
    "peeling": {"k": 2, "m": 1, "a0_factor": 0.5},
    "nonlinearity": {"enabled": False, "q": None, "gamma_hat": [1.0]},
    "checks": {"suites": []},
    "output": {"directory": "holowave_out"},
}

OUTPUT_ENV = "HOLOWAVE_OUTPUT_DIR"


@dataclass
class RunConfig:
    """Validated configuration."""

    problem: dict
    grid: dict
    evolution: dict
    datum: dict
    peeling: dict
    nonlinearity: dict
    checks: dict
    output: dict
    source: str = ""
    suite_options: dict = field(default_factory=dict)

    @property
    def suites(self) -> list:
        return list(self.checks["suites"])

    def params(self) -> TwistParams:
        return TwistParams(int(self.problem["n"]), float(self.problem["mu"]),
                           float(self.problem["a"]))

    def metric(self) -> MetricSeries | None:
        kind = self.problem["metric"]
        n = int(self.problem["n"])
        if kind == "model":
            return None
        if kind == "exact_ads":
            return ads_metric(n, int(self.problem.get("series_order", 6)))
        table = self.problem["metric_table"]
        comps = {name: list(map(float, table.get(name, [0.0]))) for name in COMPONENTS}
        order = int(self.problem.get("series_order", max(len(v) for v in comps.values()) + 2))
        return MetricSeries(n, comps, order=order)

    def options(self, suite: str) -> dict:
        return dict(self.suite_options.get(suite, {}))


def _merge(defaults: dict, given: dict) -> dict:
    out = dict(defaults)
    for key, val in given.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = val
    return out


def parse_text(text: str, source: str = "<string>") -> dict:
    """Parse TOML text, mapping syntax errors to :class:`ConfigParse` with line/column."""
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        msg = str(exc)
        hit = re.search(r"line (\d+), column (\d+)", msg)
        line, col = (int(hit.group(1)), int(hit.group(2))) if hit else (0, 0)
        raise ConfigParse(f"{source}:{line}:{col}: {msg}", line=line, column=col) from exc


def _fail(invariant: str, message: str, **details):
    raise ValidationFailed(message, invariant=invariant, **details)


def validate(raw: dict, source: str = "<string>") -> RunConfig:
    """Check the schema and physical parameters.

    Raises
    ------
    ValidationFailed
        Naming the violated invariant (for example ``BelowThreshold``).
    """
    schema = raw.get("schema")
    if schema != SCHEMA_VERSION:
        _fail("schema", f"schema must be {SCHEMA_VERSION}, got {schema!r}")
    known = set(DEFAULTS) | {"schema", "suite"}
    unknown = sorted(set(raw) - known)
    if unknown:
        _fail("unknown_section", f"unknown sections {unknown}", sections=unknown)
    merged = {k: _merge(v, raw.get(k, {})) for k, v in DEFAULTS.items()}
    prob = merged["problem"]
    if prob["metric"] not in METRICS:
        _fail("metric", f"metric must be one of {METRICS}")
    if prob["metric"] == "series" and "metric_table" not in prob:
        _fail("metric_table", "metric = 'series' needs a [problem.metric_table]")
    try:
        params = TwistParams(int(prob["n"]), float(prob["mu"]), float(prob["a"]))
    except HolowaveError as exc:
        _fail(type(exc).__name__, f"invalid physical parameters: {exc}",
              cause=exc.code)
    except (TypeError, ValueError) as exc:
        _fail("problem", f"invalid physical parameters: {exc}")
    grid = merged["grid"]
    if int(grid["N"]) < 16:
        _fail("grid.N", "grid.N must be at least 16")
    if grid["grading"] not in ("uniform", "graded", "geometric"):
        _fail("grid.grading", "grading must be uniform, graded or geometric")
    ev = merged["evolution"]
    if float(ev["T"]) <= 0 or int(ev["stride"]) < 1:
        _fail("evolution", "T must be positive and stride at least 1")
    for mode in merged["datum"]["modes"]:
        if mode.get("profile", "bump") not in PROFILE_KINDS:
            _fail("datum.profile", f"unknown profile kind {mode.get('profile')!r}")
        if int(mode.get("ell", 0)) < 0 or float(mode.get("width", 1.0)) <= 0:
            _fail("datum.mode", "modes need ell >= 0 and a positive width")
    suites = merged["checks"]["suites"]
    bad = [s for s in suites if s not in SUITES]
    if bad:
        _fail("checks.suites", f"unknown suites {bad}", suites=bad)
    nl = merged["nonlinearity"]
    if nl["enabled"] and nl["q"] is not None and float(nl["q"]) < params.alpha + 2.0:
        _fail("ExponentTooSmall", f"q must be at least alpha + 2 = {params.alpha + 2.0}")
    options = raw.get("suite", {})
    stray = sorted(set(options) - set(SUITES))
    if stray:
        _fail("suite", f"options given for unknown suites {stray}", suites=stray)
    return RunConfig(merged["problem"], grid, ev, merged["datum"], merged["peeling"], nl,
                     merged["checks"], merged["output"], source=source, suite_options=options)


def load_config(path) -> RunConfig:
    """Read, parse and validate a configuration file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigParse(f"cannot read {path}: {exc}", line=0, column=0) from exc
    return validate(parse_text(text, str(path)), str(path))


def output_directory(cfg: RunConfig, override: str | None = None) -> Path:
    """Output directory: explicit override, then the environment override, then the config."""
    import os

    if override:
        return Path(override)
    env = os.environ.get(OUTPUT_ENV)
    if env:
        return Path(env)
    return Path(cfg.output["directory"])
