"""JSON run configuration with defaults and path-qualified validation.

Parsing never stops at the first problem: :func:`parse_config` collects every
semantic error with its key path (``model.K``, ``sweep.values[2]`` ...) and
raises a single :class:`ValidationError`.
"""
from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass

from . import grid as G
from .errors import BschError
from .experiments import (
    RNG_ALGORITHM,
    Constant,
    Scenario,
    SeededNoise,
    SweepParam,
    SweepSpec,
    TwoPhaseBand,
    potential_from_dict,
)
from .model import ModelParams
from .stepper import LinearSolver, StepperConfig

__all__ = ["DEFAULTS", "RunConfig", "ParseError", "ValidationError", "parse_config", "emit_config",
           "defaults_text"]

DEFAULTS: dict = {
    "grid": {"nx": 64, "ny": 32, "lx": 32.0, "ly": 16.0},
    "time": {"dt": 1e-3, "t_end": 1.0, "records_per_unit_time": 100.0, "snapshots": 20},
    "model": {
        "K": 1.0,
        "sigma": 0.0,
        "yosida_eps": None,
        "yosida_rho": 1.0,
        "potential": {"kind": "logarithmic", "theta": 1.0, "theta_c": 2.0},
        "potential_surf": None,
    },
    "init": {"kind": "seeded_noise", "mean_bulk": 0.0, "mean_surf": 0.0, "amplitude": 0.05, "seed": 0,
             "match_trace": True, "generator": RNG_ALGORITHM},
    "solver": {
        "newton_tol": 1e-11,
        "newton_max_iter": 50,
        "linesearch_shrink": 0.5,
        "separation_guard": 0.9,
        "linear": {"kind": "direct", "tol": 1e-12, "max_iter": 1000},
    },
    "output": {"directory": "run", "emit_plots": True},
    "sweep": None,
}

_INIT_FIELDS = {
    "constant": {"m": 0.0, "m_surf": None},
    "seeded_noise": {"mean_bulk": 0.0, "mean_surf": 0.0, "amplitude": 0.05, "seed": 0,
                     "match_trace": True, "generator": RNG_ALGORITHM},
    "two_phase_band": {"position": 8.0, "width": 8.0, "amplitude": 0.9, "interface": 1.0},
}
_POTENTIAL_FIELDS = {
    "logarithmic": {"theta": 1.0, "theta_c": 2.0},
    "quartic": {},
    "double_obstacle": {"theta_c": 1.0},
}
_SWEEP_DEFAULTS = {"param": "K", "values": [1.0, 0.5, 0.25, 0.125, 0.0625, 0.0]}


class ParseError(BschError, ValueError):
    """Syntax error in the configuration text."""

    def __init__(self, msg: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {msg}")
        self.line, self.column = line, column


class ValidationError(BschError, ValueError):
    """One or more semantic errors, each tagged with its key path."""

    def __init__(self, errors: list[tuple[str, str]]):
        self.errors = list(errors)
        super().__init__("; ".join(f"{path}: {msg}" for path, msg in self.errors))


@dataclass(frozen=True)
class RunConfig:
    """A validated configuration.  ``data`` is the fully defaulted JSON tree."""

    data: dict

    def __eq__(self, other):
        return isinstance(other, RunConfig) and self.data == other.data

    def __getitem__(self, key):
        return self.data[key]

    def grid(self) -> G.Grid:
        return G.Grid(**self.data["grid"])

    def params(self) -> ModelParams:
        m = self.data["model"]
        pb = potential_from_dict(m["potential"])
        ps = pb if m["potential_surf"] is None else potential_from_dict(m["potential_surf"])
        return ModelParams(K=m["K"], sigma=m["sigma"], yosida_eps=m["yosida_eps"],
                           yosida_rho=m["yosida_rho"], potential_bulk=pb, potential_surf=ps)

    def stepper(self) -> StepperConfig:
        s = self.data["solver"]
        lin = s["linear"]
        return StepperConfig(dt=self.data["time"]["dt"], newton_tol=s["newton_tol"],
                             newton_max_iter=s["newton_max_iter"],
                             linesearch_shrink=s["linesearch_shrink"],
                             separation_guard=s["separation_guard"],
                             linear_solver=LinearSolver(lin["kind"]), linear_tol=lin["tol"],
                             linear_max_iter=lin["max_iter"])

    def initial_data(self):
        d = dict(self.data["init"])
        kind = d.pop("kind")
        return {"constant": Constant, "seeded_noise": SeededNoise, "two_phase_band": TwoPhaseBand}[kind](**d)

    def scenario(self) -> Scenario:
        t = self.data["time"]
        dt = t["dt"]
        every = max(1, int(round(1.0 / (dt * t["records_per_unit_time"]))))
        return Scenario(grid=self.grid(), params=self.params(), stepper=self.stepper(),
                        init=self.initial_data(), t_end=t["t_end"], record_every=every,
                        n_snapshots=t["snapshots"])

    def sweep_spec(self) -> SweepSpec:
        sw = self.data["sweep"]
        if sw is None:
            raise ValidationError([("sweep", "missing sweep section")])
        return SweepSpec(self.scenario(), SweepParam(sw["param"]), tuple(sw["values"]))


# ---------------------------------------------------------------------------
# parsing


def _merge(defaults, given, path, errors):
    """Fill defaults into ``given``; unknown keys are errors."""
    if not isinstance(given, dict):
        errors.append((path, f"expected an object, got {type(given).__name__}"))
        return copy.deepcopy(defaults)
    out = copy.deepcopy(defaults)
    for key, val in given.items():
        sub = f"{path}.{key}" if path else key
        if key not in defaults:
            errors.append((sub, "unknown key"))
            continue
        out[key] = val
    return out


def _num(tree, path, errors, *, integer=False, cond=None, desc="", allow_none=False):
    parts = path.split(".")
    node = tree
    for p in parts[:-1]:
        node = node[p]
    v = node[parts[-1]]
    if v is None and allow_none:
        return
    ok_type = isinstance(v, int) and not isinstance(v, bool) if integer else (
        isinstance(v, (int, float)) and not isinstance(v, bool))
    if not ok_type:
        errors.append((path, f"expected {'an integer' if integer else 'a number'}, got {v!r}"))
        return
    if not integer:
        v = float(v)
        node[parts[-1]] = v
        if not math.isfinite(v):
            errors.append((path, "must be finite"))
            return
    if cond is not None and not cond(v):
        errors.append((path, f"must satisfy {desc}, got {v!r}"))


def _bool(tree, path, errors):
    parts = path.split(".")
    node = tree
    for p in parts[:-1]:
        node = node[p]
    if not isinstance(node[parts[-1]], bool):
        errors.append((path, f"expected true or false, got {node[parts[-1]]!r}"))


def _validate_potential(tree, path, errors):
    node = tree
    for p in path.split("."):
        node = node[p]
    if not isinstance(node, dict):
        errors.append((path, "expected an object"))
        return None
    kind = node.get("kind")
    if kind not in _POTENTIAL_FIELDS:
        errors.append((f"{path}.kind", f"must be one of {sorted(_POTENTIAL_FIELDS)}, got {kind!r}"))
        return None
    full = _merge({"kind": kind, **_POTENTIAL_FIELDS[kind]}, node, path, errors)
    parent = tree
    *head, last = path.split(".")
    for p in head:
        parent = parent[p]
    parent[last] = full
    for key in _POTENTIAL_FIELDS[kind]:
        _num(tree, f"{path}.{key}", errors, cond=lambda v: v > 0, desc="> 0")
    return kind


def _validate(tree: dict, errors: list) -> None:
    _num(tree, "grid.nx", errors, integer=True, cond=lambda v: v >= 4, desc=">= 4")
    _num(tree, "grid.ny", errors, integer=True, cond=lambda v: v >= 4, desc=">= 4")
    _num(tree, "grid.lx", errors, cond=lambda v: v > 0, desc="> 0")
    _num(tree, "grid.ly", errors, cond=lambda v: v > 0, desc="> 0")
    _num(tree, "time.dt", errors, cond=lambda v: v > 0, desc="> 0")
    _num(tree, "time.t_end", errors, cond=lambda v: v >= 0, desc=">= 0")
    _num(tree, "time.records_per_unit_time", errors, cond=lambda v: v > 0, desc="> 0")
    _num(tree, "time.snapshots", errors, integer=True, cond=lambda v: v >= 0, desc=">= 0")
    t = tree["time"]
    if isinstance(t["dt"], float) and isinstance(t["t_end"], float) and t["dt"] > 0:
        n = round(t["t_end"] / t["dt"])
        if abs(n * t["dt"] - t["t_end"]) > 1e-9 * max(1.0, t["t_end"]):
            errors.append(("time.t_end", f"must be a multiple of time.dt={t['dt']!r}"))
    _num(tree, "model.K", errors, cond=lambda v: v >= 0, desc="K >= 0")
    _num(tree, "model.sigma", errors, cond=lambda v: v >= 0, desc="sigma >= 0")
    _num(tree, "model.yosida_eps", errors, cond=lambda v: 0 < v < 1, desc="0 < eps < 1", allow_none=True)
    _num(tree, "model.yosida_rho", errors, cond=lambda v: v >= 1, desc="rho >= 1")
    kind_b = _validate_potential(tree, "model.potential", errors)
    kind_s = kind_b
    if tree["model"]["potential_surf"] is not None:
        kind_s = _validate_potential(tree, "model.potential_surf", errors)
    for kind, path in ((kind_b, "model.potential"), (kind_s, "model.potential_surf")):
        if kind == "double_obstacle":
            errors.append((f"{path}.kind", "double_obstacle has no pointwise derivative and "
                                           "cannot be simulated directly"))
    _validate_init(tree, errors)
    _num(tree, "solver.newton_tol", errors, cond=lambda v: v > 0, desc="> 0")
    _num(tree, "solver.newton_max_iter", errors, integer=True, cond=lambda v: v >= 1, desc=">= 1")
    _num(tree, "solver.linesearch_shrink", errors, cond=lambda v: 0 < v < 1, desc="0 < value < 1")
    _num(tree, "solver.separation_guard", errors, cond=lambda v: 0 < v < 1, desc="0 < value < 1")
    lin = tree["solver"]["linear"]
    if lin["kind"] not in {k.value for k in LinearSolver}:
        errors.append(("solver.linear.kind", f"must be 'direct' or 'bicgstab', got {lin['kind']!r}"))
    _num(tree, "solver.linear.tol", errors, cond=lambda v: v > 0, desc="> 0")
    _num(tree, "solver.linear.max_iter", errors, integer=True, cond=lambda v: v >= 1, desc=">= 1")
    if not isinstance(tree["output"]["directory"], str) or not tree["output"]["directory"]:
        errors.append(("output.directory", "must be a non-empty string"))
    _bool(tree, "output.emit_plots", errors)
    if tree["sweep"] is not None:
        _validate_sweep(tree, errors, kind_b)


def _validate_init(tree, errors):
    init = tree["init"]
    if not isinstance(init, dict):
        errors.append(("init", "expected an object"))
        return
    kind = init.get("kind")
    if kind not in _INIT_FIELDS:
        errors.append(("init.kind", f"must be one of {sorted(_INIT_FIELDS)}, got {kind!r}"))
        return
    tree["init"] = _merge({"kind": kind, **_INIT_FIELDS[kind]}, init, "init", errors)
    if kind == "constant":
        _num(tree, "init.m", errors, cond=lambda v: abs(v) < 1, desc="|m| < 1")
        _num(tree, "init.m_surf", errors, cond=lambda v: abs(v) < 1, desc="|m_surf| < 1", allow_none=True)
    elif kind == "seeded_noise":
        _num(tree, "init.amplitude", errors, cond=lambda v: v >= 0, desc=">= 0")
        _num(tree, "init.mean_bulk", errors, cond=lambda v: abs(v) < 1, desc="|mean| < 1")
        _num(tree, "init.mean_surf", errors, cond=lambda v: abs(v) < 1, desc="|mean| < 1")
        _num(tree, "init.seed", errors, integer=True, cond=lambda v: v >= 0, desc=">= 0")
        _bool(tree, "init.match_trace", errors)
        i = tree["init"]
        if i["generator"] != RNG_ALGORITHM:
            errors.append(("init.generator", f"only {RNG_ALGORITHM!r} is supported"))
        for key in ("mean_bulk", "mean_surf"):
            a, m = i["amplitude"], i[key]
            if isinstance(a, float) and isinstance(m, float) and abs(m) + a >= 1:
                errors.append((f"init.{key}", "|mean| + amplitude must be < 1"))
    else:
        _num(tree, "init.position", errors)
        _num(tree, "init.width", errors, cond=lambda v: v > 0, desc="> 0")
        _num(tree, "init.amplitude", errors, cond=lambda v: 0 < v < 1, desc="0 < amplitude < 1")
        _num(tree, "init.interface", errors, cond=lambda v: v > 0, desc="> 0")


def _validate_sweep(tree, errors, kind_b):
    tree["sweep"] = sw = _merge(_SWEEP_DEFAULTS, tree["sweep"], "sweep", errors)
    param = sw["param"]
    if param not in {p.value for p in SweepParam}:
        errors.append(("sweep.param", f"must be one of {[p.value for p in SweepParam]}, got {param!r}"))
        return
    vals = sw["values"]
    if not isinstance(vals, list) or not vals:
        errors.append(("sweep.values", "must be a non-empty list"))
        return
    good = []
    for k, v in enumerate(vals):
        path = f"sweep.values[{k}]"
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            errors.append((path, f"expected a finite number, got {v!r}"))
            continue
        v = float(v)
        vals[k] = v
        if param == "theta" and not 0 < v <= 1:
            errors.append((path, f"theta sweeps need theta in (0, 1], got {v!r}"))
        elif param == "K" and v < 0:
            errors.append((path, f"K >= 0 required, got {v!r}"))
        elif param == "yosida_eps" and not 0 < v < 1:
            errors.append((path, f"0 < eps < 1 required, got {v!r}"))
        good.append((k, v))
    for (_, a), (k, b) in zip(good, good[1:]):
        if b >= a:
            errors.append((f"sweep.values[{k}]", "values must be strictly decreasing"))
    if param == "theta" and kind_b not in (None, "logarithmic"):
        errors.append(("model.potential.kind", "theta sweeps need a logarithmic potential"))


def _position(text: str, pos: int) -> tuple[int, int]:
    line = text.count("\n", 0, pos) + 1
    col = pos - (text.rfind("\n", 0, pos) + 1) + 1
    return line, col


def parse_config(text: str) -> RunConfig:
    """Parse and validate a JSON configuration.

    Raises
    ------
    ParseError
        Malformed JSON, with line and column.
    ValidationError
        Every semantic problem found, each with its key path.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno) from None
    errors: list[tuple[str, str]] = []
    tree = _merge(DEFAULTS, raw, "", errors)
    for section, default in DEFAULTS.items():
        # init is merged against the defaults of its own kind during validation
        if isinstance(default, dict) and section != "init":
            tree[section] = _merge(default, tree[section], section, errors)
    tree["solver"]["linear"] = _merge(DEFAULTS["solver"]["linear"], tree["solver"]["linear"],
                                      "solver.linear", errors)
    _validate(tree, errors)
    if not errors:
        # constructor-level checks of the owning modules
        cfg = RunConfig(tree)
        for path, build in (("grid", cfg.grid), ("model", cfg.params), ("solver", cfg.stepper),
                            ("init", cfg.initial_data)):
            try:
                build()
            except (ValueError, BschError) as exc:
                errors.append((path, str(exc)))
    if errors:
        raise ValidationError(errors)
    return RunConfig(tree)


def emit_config(cfg: RunConfig) -> str:
    return json.dumps(cfg.data, indent=2) + "\n"


def defaults_text() -> str:
    return json.dumps(DEFAULTS, indent=2) + "\n"

