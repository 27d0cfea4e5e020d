"""Scenarios, run execution with on-disk artifacts, and parameter sweeps.

A :class:`Scenario` bundles everything needed for one trajectory.
:func:`execute` runs it, optionally writing a run directory::

    <run>/run.json            grid, model and time settings (replay input)
    <run>/series.csv          diagnostics time series
    <run>/snapshots/index.csv snapshot index, step and time
    <run>/snapshots/phi_NNNNN.txt, psi_NNNNN.txt

Sweeps run one scenario per parameter value on identical initial data and
compare the solutions at shared snapshot times.
"""
from __future__ import annotations

import concurrent.futures as cf
import dataclasses
import enum
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import diagnostics as D
from . import grid as G
from .errors import BschError, DomainError, KindMismatch
from .model import ChemState, ModelParams, PhaseState, chemical_potentials
from .potentials import Kind, Potential, f0, subgradient_indicator
from .stepper import LinearSolver, StepperConfig, run

__all__ = [
    "RNG_ALGORITHM",
    "Constant",
    "SeededNoise",
    "TwoPhaseBand",
    "Scenario",
    "RunResult",
    "execute",
    "SweepParam",
    "SweepSpec",
    "SweepReport",
    "PairDistance",
    "RunFailed",
    "run_sweep",
    "ObstacleReport",
    "obstacle_limit_checks",
    "spinodal_scenario",
    "SteadyRun",
    "run_until_steady",
    "ReplayReport",
    "replay_check",
    "scenario_to_dict",
    "scenario_from_dict",
    "potential_to_dict",
    "potential_from_dict",
]

# numpy's counter-based Philox-4x64 with 10 rounds, keyed by the seed
RNG_ALGORITHM = "philox4x64-10"


def _philox(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed)))


# ---------------------------------------------------------------------------
# initial data


@dataclass(frozen=True)
class Constant:
    m: float
    m_surf: float | None = None

    def generate(self, g: G.Grid) -> PhaseState:
        ms = self.m if self.m_surf is None else self.m_surf
        return PhaseState(np.full(g.bulk_shape, float(self.m)), np.full(g.surf_shape, float(ms)))

    def to_dict(self) -> dict:
        return {"kind": "constant", "m": self.m, "m_surf": self.m_surf}


@dataclass(frozen=True)
class SeededNoise:
    """Uniform noise of a given amplitude around exact bulk and surface means.

    Both boundary rings get the surface mean exactly.

    With ``match_trace`` the boundary rows of ``phi`` equal ``psi``, so the
    same data are admissible for every ``K`` including ``K = 0``.
    """

    mean_bulk: float = 0.0
    mean_surf: float = 0.0
    amplitude: float = 0.05
    seed: int = 0
    match_trace: bool = True
    generator: str = RNG_ALGORITHM

    def __post_init__(self):
        if self.generator != RNG_ALGORITHM:
            raise ValueError(f"unsupported noise generator {self.generator!r}; only {RNG_ALGORITHM!r}")
        if not self.amplitude >= 0:
            raise ValueError("amplitude must be >= 0")
        for name in ("mean_bulk", "mean_surf"):
            if abs(getattr(self, name)) + self.amplitude >= 1.0:
                raise DomainError(f"|{name}| + amplitude must stay below 1")

    def generate(self, g: G.Grid) -> PhaseState:
        rng = _philox(self.seed)
        bulk = rng.uniform(-1.0, 1.0, g.bulk_shape)
        surf = rng.uniform(-1.0, 1.0, g.surf_shape)
        # each ring conserves its own mass, so each gets the exact mean
        surf = surf - np.mean(surf, axis=1, keepdims=True)
        psi = _scaled_noise(surf, self.amplitude) + self.mean_surf
        if not self.match_trace:
            phi = _scaled_noise(G.project_zero_mean_bulk(g, bulk), self.amplitude) + self.mean_bulk
            return PhaseState(phi, psi)
        w = g.bulk_weights[1:-1]
        inner = bulk[1:-1] - np.sum(w * bulk[1:-1]) / np.sum(w)
        phi = np.empty(g.bulk_shape)
        phi[1:-1] = _scaled_noise(inner, self.amplitude) + self.mean_bulk
        phi[0], phi[-1] = psi[0], psi[1]
        # shift the interior so the bulk mean is exact
        phi[1:-1] += (self.mean_bulk * g.area - G.integrate_bulk(g, phi)) / np.sum(w)
        return PhaseState(phi, psi)

    def to_dict(self) -> dict:
        return {"kind": "seeded_noise", "mean_bulk": self.mean_bulk, "mean_surf": self.mean_surf,
                "amplitude": self.amplitude, "seed": self.seed, "match_trace": self.match_trace,
                "generator": self.generator}


def _scaled_noise(u, amplitude):
    peak = float(np.max(np.abs(u)))
    return u * (amplitude / peak) if peak > 0 else u


@dataclass(frozen=True)
class TwoPhaseBand:
    """Smooth band ``phi = a tanh((width/2 - |y - position|) / interface)``; ``psi`` is its trace."""

    position: float
    width: float
    amplitude: float = 0.9
    interface: float = 1.0

    def __post_init__(self):
        if not 0 < self.amplitude < 1:
            raise DomainError("band amplitude must lie in (0, 1)")
        if not (self.width > 0 and self.interface > 0):
            raise ValueError("band width and interface must be positive")

    def generate(self, g: G.Grid) -> PhaseState:
        _, y = g.coords()
        phi = self.amplitude * np.tanh((0.5 * self.width - np.abs(y - self.position)) / self.interface)
        return PhaseState(phi, G.trace(g, phi))

    def to_dict(self) -> dict:
        return {"kind": "two_phase_band", "position": self.position, "width": self.width,
                "amplitude": self.amplitude, "interface": self.interface}


InitialData = Constant | SeededNoise | TwoPhaseBand

_INIT_KINDS = {"constant": Constant, "seeded_noise": SeededNoise, "two_phase_band": TwoPhaseBand}


def initial_data_from_dict(d: dict):
    d = dict(d)
    kind = d.pop("kind")
    return _INIT_KINDS[kind](**d)


# ---------------------------------------------------------------------------
# scenarios and single runs


@dataclass(frozen=True)
class Scenario:
    grid: G.Grid
    params: ModelParams
    stepper: StepperConfig
    init: Constant | SeededNoise | TwoPhaseBand
    t_end: float
    record_every: int = 1
    n_snapshots: int = 20

    def __post_init__(self):
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        if self.n_snapshots < 0:
            raise ValueError("n_snapshots must be >= 0")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.stepper.dt))

    def snapshot_steps(self) -> list[int]:
        n = self.n_steps
        if self.n_snapshots == 0:
            return []
        return sorted({(k * n) // self.n_snapshots for k in range(self.n_snapshots + 1)})


def potential_to_dict(p: Potential) -> dict:
    d = {"kind": p.kind.value}
    if p.kind is Kind.LOGARITHMIC:
        d.update(theta=p.theta, theta_c=p.theta_c)
    elif p.kind is Kind.DOUBLE_OBSTACLE:
        d.update(theta_c=p.theta_c)
    return d


def potential_from_dict(d: dict) -> Potential:
    kind = Kind(d["kind"])
    if kind is Kind.LOGARITHMIC:
        return Potential.logarithmic(float(d["theta"]), float(d["theta_c"]))
    if kind is Kind.QUARTIC:
        return Potential.quartic()
    return Potential.double_obstacle(float(d["theta_c"]))


def scenario_to_dict(sc: Scenario) -> dict:
    g, p, c = sc.grid, sc.params, sc.stepper
    return {
        "grid": {"nx": g.nx, "ny": g.ny, "lx": g.lx, "ly": g.ly},
        "model": {"K": p.K, "sigma": p.sigma, "yosida_eps": p.yosida_eps, "yosida_rho": p.yosida_rho,
                  "potential_bulk": potential_to_dict(p.potential_bulk),
                  "potential_surf": potential_to_dict(p.potential_surf)},
        "stepper": {"dt": c.dt, "newton_tol": c.newton_tol, "newton_max_iter": c.newton_max_iter,
                    "linesearch_shrink": c.linesearch_shrink, "separation_guard": c.separation_guard,
                    "linear_solver": c.linear_solver.value, "linear_tol": c.linear_tol,
                    "linear_max_iter": c.linear_max_iter},
        "init": sc.init.to_dict(),
        "t_end": sc.t_end,
        "record_every": sc.record_every,
        "n_snapshots": sc.n_snapshots,
    }


def scenario_from_dict(d: dict) -> Scenario:
    m = d["model"]
    params = ModelParams(K=float(m["K"]), sigma=float(m["sigma"]), yosida_eps=m["yosida_eps"],
                         yosida_rho=float(m["yosida_rho"]),
                         potential_bulk=potential_from_dict(m["potential_bulk"]),
                         potential_surf=potential_from_dict(m["potential_surf"]))
    st = dict(d["stepper"])
    st["linear_solver"] = LinearSolver(st["linear_solver"])
    return Scenario(grid=G.Grid(**d["grid"]), params=params, stepper=StepperConfig(**st),
                    init=initial_data_from_dict(d["init"]), t_end=float(d["t_end"]),
                    record_every=int(d["record_every"]), n_snapshots=int(d["n_snapshots"]))


@dataclass
class RunResult:
    """Outcome of :func:`execute`.

    ``snapshots`` holds the states at ``Scenario.snapshot_steps()``;
    ``min_separation`` and ``mass_drift`` are tracked at every step.
    """

    scenario: Scenario
    records: list
    snapshots: list
    state: PhaseState
    chem: ChemState | None
    reports: list
    min_separation: float
    mass_drift: float
    halvings: int
    out_dir: Path | None = None

    @property
    def final_energy(self) -> float:
        return self.records[-1].energy


def _snapshot_name(kind, k):
    return f"{kind}_{k:05d}.txt"


def execute(sc: Scenario, out_dir=None, keep_reports: bool = True) -> RunResult:
    """Run a scenario, tracking diagnostics; write artifacts when ``out_dir`` is given."""
    g, p = sc.grid, sc.params
    s0 = sc.init.generate(g)
    dt = sc.stepper.dt
    n_steps = sc.n_steps
    snap_steps = set(sc.snapshot_steps())
    m0, ms0 = G.mean_bulk(g, s0.phi), G.mean_surface(g, s0.psi)
    records: list[D.TimeSeriesRecord] = []
    snapshots: list[PhaseState] = []
    tracker = {"sep": math.inf, "drift": 0.0}

    def on_step(s, c, rpt):
        n = int(round(s.t / dt))
        tracker["sep"] = min(tracker["sep"], 1.0 - float(np.max(np.abs(s.phi))),
                             1.0 - float(np.max(np.abs(s.psi))))
        tracker["drift"] = max(tracker["drift"], abs(G.mean_bulk(g, s.phi) - m0),
                               abs(G.mean_surface(g, s.psi) - ms0))
        if n % sc.record_every == 0 or n in snap_steps or n == n_steps:
            records.append(D.record(g, p, s, c, rpt))
        if n in snap_steps:
            snapshots.append(s.copy())

    traj = run(g, p, sc.stepper, s0, sc.t_end, callbacks=[on_step], record_every=1,
               keep_reports=keep_reports)
    result = RunResult(scenario=sc, records=records, snapshots=snapshots, state=traj.state,
                       chem=traj.chem, reports=traj.reports, min_separation=tracker["sep"],
                       mass_drift=tracker["drift"], halvings=traj.halvings)
    if out_dir is not None:
        result.out_dir = write_run_dir(out_dir, result)
    return result


def write_run_dir(out_dir, result: RunResult) -> Path:
    sc = result.scenario
    out = Path(out_dir)
    snap_dir = out / "snapshots"
    snap_dir.mkdir(parents=True, exist_ok=True)
    (out / "run.json").write_text(json.dumps(scenario_to_dict(sc), indent=2) + "\n")
    D.write_series_csv(out / "series.csv", result.records)
    lines = ["index,step,t"]
    for k, (n, s) in enumerate(zip(sc.snapshot_steps(), result.snapshots)):
        G.write_field(snap_dir / _snapshot_name("phi", k), sc.grid, s.phi)
        G.write_field(snap_dir / _snapshot_name("psi", k), sc.grid, s.psi)
        lines.append(f"{k},{n},{s.t!r}")
    (snap_dir / "index.csv").write_text("\n".join(lines) + "\n")
    return out


# ---------------------------------------------------------------------------
# replay


@dataclass
class ReplayReport:
    run_dir: Path
    checked: int = 0
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.checked > 0 and not self.failures


def replay_check(run_dir) -> ReplayReport:
    """Recompute the state-derived series columns from the saved snapshots.

    Every snapshot must match the series row with the same time bit for bit
    in :data:`bsch.diagnostics.STATE_COLUMNS`.
    """
    run_dir = Path(run_dir)
    rep = ReplayReport(run_dir)
    try:
        sc = scenario_from_dict(json.loads((run_dir / "run.json").read_text()))
        rows = D.read_series_csv(run_dir / "series.csv")
        index = (run_dir / "snapshots" / "index.csv").read_text().splitlines()
    except (OSError, ValueError, KeyError, TypeError, BschError) as exc:
        rep.failures.append(f"{run_dir}: cannot load run artifacts: {exc}")
        return rep
    by_t = {row["t"]: (k, row) for k, row in enumerate(rows, start=1)}
    g, p = sc.grid, sc.params
    for line_no, line in enumerate(index[1:], start=2):
        try:
            k, n, t = line.split(",")
            t = float(t)
            _, phi = G.read_field(run_dir / "snapshots" / _snapshot_name("phi", int(k)))
            _, psi = G.read_field(run_dir / "snapshots" / _snapshot_name("psi", int(k)))
            g.check_bulk(phi)
            g.check_surf(psi)
            cols = D.state_columns(g, p, PhaseState(phi, psi, t))
        except (OSError, ValueError, BschError) as exc:
            rep.failures.append(f"snapshots/index.csv line {line_no}: {exc}")
            continue
        if t not in by_t:
            rep.failures.append(f"snapshots/index.csv line {line_no}: no series row at t={t!r}")
            continue
        row_idx, row = by_t[t]
        for col in D.STATE_COLUMNS:
            if not _same_bits(row[col], cols[col]):
                rep.failures.append(f"series.csv row {row_idx} (t={t!r}) column {col}: "
                                    f"stored {row[col]!r} != recomputed {cols[col]!r}")
        rep.checked += 1
    if rep.checked == 0 and not rep.failures:
        rep.failures.append(f"{run_dir}: no snapshots to check")
    return rep


def _same_bits(a: float, b: float) -> bool:
    return np.float64(a).tobytes() == np.float64(b).tobytes()


# ---------------------------------------------------------------------------
# sweeps


class SweepParam(str, enum.Enum):
    YOSIDA_EPS = "yosida_eps"
    K = "K"
    THETA = "theta"


class RunFailed(BschError, RuntimeError):
    """A sweep member failed; ``value`` names the parameter value."""

    def __init__(self, param, value, cause):
        super().__init__(f"{param}={value!r}: {cause}")
        self.param, self.value, self.cause = param, value, cause


@dataclass(frozen=True)
class SweepSpec:
    base: Scenario
    param: SweepParam
    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "param", SweepParam(self.param))
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        if not vals:
            raise ValueError("sweep needs at least one value")
        if any(b >= a for a, b in zip(vals, vals[1:])):
            raise ValueError("sweep values must be strictly decreasing toward the limit")
        if self.param is SweepParam.THETA:
            if self.base.params.potential_bulk.kind is not Kind.LOGARITHMIC:
                raise KindMismatch("theta sweeps need a logarithmic base potential")
            if not all(0 < v <= 1 for v in vals):
                raise ValueError("theta sweep values must lie in (0, 1]")
        elif self.param is SweepParam.K:
            if vals[-1] < 0:
                raise ValueError("K values must be >= 0")
        elif not all(0 < v < 1 for v in vals):
            raise ValueError("yosida_eps values must lie in (0, 1)")

    def scenario_for(self, value: float) -> Scenario:
        p = self.base.params
        if self.param is SweepParam.K:
            p = dataclasses.replace(p, K=value)
        elif self.param is SweepParam.YOSIDA_EPS:
            p = dataclasses.replace(p, yosida_eps=value)
        else:
            pot = Potential.logarithmic(value, p.potential_bulk.theta_c)
            pot_s = Potential.logarithmic(value, p.potential_surf.theta_c)
            p = dataclasses.replace(p, potential_bulk=pot, potential_surf=pot_s)
        return dataclasses.replace(self.base, params=p)

    def run_id(self, value: float) -> str:
        return f"{self.param.value}={value!r}"


@dataclass(frozen=True)
class PairDistance:
    """Max over snapshot times of the L^2 distances between two runs."""

    a: float
    b: float
    bulk: float
    surf: float
    combined: float


@dataclass
class SweepReport:
    spec: SweepSpec
    runs: list
    pairwise: list
    to_limit: list

    def pairwise_combined(self) -> list[float]:
        return [d.combined for d in self.pairwise]

    def to_limit_combined(self) -> list[float]:
        return [d.combined for d in self.to_limit]


def trajectory_distance(g: G.Grid, a: Sequence[PhaseState], b: Sequence[PhaseState], va=0.0, vb=0.0) -> PairDistance:
    if len(a) != len(b):
        raise ValueError("runs have different snapshot counts")
    db = ds = dc = 0.0
    for x, y in zip(a, b):
        bulk, surf = D.l2_distance(g, x, y)
        db, ds, dc = max(db, bulk), max(ds, surf), max(dc, math.hypot(bulk, surf))
    return PairDistance(va, vb, db, ds, dc)


def _threads(requested):
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get("BSCH_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"BSCH_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def run_sweep(spec: SweepSpec, out_dir=None, threads: int | None = None) -> SweepReport:
    """Run every parameter value on the shared data and compare consecutive runs.

    Members run concurrently (``threads`` or ``$BSCH_THREADS``); the
    reduction into distances and the summary CSV is sequential, so outputs do
    not depend on scheduling.

    Raises
    ------
    RunFailed
        First failing member in parameter order, annotated with its value.
    """
    root = None if out_dir is None else Path(out_dir) / "sweep"

    def one(v):
        sub = None if root is None else root / spec.run_id(v)
        return execute(spec.scenario_for(v), sub)

    with cf.ThreadPoolExecutor(max_workers=min(_threads(threads), len(spec.values))) as pool:
        futures = [pool.submit(one, v) for v in spec.values]
        runs = []
        for v, fut in zip(spec.values, futures):
            try:
                runs.append(fut.result())
            except BschError as exc:
                for other in futures:
                    other.cancel()
                raise RunFailed(spec.param.value, v, exc) from exc
    g = spec.base.grid
    vals = spec.values
    pairwise = [trajectory_distance(g, runs[i].snapshots, runs[i + 1].snapshots, vals[i], vals[i + 1])
                for i in range(len(runs) - 1)]
    to_limit = [trajectory_distance(g, r.snapshots, runs[-1].snapshots, v, vals[-1])
                for v, r in zip(vals[:-1], runs[:-1])]
    report = SweepReport(spec, runs, pairwise, to_limit)
    if root is not None:
        write_sweep_summary(root / "summary.csv", report)
    return report


SUMMARY_COLUMNS = ("param_value", "run_id", "final_energy", "min_separation", "mass_drift",
                   "pairwise_dist_to_next")


def format_sweep_summary(report: SweepReport) -> str:
    lines = [",".join(SUMMARY_COLUMNS)]
    for k, (v, r) in enumerate(zip(report.spec.values, report.runs)):
        nxt = repr(report.pairwise[k].combined) if k < len(report.pairwise) else ""
        lines.append(",".join([repr(v), report.spec.run_id(v), repr(r.final_energy),
                               repr(r.min_separation), repr(r.mass_drift), nxt]))
    return "\n".join(lines) + "\n"


def write_sweep_summary(path, report: SweepReport) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_sweep_summary(report))


# ---------------------------------------------------------------------------
# obstacle limit


@dataclass(frozen=True)
class ObstacleReport:
    """Bounds and sign checks behind the vanishing-temperature limit.

    ``xi_l2`` is the space-time L^2 norm of ``xi = theta * f0(phi)`` over the
    snapshots (trapezoid rule in time).  ``sign_fraction`` is 1.0 when there
    are no near-contact nodes; ``n_contact`` tells whether the check was
    exercised.
    """

    theta: float
    xi_l2: float
    max_abs_phi: float
    n_contact: int
    n_sign_ok: int

    @property
    def sign_fraction(self) -> float:
        return 1.0 if self.n_contact == 0 else self.n_sign_ok / self.n_contact

    @property
    def bounded(self) -> bool:
        return self.max_abs_phi <= 1.0 + 1e-12


def obstacle_limit_checks(g: G.Grid, potential: Potential, states: Sequence[PhaseState],
                          contact_band: float = 1e-3) -> ObstacleReport:
    """Evaluate ``xi = theta * f0(phi)`` on saved states and check its sign near contact.

    Raises
    ------
    KindMismatch
        ``potential`` is not logarithmic.
    """
    if potential.kind is not Kind.LOGARITHMIC:
        raise KindMismatch("obstacle-limit checks need a logarithmic potential")
    if not states:
        raise ValueError("no states to check")
    th = potential.theta
    sq = []
    n_contact = n_ok = 0
    max_abs = 0.0
    for s in states:
        phi = np.asarray(s.phi, dtype=float)
        xi = th * f0(phi)
        sq.append(G.integrate_bulk(g, xi * xi))
        max_abs = max(max_abs, float(np.max(np.abs(phi))))
        near = 1.0 - np.abs(phi) <= contact_band
        for r, x in zip(phi[near], xi[near]):
            n_contact += 1
            n_ok += subgradient_indicator(math.copysign(1.0, r), x)
    t = np.array([s.t for s in states], dtype=float)
    if len(states) > 1:
        total = float(np.sum(0.5 * np.diff(t) * (np.array(sq[1:]) + np.array(sq[:-1]))))
    else:
        total = sq[0]
    return ObstacleReport(theta=th, xi_l2=math.sqrt(max(total, 0.0)), max_abs_phi=max_abs,
                          n_contact=n_contact, n_sign_ok=n_ok)


# ---------------------------------------------------------------------------
# long-time behaviour


@dataclass
class SteadyRun:
    """States of a run continued until the steady-state test fired."""

    steady: D.SteadyStateReport
    state: PhaseState
    chem: ChemState
    times: list
    states: list
    records: list
    steps: int


def run_until_steady(g: G.Grid, p: ModelParams, cfg: StepperConfig, s0: PhaseState, t_max: float,
                     tol_rate: float = 1e-8, keep_every: int = 1) -> SteadyRun:
    """Step with ``cfg.dt`` until the max-norm rate drops to ``tol_rate`` or ``t_max`` passes.

    Every ``keep_every``-th state is kept for decay studies.  The returned
    report has ``converged=False`` when ``t_max`` was reached first.
    """
    from .stepper import StepSystem, step

    sys_ = StepSystem(g, p, cfg.dt)
    c0 = chemical_potentials(g, dataclasses.replace(p, sigma=0.0), s0)
    records = [D.record(g, p, s0, c0)]
    states, times = [s0.copy()], [s0.t]
    s, c, n = s0, c0, 0
    while True:
        s, c, rpt = step(g, p, cfg, s, system=sys_)
        n += 1
        rec = D.record(g, p, s, c, rpt)
        records.append(rec)
        done = rpt.max_rate <= tol_rate or s.t >= t_max - 0.5 * cfg.dt
        if n % keep_every == 0 or done:
            states.append(s.copy())
            times.append(s.t)
        if done:
            break
    rep = D.detect_steady(g, p, records, s, c, tol_rate)
    return SteadyRun(rep, s, c, times, states, records, n)


# ---------------------------------------------------------------------------
# canonical scenario


def spinodal_scenario(seed: int = 0, K: float = 1.0, potential: Potential | None = None,
                      grid: G.Grid | None = None, dt: float = 1e-3, t_end: float = 2.0,
                      amplitude: float = 0.05, record_every: int = 1, n_snapshots: int = 20) -> Scenario:
    """Spinodal decomposition from small noise about the critical mixture.

    Defaults: 64 x 32 strip of size 32 x 16, logarithmic potential with
    ``theta = 1``, ``theta_c = 2``, ``dt = 1e-3`` for 2000 steps.
    """
    pot = Potential.logarithmic(1.0, 2.0) if potential is None else potential
    return Scenario(
        grid=G.Grid(64, 32, 32.0, 16.0) if grid is None else grid,
        params=ModelParams(K=K, potential_bulk=pot, potential_surf=pot),
        stepper=StepperConfig(dt=dt),
        init=SeededNoise(0.0, 0.0, amplitude, seed),
        t_end=t_end,
        record_every=record_every,
        n_snapshots=n_snapshots,
    )
