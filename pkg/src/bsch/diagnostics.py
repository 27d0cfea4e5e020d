"""Runtime readouts of conservation, dissipation, separation and equilibrium.

A :class:`TimeSeriesRecord` is a pure function of a state, its chemical
potentials and (optionally) the report of the step that produced it.  The
state-derived columns (masses, energy terms, separation) depend only on the
``(phi, psi)`` snapshot, so they can be recomputed bit-for-bit from saved
fields.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import grid as G
from .errors import InsufficientData
from .model import ChemState, ModelParams, PhaseState, chemical_potentials, energy
from .stepper import StepReport

__all__ = [
    "TimeSeriesRecord",
    "SteadyStateReport",
    "RateFit",
    "CSV_COLUMNS",
    "STATE_COLUMNS",
    "record",
    "state_columns",
    "ring_std",
    "Recorder",
    "detect_steady",
    "h1_distance",
    "l2_distance",
    "fit_rate",
    "fit_rate_from_distances",
    "dissipation_residual",
    "format_series_csv",
    "write_series_csv",
    "read_series_csv",
]

CSV_COLUMNS = (
    "t", "mass_bulk", "mass_surf", "energy", "e_bulk_dir", "e_bulk_pot", "e_surf_dir",
    "e_surf_pot", "e_penalty", "grad_mu_sq", "grad_theta_sq", "sep_bulk", "sep_surf",
    "mu_mean", "mu_std", "theta_mean", "theta_std", "newton_iters",
)
# columns that only depend on the (phi, psi) snapshot
STATE_COLUMNS = (
    "mass_bulk", "mass_surf", "energy", "e_bulk_dir", "e_bulk_pot", "e_surf_dir",
    "e_surf_pot", "e_penalty", "sep_bulk", "sep_surf",
)


@dataclass(frozen=True)
class TimeSeriesRecord:
    t: float
    mass_bulk: float
    mass_surf: float
    energy: float
    e_bulk_dir: float
    e_bulk_pot: float
    e_surf_dir: float
    e_surf_pot: float
    e_penalty: float
    grad_mu_sq: float
    grad_theta_sq: float
    sep_bulk: float
    sep_surf: float
    mu_mean: float
    mu_std: float
    theta_mean: float
    theta_std: float
    newton_iters: int = 0
    rate: float = math.nan  # max-norm of (s_new - s_old)/dt for the producing step
    dt: float = math.nan

    def row(self) -> list:
        return [getattr(self, c) for c in CSV_COLUMNS]


def state_columns(g: G.Grid, p: ModelParams, s: PhaseState) -> dict:
    """Masses, energy terms and separation margins of a snapshot."""
    e = energy(g, p, s)
    return {
        "mass_bulk": G.mean_bulk(g, s.phi),
        "mass_surf": G.mean_surface(g, s.psi),
        "energy": e.total,
        "e_bulk_dir": e.bulk_dirichlet,
        "e_bulk_pot": e.bulk_potential,
        "e_surf_dir": e.surf_dirichlet,
        "e_surf_pot": e.surf_potential,
        "e_penalty": e.penalty,
        "sep_bulk": 1.0 - float(np.max(np.abs(s.phi))),
        "sep_surf": 1.0 - float(np.max(np.abs(s.psi))),
    }


def _weighted_std(u, w, mean):
    return math.sqrt(max(float(np.sum(w * (u - mean) ** 2) / np.sum(w)), 0.0))


def ring_std(v) -> float:
    """Largest per-ring standard deviation of a surface field.

    The two rings are disconnected, so a stationary surface potential is
    constant on each ring but the two constants may differ.
    """
    v = np.asarray(v, dtype=float)
    return max(float(np.std(row)) for row in v)


def record(g: G.Grid, p: ModelParams, s: PhaseState, c: ChemState,
           rpt: StepReport | None = None) -> TimeSeriesRecord:
    """Quadrature readout of one state; no mutation."""
    mu_mean = G.mean_bulk(g, c.mu)
    th_mean = G.mean_surface(g, c.theta)
    return TimeSeriesRecord(
        t=float(s.t),
        **state_columns(g, p, s),
        grad_mu_sq=2.0 * G.dirichlet_energy_bulk(g, c.mu),
        grad_theta_sq=2.0 * G.dirichlet_energy_surface(g, c.theta),
        mu_mean=mu_mean,
        mu_std=_weighted_std(c.mu, g.bulk_weights, mu_mean),
        theta_mean=th_mean,
        theta_std=ring_std(c.theta),
        newton_iters=0 if rpt is None else int(rpt.newton_iters),
        rate=math.nan if rpt is None else float(rpt.max_rate),
        dt=math.nan if rpt is None else float(rpt.dt_used),
    )


class Recorder:
    """Callback for :func:`bsch.stepper.run` collecting records.

    With ``keep_states=True`` the recorded states are kept as well (needed by
    :func:`fit_rate` and by snapshot writers).
    """

    def __init__(self, g: G.Grid, p: ModelParams, keep_states: bool = False):
        self.g, self.p = g, p
        self.keep_states = keep_states
        self.records: list[TimeSeriesRecord] = []
        self.states: list[PhaseState] = []
        self.chems: list[ChemState] = []

    def __call__(self, s: PhaseState, c: ChemState, rpt: StepReport | None) -> None:
        self.records.append(record(self.g, self.p, s, c, rpt))
        if self.keep_states:
            self.states.append(s.copy())
            self.chems.append(c)


# ---------------------------------------------------------------------------
# steady state


@dataclass(frozen=True)
class SteadyStateReport:
    """Steady-state verdict with measured and predicted limit potentials.

    ``theta_inf_*`` hold one value per ring (bottom, top).
    """

    converged: bool
    t_detect: float | None
    mu_inf_measured: float
    theta_inf_measured: tuple[float, float]
    mu_inf_formula: float
    theta_inf_formula: tuple[float, float]
    mu_std: float
    theta_std: float
    final_rate: float
    fitted_rate_exponent: float | None = None

    @property
    def mu_mismatch(self) -> float:
        return abs(self.mu_inf_measured - self.mu_inf_formula)

    @property
    def theta_mismatch(self) -> float:
        return max(abs(a - b) for a, b in zip(self.theta_inf_measured, self.theta_inf_formula))


def _exchange(g, p, s, c):
    if c is not None and c.dn_phi is not None:
        return np.asarray(c.dn_phi, dtype=float)
    return chemical_potentials(g, dataclasses.replace(p, sigma=0.0), s).dn_phi


def detect_steady(g: G.Grid, p: ModelParams, history: Sequence[TimeSeriesRecord], s: PhaseState,
                  c: ChemState | None = None, tol_rate: float = 1e-8) -> SteadyStateReport:
    """Steady-state test plus the constant chemical potentials of the limit.

    The run counts as converged when the last recorded step moved the state
    by at most ``tol_rate * dt`` in max-norm.  The limit constants are

    * ``mu_inf = (sum w (beta + pi)(phi) - sum_G hx dn_phi) / |Omega|``
    * ``theta_inf = sum_ring hx ((beta_G + pi_G)(psi) + dn_phi) / lx`` for
      each ring separately (each ring conserves its own mass)

    with ``dn_phi`` the discrete exchange flux.  Measured values are the
    spatial means of ``c`` (recomputed from ``s`` when ``c`` is omitted).
    """
    if len(history) < 2:
        raise InsufficientData("detect_steady needs at least two records")
    last = history[-1]
    rate = last.rate if np.isfinite(last.rate) else math.inf
    converged = bool(rate <= tol_rate)
    if c is None:
        c = chemical_potentials(g, dataclasses.replace(p, sigma=0.0), s)
    lam = _exchange(g, p, s, c)
    bulk_part = float(np.sum(g.bulk_weights * p.bulk.derivative(s.phi)))
    flux = g.hx * float(np.sum(lam))
    mu_f = (bulk_part - flux) / g.area
    ring_g = np.sum(p.surf.derivative(s.psi) + lam, axis=1) * g.hx / g.lx
    th_f = (float(ring_g[0]), float(ring_g[1]))
    mu_m = G.mean_bulk(g, c.mu)
    th_m = tuple(float(v) for v in np.mean(np.asarray(c.theta), axis=1))
    return SteadyStateReport(
        converged=converged,
        t_detect=float(last.t) if converged else None,
        mu_inf_measured=mu_m,
        theta_inf_measured=th_m,
        mu_inf_formula=mu_f,
        theta_inf_formula=th_f,
        mu_std=_weighted_std(c.mu, g.bulk_weights, mu_m),
        theta_std=ring_std(c.theta),
        final_rate=float(rate),
    )


# ---------------------------------------------------------------------------
# distances and decay fits


def h1_distance(g: G.Grid, a: PhaseState, b: PhaseState) -> float:
    """Product H^1 distance: gradient forms plus L^2 mass terms on both parts."""
    dphi = a.phi - b.phi
    dpsi = a.psi - b.psi
    sq = (2.0 * G.dirichlet_energy_bulk(g, dphi) + G.inner_bulk(g, dphi, dphi)
          + 2.0 * G.dirichlet_energy_surface(g, dpsi) + G.inner_surface(g, dpsi, dpsi))
    return math.sqrt(max(sq, 0.0))


def l2_distance(g: G.Grid, a: PhaseState, b: PhaseState) -> tuple[float, float]:
    """Quadrature L^2 distances ``(bulk, surface)``."""
    dphi = a.phi - b.phi
    dpsi = a.psi - b.psi
    return math.sqrt(G.inner_bulk(g, dphi, dphi)), math.sqrt(G.inner_surface(g, dpsi, dpsi))


@dataclass(frozen=True)
class RateFit:
    """Outcome of a decay fit.

    ``exponent`` is the algebraic exponent ``a`` in ``d ~ C (1+t)^-a``, or
    ``math.inf`` when an exponential law ``d ~ C exp(-rate t)`` fits better;
    ``exp_rate`` is always the fitted exponential rate.
    """

    exponent: float
    exp_rate: float
    power_exponent: float
    power_rms: float
    exp_rms: float

    @property
    def exponential(self) -> bool:
        return math.isinf(self.exponent)


def _lsq(x, y):
    a = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    rms = float(np.sqrt(np.mean((a @ coef - y) ** 2)))
    return float(coef[0]), rms


def fit_rate_from_distances(t, d, min_points: int = 10) -> RateFit:
    """Fit ``log d`` against ``log(1+t)`` and against ``t``; keep the better law.

    Raises
    ------
    InsufficientData
        Fewer than ``min_points`` strictly positive distances.
    """
    t = np.asarray(t, dtype=float)
    d = np.asarray(d, dtype=float)
    keep = d > 0
    if np.count_nonzero(keep) < min_points:
        raise InsufficientData(f"need {min_points} positive distances, got {np.count_nonzero(keep)}")
    t, y = t[keep], np.log(d[keep])
    slope_p, rms_p = _lsq(np.log1p(t), y)
    slope_e, rms_e = _lsq(t, y)
    exponent = math.inf if rms_e < rms_p else -slope_p
    return RateFit(exponent=exponent, exp_rate=-slope_e, power_exponent=-slope_p,
                   power_rms=rms_p, exp_rms=rms_e)


def fit_rate(g: G.Grid, states: Sequence[PhaseState], s_inf: PhaseState, min_points: int = 10) -> RateFit:
    """Decay law of the H^1 distance from saved snapshots to ``s_inf``."""
    t = [s.t for s in states]
    d = [h1_distance(g, s, s_inf) for s in states]
    return fit_rate_from_distances(t, d, min_points)


def dissipation_residual(history: Sequence[TimeSeriesRecord]) -> np.ndarray:
    """Per-interval defect of the discrete energy identity.

    ``E(t_{n+1}) - E(t_n) + dt_n * (grad_mu_sq + grad_theta_sq)_{n+1}`` for
    consecutive records; the step ``dt_n`` is the time difference.
    """
    if len(history) < 2:
        return np.zeros(0)
    t = np.array([r.t for r in history])
    e = np.array([r.energy for r in history])
    q = np.array([r.grad_mu_sq + r.grad_theta_sq for r in history])
    return e[1:] - e[:-1] + np.diff(t) * q[1:]


# ---------------------------------------------------------------------------
# CSV


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def format_series_csv(records: Sequence[TimeSeriesRecord]) -> str:
    buf = io.StringIO()
    buf.write(",".join(CSV_COLUMNS) + "\n")
    for r in records:
        buf.write(",".join(_fmt(v) for v in r.row()) + "\n")
    return buf.getvalue()


def write_series_csv(path, records: Sequence[TimeSeriesRecord]) -> None:
    Path(path).write_text(format_series_csv(records), newline="\n")


def read_series_csv(path) -> list[dict]:
    """Rows as dicts of floats (``newton_iters`` as int).

    Raises ``ValueError`` naming the offending row index on malformed input.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != CSV_COLUMNS:
            raise ValueError(f"{path}: row 0: unexpected header {header}")
        rows = []
        for k, raw in enumerate(reader, start=1):
            if len(raw) != len(CSV_COLUMNS):
                raise ValueError(f"{path}: row {k}: expected {len(CSV_COLUMNS)} fields, got {len(raw)}")
            try:
                row = {c: float(v) for c, v in zip(CSV_COLUMNS, raw)}
                row["newton_iters"] = int(raw[-1])
            except ValueError as exc:
                raise ValueError(f"{path}: row {k}: {exc}") from None
            rows.append(row)
    return rows
