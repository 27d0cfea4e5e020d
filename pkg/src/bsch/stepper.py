"""Energy-stable implicit time stepping.

One step solves the convex-split system in the unknowns
``x = (phi, mu, psi, theta, lam)`` where ``lam`` is the exchange flux::

    (phi - phi_n)/dt - L mu                                      = 0
    mu - sigma (phi - phi_n)/dt + L phi + B lam - beta(phi) - pi(phi_n) = 0
    (psi - psi_n)/dt - L_G theta                                 = 0
    theta - sigma (psi - psi_n)/dt - lam + L_G psi
          - beta_G(psi) - pi_G(psi_n)                            = 0
    K lam - psi + T phi                                          = 0

``L`` is the no-flux Laplacian, ``B`` injects a boundary flux through the
ghost rows and ``T`` takes the trace.  The last row is the Robin condition for
``K > 0`` and the exact transmission ``phi|_G = psi`` for ``K = 0``.
"""
from __future__ import annotations

import dataclasses
import enum
import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import grid as G
from .errors import Aborted, LinearBreakdown, NewtonDivergence, SeparationBreach
from .model import ChemState, ModelParams, PhaseState, chemical_potentials, energy

__all__ = [
    "LinearSolver",
    "StepperConfig",
    "StepReport",
    "Trajectory",
    "StepSystem",
    "step",
    "run",
    "solve_linearized",
]

log = logging.getLogger(__name__)


class LinearSolver(str, enum.Enum):
    DIRECT = "direct"
    BICGSTAB = "bicgstab"


@dataclass(frozen=True)
class StepperConfig:
    dt: float
    newton_tol: float = 1e-11
    newton_max_iter: int = 50
    linesearch_shrink: float = 0.5
    separation_guard: float = 0.9
    linear_solver: LinearSolver = LinearSolver.DIRECT
    linear_tol: float = 1e-12
    linear_max_iter: int = 1000
    max_backtracks: int = 40

    def __post_init__(self):
        object.__setattr__(self, "linear_solver", LinearSolver(self.linear_solver))
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not 0 < self.linesearch_shrink < 1:
            raise ValueError("linesearch_shrink must lie in (0, 1)")
        if not 0 < self.separation_guard < 1:
            raise ValueError("separation_guard must lie in (0, 1)")
        if self.newton_max_iter < 1:
            raise ValueError("newton_max_iter must be >= 1")


@dataclass
class StepReport:
    newton_iters: int
    final_residual: float
    linesearch_backtracks: int
    energy_before: float
    energy_after: float
    dt_used: float
    max_rate: float = 0.0


class StepSystem:
    """Residual and Jacobian of one implicit step for fixed ``(grid, params, dt)``."""

    def __init__(self, g: G.Grid, p: ModelParams, dt: float):
        self.g, self.p, self.dt = g, p, dt
        nb, ns = g.n_bulk, g.n_surf
        self.nb, self.ns = nb, ns
        self.n = 2 * nb + 3 * ns
        self.sl_phi = slice(0, nb)
        self.sl_mu = slice(nb, 2 * nb)
        self.sl_psi = slice(2 * nb, 2 * nb + ns)
        self.sl_theta = slice(2 * nb + ns, 2 * nb + 2 * ns)
        self.sl_lam = slice(2 * nb + 2 * ns, self.n)
        L, LG = g.laplace_bulk_matrix, g.laplace_surface_matrix
        B, T = g.flux_matrix, g.trace_matrix
        Ib, Is = sp.identity(nb, format="csr"), sp.identity(ns, format="csr")
        c = 1.0 / dt
        sv = p.sigma / dt
        self.L, self.LG, self.B, self.T = L, LG, B, T
        self.J0 = sp.bmat(
            [
                [c * Ib, -L, None, None, None],
                [L - sv * Ib, Ib, None, None, B],
                [None, None, c * Is, -LG, None],
                [None, None, LG - sv * Is, Is, -Is],
                [T, None, -Is, None, p.K * Is if p.K > 0 else sp.csr_matrix((ns, ns))],
            ],
            format="csr",
        )
        self._lu = None  # cached factorisation reused across Newton iterations

    def factorize(self, x):
        """LU factorisation of the Jacobian at ``x``, cached on the system."""
        try:
            self._lu = spla.splu(self.jacobian(x))
        except RuntimeError as exc:
            self._lu = None
            raise LinearBreakdown(str(exc)) from exc
        return self._lu

    def pack(self, phi, mu, psi, theta, lam) -> np.ndarray:
        return np.concatenate([np.ravel(phi), np.ravel(mu), np.ravel(psi), np.ravel(theta), np.ravel(lam)])

    def unpack(self, x):
        g = self.g
        return (
            x[self.sl_phi].reshape(g.bulk_shape),
            x[self.sl_mu].reshape(g.bulk_shape),
            x[self.sl_psi].reshape(g.surf_shape),
            x[self.sl_theta].reshape(g.surf_shape),
            x[self.sl_lam].reshape(g.surf_shape),
        )

    def residual(self, x, old: PhaseState) -> np.ndarray:
        p, dt = self.p, self.dt
        phi, mu, psi, theta, lam = (x[s] for s in (self.sl_phi, self.sl_mu, self.sl_psi, self.sl_theta, self.sl_lam))
        phin, psin = old.phi.ravel(), old.psi.ravel()
        dphi = (phi - phin) / dt
        dpsi = (psi - psin) / dt
        r1 = dphi - self.L @ mu
        r2 = mu - p.sigma * dphi + self.L @ phi + self.B @ lam - p.bulk.beta(phi) - p.bulk.pi(phin)
        r3 = dpsi - self.LG @ theta
        r4 = theta - p.sigma * dpsi - lam + self.LG @ psi - p.surf.beta(psi) - p.surf.pi(psin)
        r5 = p.K * lam - psi + self.T @ phi
        return np.concatenate([r1, r2, r3, r4, r5])

    def jacobian(self, x) -> sp.csc_matrix:
        nb, ns = self.nb, self.ns
        db = np.zeros(self.n - nb)
        db[:nb] = -self.p.bulk.dbeta(x[self.sl_phi])
        ds = np.zeros(self.n - ns)
        ds[2 * nb:2 * nb + ns] = -self.p.surf.dbeta(x[self.sl_psi])
        return (self.J0 + sp.diags(db, -nb) + sp.diags(ds, -ns)).tocsc()

    def rounding_floor(self, x, old: PhaseState) -> float:
        """Max-norm of the residual error caused by rounding ``x`` and ``old``.

        Row ``i`` cannot be evaluated more accurately than
        ``eps * (|J| |x| + |d r / d old| |old|)_i``; near the singular barrier
        the ``beta'`` entries make this exceed fixed tolerances.
        """
        J = abs(self.jacobian(x))
        ax = np.abs(x)
        scale = J @ ax
        c = 1.0 / self.dt
        nb, ns = self.nb, self.ns
        phin, psin = np.abs(old.phi.ravel()), np.abs(old.psi.ravel())
        scale[:nb] += c * phin
        scale[nb:2 * nb] += self.p.sigma * c * phin + np.abs(self.p.bulk.pi(old.phi.ravel()))
        scale[2 * nb:2 * nb + ns] += c * psin
        scale[2 * nb + ns:2 * nb + 2 * ns] += self.p.sigma * c * psin + np.abs(self.p.surf.pi(old.psi.ravel()))
        return float(np.finfo(float).eps * np.max(scale))

    def reduced_hessian(self, phi, psi) -> sp.csr_matrix:
        """Weighted Hessian of the implicit (convex) energy part in ``(phi, psi)``.

        Symmetric positive definite when ``beta' > 0``; this is the operator
        left after eliminating ``mu``, ``theta`` and ``lam`` for ``K > 0``.
        """
        g, p = self.g, self.p
        W = sp.diags(g.bulk_weights.ravel())
        hb = W @ (-self.L) + sp.diags(g.bulk_weights.ravel() * (p.bulk.dbeta(phi.ravel()) + p.sigma / self.dt))
        hs = g.hx * (-self.LG + sp.diags(p.surf.dbeta(psi.ravel()) + p.sigma / self.dt))
        if p.K > 0:
            T = self.T
            pen = (g.hx / p.K)
            hb = hb + pen * (T.T @ T)
            hs = hs + pen * sp.identity(self.ns)
            off = -pen * T.T
            return sp.bmat([[hb, off], [off.T, hs]], format="csr")
        return sp.bmat([[hb, None], [None, hs]], format="csr")


def solve_linearized(system, rhs, cfg: StepperConfig | None = None) -> np.ndarray:
    """Solve ``system @ x = rhs`` for a sparse Jacobian.

    Raises
    ------
    LinearBreakdown
        The iterative solver did not reach ``cfg.linear_tol``.
    """
    A = sp.csc_matrix(system)
    kind = LinearSolver.DIRECT if cfg is None else cfg.linear_solver
    if kind is LinearSolver.DIRECT:
        try:
            return spla.splu(A).solve(rhs)
        except RuntimeError as exc:  # exactly singular factor
            raise LinearBreakdown(str(exc)) from exc
    try:
        ilu = spla.spilu(A, drop_tol=1e-6, fill_factor=20)
        M = spla.LinearOperator(A.shape, ilu.solve)
    except RuntimeError:
        M = None
    x, info = spla.bicgstab(A, rhs, rtol=cfg.linear_tol, atol=0.0, maxiter=cfg.linear_max_iter, M=M)
    if info != 0 or not np.all(np.isfinite(x)):
        raise LinearBreakdown(f"BiCGStab stopped with info={info}")
    return x


def _initial_guess(sys_: StepSystem, s_old: PhaseState) -> np.ndarray:
    g, p = sys_.g, sys_.p
    phi = s_old.phi
    if p.K == 0:
        phi = phi.copy()
        phi[0], phi[-1] = s_old.psi[0], s_old.psi[1]
    c = chemical_potentials(g, dataclasses.replace(p, sigma=0.0), PhaseState(phi, s_old.psi, s_old.t))
    return sys_.pack(phi, c.mu, s_old.psi, c.theta, c.dn_phi)


def _guard_ok(sys_, x, limits):
    phi = x[sys_.sl_phi]
    psi = x[sys_.sl_psi]
    a, b = np.max(np.abs(phi)), np.max(np.abs(psi))
    return a <= limits[0] and b <= limits[1] and a < 1.0 and b < 1.0


def step(g: G.Grid, p: ModelParams, cfg: StepperConfig, s_old: PhaseState, dt: float | None = None,
         system: StepSystem | None = None):
    """Advance one implicit step.

    Returns
    -------
    (PhaseState, ChemState, StepReport)

    Raises
    ------
    NewtonDivergence
        Budget exhausted or no residual decrease; retry with a smaller dt.
    SeparationBreach
        A trial iterate escaped the separation guard after full backtracking.
    """
    dt = cfg.dt if dt is None else dt
    sys_ = system if system is not None and system.dt == dt else StepSystem(g, p, dt)
    e_before = energy(g, p, s_old).total
    x = _initial_guess(sys_, s_old)
    guard = cfg.separation_guard
    use_guard = p.singular
    res = sys_.residual(x, s_old)
    rnorm = float(np.max(np.abs(res)))
    backtracks = 0
    iters = 0
    # With the direct solver the factorisation is kept between iterations and
    # steps (chord Newton) and refreshed whenever contraction degrades.
    chord = cfg.linear_solver is LinearSolver.DIRECT
    fresh = False
    while True:
        iters += 1
        if not np.isfinite(rnorm):
            raise NewtonDivergence("non-finite residual")
        if rnorm <= cfg.newton_tol:
            break
        if iters > cfg.newton_max_iter:
            raise NewtonDivergence(f"Newton did not converge in {cfg.newton_max_iter} iterations "
                                   f"(residual {rnorm:.3e})")
        if chord:
            if sys_._lu is None:
                sys_.factorize(x)
                fresh = True
            delta = sys_._lu.solve(-res)
        else:
            delta = solve_linearized(sys_.jacobian(x), -res, cfg)
        if use_guard:
            limits = tuple(m + guard * (1.0 - m) for m in
                           (np.max(np.abs(x[sys_.sl_phi])), np.max(np.abs(x[sys_.sl_psi]))))
        alpha = 1.0
        accepted = False
        guarded_out = True
        for _ in range(cfg.max_backtracks + 1):
            trial = x + alpha * delta
            if use_guard and not _guard_ok(sys_, trial, limits):
                alpha *= cfg.linesearch_shrink
                backtracks += 1
                continue
            guarded_out = False
            tres = sys_.residual(trial, s_old)
            tnorm = float(np.max(np.abs(tres)))
            if tnorm <= (1.0 - 1e-4 * alpha) * rnorm or tnorm <= cfg.newton_tol:
                accepted = True
                break
            if chord and not fresh:
                break  # stale factorisation: refresh before backtracking
            alpha *= cfg.linesearch_shrink
            backtracks += 1
        if not accepted:
            if chord and not fresh:
                sys_._lu = None
                continue
            if not guarded_out and rnorm <= 4.0 * sys_.rounding_floor(x, s_old):
                break  # converged to the rounding level of the residual
            if guarded_out:
                raise SeparationBreach("Newton trial left the separation guard after full backtracking")
            raise NewtonDivergence(f"line search failed to reduce the residual ({rnorm:.3e})")
        if chord and (alpha < 1.0 or tnorm > 0.25 * rnorm):
            sys_._lu = None
        fresh = False
        x, res, rnorm = trial, tres, tnorm
    phi, mu, psi, theta, lam = sys_.unpack(x)
    s_new = PhaseState(phi.copy(), psi.copy(), s_old.t + dt)
    rate = max(float(np.max(np.abs(phi - s_old.phi))), float(np.max(np.abs(psi - s_old.psi)))) / dt
    rpt = StepReport(
        newton_iters=iters,
        final_residual=rnorm,
        linesearch_backtracks=backtracks,
        energy_before=e_before,
        energy_after=energy(g, p, s_new).total,
        dt_used=dt,
        max_rate=rate,
    )
    return s_new, ChemState(mu.copy(), theta.copy(), lam.copy()), rpt


@dataclass
class Trajectory:
    state: PhaseState
    chem: ChemState | None
    reports: list = field(default_factory=list)
    steps: int = 0
    halvings: int = 0
    dt_min_used: float | None = None


Callback = Callable[[PhaseState, ChemState, "StepReport | None"], None]


def run(
    g: G.Grid,
    p: ModelParams,
    cfg: StepperConfig,
    s0: PhaseState,
    t_end: float,
    callbacks: Iterable[Callback] = (),
    record_every: int = 1,
    keep_reports: bool = True,
) -> Trajectory:
    """Advance ``s0`` to ``t_end`` with nominal steps of ``cfg.dt``.

    Callbacks receive ``(state, chem, report)`` at ``t = 0`` (with
    ``report=None``) and after every ``record_every`` nominal steps.  A
    nominal step whose Newton solve fails is split into two halves,
    recursively down to ``cfg.dt / 1024``.
    """
    if t_end < 0:
        raise ValueError("t_end must be >= 0")
    callbacks = list(callbacks)
    n_steps = int(round(t_end / cfg.dt))
    if abs(n_steps * cfg.dt - t_end) > 1e-9 * max(1.0, t_end):
        raise ValueError(f"t_end={t_end} is not a multiple of dt={cfg.dt}")
    dt_floor = cfg.dt / 1024
    systems: dict[float, StepSystem] = {}
    traj = Trajectory(state=s0, chem=None)

    c0 = chemical_potentials(g, dataclasses.replace(p, sigma=0.0), s0) if callbacks else None
    for cb in callbacks:
        cb(s0, c0, None)
    if n_steps == 0:
        traj.chem = c0
        return traj

    def advance(s, dt):
        sys_ = systems.get(dt)
        if sys_ is None:
            sys_ = systems[dt] = StepSystem(g, p, dt)
        try:
            return [step(g, p, cfg, s, dt, sys_)]
        except (NewtonDivergence, SeparationBreach) as exc:
            half = 0.5 * dt
            if half < dt_floor:
                raise Aborted(f"dt floor {dt_floor:g} reached at t={s.t:g}: {exc}") from exc
            log.info("halving dt to %g at t=%g (%s)", half, s.t, exc)
            traj.halvings += 1
            traj.dt_min_used = half if traj.dt_min_used is None else min(traj.dt_min_used, half)
            first = advance(s, half)
            second = advance(first[-1][0], half)
            return first + second

    s = s0
    chem = c0
    for n in range(1, n_steps + 1):
        pieces = advance(s, cfg.dt)
        s_end, chem, _ = pieces[-1]
        s = PhaseState(s_end.phi, s_end.psi, n * cfg.dt)
        if len(pieces) == 1:
            rpt = pieces[0][2]
        else:
            rpt = StepReport(
                newton_iters=sum(pc[2].newton_iters for pc in pieces),
                final_residual=max(pc[2].final_residual for pc in pieces),
                linesearch_backtracks=sum(pc[2].linesearch_backtracks for pc in pieces),
                energy_before=pieces[0][2].energy_before,
                energy_after=pieces[-1][2].energy_after,
                dt_used=min(pc[2].dt_used for pc in pieces),
                max_rate=pieces[-1][2].max_rate,
            )
        if keep_reports:
            traj.reports.append(rpt)
        traj.steps += len(pieces)
        if n % record_every == 0 or n == n_steps:
            for cb in callbacks:
                cb(s, chem, rpt)
    traj.state, traj.chem = s, chem
    return traj
