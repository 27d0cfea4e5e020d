"""Coupled bulk/surface state, total free energy and chemical potentials.

The discrete energy is::

    E = D(phi) + sum w F(phi) + D_G(psi) + sum hx G(psi)
        + chi(K)/2 * sum hx (psi - phi|_G)**2

with ``D`` and ``D_G`` the Dirichlet forms of :mod:`bsch.grid`.  The chemical
potentials are its weighted gradients.  The exchange flux ``dn_phi`` (the
discrete outward normal derivative of ``phi``) enters ``mu`` through the ghost
rows and ``theta`` directly:

* ``K > 0``: ``dn_phi = (psi - phi|_G) / K``;
* ``K = 0``: ``phi|_G = psi`` and ``dn_phi`` is a Lagrange multiplier.  When
  it is not supplied (e.g. by the stepper) it is recovered from the bulk
  stencil by requiring ``mu`` on a boundary row to equal ``mu`` on the
  adjacent interior row.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import grid as G
from .errors import MissingPrev
from .potentials import Potential, YosidaApprox

__all__ = [
    "ModelParams",
    "PhaseState",
    "ChemState",
    "EnergyBreakdown",
    "energy",
    "chemical_potentials",
    "residual",
    "exchange_flux",
]


@dataclass(frozen=True)
class ModelParams:
    """Physical and regularisation parameters.

    ``yosida_eps = None`` uses the exact convex part; otherwise both
    potentials are replaced by their Moreau-Yosida regularisations, the
    surface one scaled by ``yosida_rho``.
    """

    K: float
    potential_bulk: Potential
    potential_surf: Potential
    sigma: float = 0.0
    yosida_eps: float | None = None
    yosida_rho: float = 1.0

    def __post_init__(self):
        if not self.K >= 0:
            raise ValueError(f"K must be >= 0, got {self.K}")
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if self.yosida_eps is not None and not 0 < self.yosida_eps < 1:
            raise ValueError(f"yosida_eps must lie in (0, 1), got {self.yosida_eps}")

    @property
    def chi(self) -> float:
        return 0.0 if self.K == 0 else 1.0 / self.K

    @cached_property
    def bulk(self):
        if self.yosida_eps is None:
            return self.potential_bulk
        return YosidaApprox(self.potential_bulk, self.yosida_eps, 1.0)

    @cached_property
    def surf(self):
        if self.yosida_eps is None:
            return self.potential_surf
        return YosidaApprox(self.potential_surf, self.yosida_eps, self.yosida_rho)

    @property
    def singular(self) -> bool:
        return self.bulk.singular or self.surf.singular


@dataclass(frozen=True)
class PhaseState:
    phi: np.ndarray
    psi: np.ndarray
    t: float = 0.0

    def copy(self) -> "PhaseState":
        return PhaseState(self.phi.copy(), self.psi.copy(), self.t)


@dataclass(frozen=True)
class ChemState:
    mu: np.ndarray
    theta: np.ndarray
    dn_phi: np.ndarray | None = None


@dataclass(frozen=True)
class EnergyBreakdown:
    bulk_dirichlet: float
    bulk_potential: float
    surf_dirichlet: float
    surf_potential: float
    penalty: float
    total: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(
            self,
            "total",
            self.bulk_dirichlet + self.bulk_potential + self.surf_dirichlet
            + self.surf_potential + self.penalty,
        )


def energy(g: G.Grid, p: ModelParams, s: PhaseState) -> EnergyBreakdown:
    """Quadrature evaluation of the five energy terms."""
    phi = g.check_bulk(s.phi)
    psi = g.check_surf(s.psi)
    pen = 0.0
    if p.K > 0:
        pen = 0.5 * p.chi * g.hx * float(np.sum((psi - G.trace(g, phi)) ** 2))
    return EnergyBreakdown(
        bulk_dirichlet=G.dirichlet_energy_bulk(g, phi),
        bulk_potential=float(np.sum(g.bulk_weights * p.bulk.density(phi))),
        surf_dirichlet=G.dirichlet_energy_surface(g, psi),
        surf_potential=g.hx * float(np.sum(p.surf.density(psi))),
        penalty=pen,
    )


def identify_trace(g: G.Grid, phi, psi) -> np.ndarray:
    """Copy of ``phi`` whose boundary rows are overwritten by ``psi``."""
    phi = np.array(phi, dtype=float)
    phi[0] = psi[0]
    phi[-1] = psi[1]
    return phi


def exchange_flux(g: G.Grid, p: ModelParams, phi, psi) -> np.ndarray:
    """Robin exchange flux ``(psi - phi|_G) / K`` (requires ``K > 0``)."""
    if p.K == 0:
        raise ValueError("exchange flux is a multiplier when K = 0")
    return (psi - G.trace(g, phi)) / p.K


def _assemble(g, p, phi, psi, phi_pi, psi_pi, visc_phi, visc_psi, flux):
    if p.K == 0:
        phi = identify_trace(g, phi, psi)
    mu = -G.laplace_bulk(g, phi) + p.bulk.beta(phi) + p.bulk.pi(phi_pi)
    if visc_phi is not None:
        mu = mu + visc_phi
    if p.K > 0:
        flux = exchange_flux(g, p, phi, psi)
    elif flux is None:
        # recover the multiplier from the bulk side: mu continuous across
        # the first interior row
        flux = np.stack([0.5 * g.hy * (mu[0] - mu[1]), 0.5 * g.hy * (mu[-1] - mu[-2])])
    else:
        flux = g.check_surf(flux)
    mu = mu.copy()
    mu[0] -= 2.0 * flux[0] / g.hy
    mu[-1] -= 2.0 * flux[1] / g.hy
    theta = flux - G.laplace_surface(g, psi) + p.surf.beta(psi) + p.surf.pi(psi_pi)
    if visc_psi is not None:
        theta = theta + visc_psi
    return phi, ChemState(mu, theta, flux)


def _viscous(p, s, s_prev, dt):
    if p.sigma == 0:
        return None, None
    if s_prev is None or dt is None:
        raise MissingPrev("sigma > 0 requires the previous state and dt")
    c = p.sigma / dt
    return c * (s.phi - s_prev.phi), c * (s.psi - s_prev.psi)


def chemical_potentials(
    g: G.Grid,
    p: ModelParams,
    s: PhaseState,
    s_prev: PhaseState | None = None,
    dt: float | None = None,
    flux=None,
) -> ChemState:
    """Assemble ``(mu, theta)`` for a state.

    Parameters
    ----------
    s_prev, dt
        Previous state and step, needed when ``sigma > 0`` for the viscous
        terms ``sigma * (s - s_prev) / dt``.
    flux : ndarray, shape (2, nx), optional
        The multiplier ``dn_phi`` for ``K = 0``; ignored when ``K > 0``.

    Raises
    ------
    MissingPrev
        ``sigma > 0`` without ``s_prev`` and ``dt``.
    DomainError
        A singular potential evaluated outside (-1, 1).
    """
    phi = g.check_bulk(s.phi)
    psi = g.check_surf(s.psi)
    vphi, vpsi = _viscous(p, s, s_prev, dt)
    return _assemble(g, p, phi, psi, phi, psi, vphi, vpsi, flux)[1]


def residual(
    g: G.Grid,
    p: ModelParams,
    s_new: PhaseState,
    s_old: PhaseState,
    dt: float,
    flux=None,
):
    """Residual of one convex-split implicit step.

    The convex part is evaluated at ``s_new`` and the concave part at
    ``s_old``.  Returns ``(r_phi, r_psi, chem)``.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    phi = g.check_bulk(s_new.phi)
    psi = g.check_surf(s_new.psi)
    vphi, vpsi = _viscous(p, s_new, s_old, dt)
    _, chem = _assemble(g, p, phi, psi, s_old.phi, s_old.psi, vphi, vpsi, flux)
    r_phi = (phi - s_old.phi) / dt - G.laplace_bulk(g, chem.mu)
    r_psi = (psi - s_old.psi) / dt - G.laplace_surface(g, chem.theta)
    return r_phi, r_psi, chem
