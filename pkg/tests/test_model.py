import numpy as np
import pytest

from bsch import grid as G
from bsch.errors import DimensionError, DomainError, MissingPrev
from bsch.grid import Grid
from bsch.model import (
    ModelParams, PhaseState, chemical_potentials, energy, exchange_flux, residual,
)
from bsch.potentials import Potential

from conftest import dense_circulant, dense_laplacian

LOG = Potential.logarithmic(1.0, 2.0)
LOG_S = Potential.logarithmic(2.0, 1.5)


def params(K, sigma=0.0, eps=None):
    return ModelParams(K=K, potential_bulk=LOG, potential_surf=LOG_S, sigma=sigma, yosida_eps=eps)


def random_state(g, rng, amp=0.6, match=False):
    phi = amp * (2 * rng.random(g.bulk_shape) - 1)
    psi = amp * (2 * rng.random(g.surf_shape) - 1)
    if match:
        phi[0], phi[-1] = psi[0], psi[1]
    return PhaseState(phi, psi)


def trapezoid_weights(g):
    w = np.full(g.bulk_shape, g.hx * g.hy)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def brute_energy(g, p, s):
    """Edge-by-edge summation of the five energy terms."""
    phi, psi = s.phi, s.psi
    ny, nx = g.bulk_shape
    e_dir = 0.0
    for j in range(ny):
        wy = g.hy * (0.5 if j in (0, ny - 1) else 1.0)
        for i in range(nx):
            e_dir += 0.5 * wy * g.hx * ((phi[j, (i + 1) % nx] - phi[j, i]) / g.hx) ** 2
            if j < ny - 1:
                e_dir += 0.5 * g.hx * g.hy * ((phi[j + 1, i] - phi[j, i]) / g.hy) ** 2
    e_pot = 0.0
    for j in range(ny):
        for i in range(nx):
            r = phi[j, i]
            wgt = g.hx * g.hy * (0.5 if j in (0, ny - 1) else 1.0)
            e_pot += wgt * (0.5 * LOG.theta * ((1 + r) * np.log(1 + r) + (1 - r) * np.log(1 - r))
                            - 0.5 * LOG.theta_c * r * r)
    s_dir = s_pot = pen = 0.0
    for k, j in ((0, 0), (1, ny - 1)):
        for i in range(nx):
            r = psi[k, i]
            s_dir += 0.5 * g.hx * ((psi[k, (i + 1) % nx] - r) / g.hx) ** 2
            s_pot += g.hx * (0.5 * LOG_S.theta * ((1 + r) * np.log(1 + r) + (1 - r) * np.log(1 - r))
                             - 0.5 * LOG_S.theta_c * r * r)
            if p.K > 0:
                pen += 0.5 / p.K * g.hx * (r - phi[j, i]) ** 2
    return e_dir, e_pot, s_dir, s_pot, pen


def dense_chem_oracle(g, p, s):
    """mu, theta as weighted gradients of the energy, from dense matrices (K > 0)."""
    W = np.diag(trapezoid_weights(g).ravel())
    L = dense_laplacian(g)
    C = dense_circulant(g.nx, g.hx)
    n = g.nx
    T = np.zeros((2 * n, g.n_bulk))
    for i in range(n):
        T[i, i] = 1.0
        T[n + i, (g.ny - 1) * n + i] = 1.0
    phi, psi = s.phi.ravel(), s.psi.ravel()
    mismatch = psi - T @ phi
    dE_phi = W @ (-L) @ phi + W @ LOG.derivative(phi) - g.hx / p.K * T.T @ mismatch
    lap_psi = np.concatenate([C @ s.psi[0], C @ s.psi[1]])
    dE_psi = g.hx * (-lap_psi + LOG_S.derivative(psi)) + g.hx / p.K * mismatch
    return (np.linalg.solve(W, dE_phi).reshape(g.bulk_shape),
            (dE_psi / g.hx).reshape(g.surf_shape))


def test_energy_matches_brute_force(rng):
    g = Grid(8, 8, 2.0, 1.5)
    s = random_state(g, rng)
    for K in (0.7, 0.0):
        p = params(K)
        e = energy(g, p, s)
        want = brute_energy(g, p, s)
        got = (e.bulk_dirichlet, e.bulk_potential, e.surf_dirichlet, e.surf_potential, e.penalty)
        np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-12)
        assert e.total == pytest.approx(sum(want), rel=1e-12)


def test_penalty_vanishes_for_dirichlet_transmission(rng):
    g = Grid(8, 4, 1.0, 1.0)
    s = random_state(g, rng)
    assert energy(g, params(0.0), s).penalty == 0.0
    assert energy(g, params(2.0), s).penalty > 0


def test_energy_domain_and_shape_errors(rng):
    g = Grid(8, 4, 1.0, 1.0)
    s = random_state(g, rng)
    bad = PhaseState(np.where(s.phi > 0, 1.0, s.phi), s.psi)
    with pytest.raises(DomainError):
        energy(g, params(1.0), bad)
    with pytest.raises(DimensionError):
        energy(g, params(1.0), PhaseState(s.phi[:, :4], s.psi))
    # the regularised model accepts states outside [-1, 1]
    e = energy(g, params(1.0, eps=0.1), PhaseState(2 * s.phi, s.psi))
    assert np.isfinite(e.total)


def test_exchange_flux_example():
    g = Grid(8, 4, 1.0, 1.0)
    p = params(2.0)
    phi = np.full(g.bulk_shape, 0.1)
    psi = np.full(g.surf_shape, 0.3)
    c = chemical_potentials(g, p, PhaseState(phi, psi))
    np.testing.assert_allclose(c.dn_phi, 0.1, rtol=1e-14)
    np.testing.assert_allclose(exchange_flux(g, p, phi, psi), 0.1, rtol=1e-14)
    with pytest.raises(ValueError):
        exchange_flux(g, params(0.0), phi, psi)


def test_chemical_potentials_match_dense_oracle(rng):
    g = Grid(6, 4, 1.2, 0.9)
    for K in (0.3, 2.0):
        p = params(K)
        s = random_state(g, rng)
        c = chemical_potentials(g, p, s)
        mu, theta = dense_chem_oracle(g, p, s)
        np.testing.assert_allclose(c.mu, mu, rtol=1e-12, atol=1e-12 * np.max(np.abs(mu)))
        np.testing.assert_allclose(c.theta, theta, rtol=1e-12, atol=1e-12 * np.max(np.abs(theta)))


def test_dirichlet_transmission_uses_joint_gradient(rng):
    """For K = 0 the pair (mu, theta) is the gradient along trace-preserving directions."""
    g = Grid(6, 4, 1.0, 1.0)
    p = params(0.0)
    s = random_state(g, rng, 0.5, match=True)
    c = chemical_potentials(g, p, s)
    v = rng.standard_normal(g.bulk_shape)
    vs = G.trace(g, v)
    h = 1e-5
    ep = energy(g, p, PhaseState(s.phi + h * v, s.psi + h * vs)).total
    em = energy(g, p, PhaseState(s.phi - h * v, s.psi - h * vs)).total
    want = (ep - em) / (2 * h)
    got = G.inner_bulk(g, c.mu, v) + G.inner_surface(g, c.theta, vs)
    assert got == pytest.approx(want, rel=1e-7)
    # supplying the multiplier changes the split but not the joint gradient
    c2 = chemical_potentials(g, p, s, flux=np.ones(g.surf_shape))
    assert G.inner_bulk(g, c2.mu, v) + G.inner_surface(g, c2.theta, vs) == pytest.approx(got, rel=1e-12)


def test_viscous_terms_need_previous_state(rng):
    g = Grid(8, 4, 1.0, 1.0)
    s = random_state(g, rng)
    with pytest.raises(MissingPrev):
        chemical_potentials(g, params(1.0, sigma=0.1), s)
    prev = random_state(g, rng)
    c0 = chemical_potentials(g, params(1.0), s)
    c1 = chemical_potentials(g, params(1.0, sigma=0.1), s, prev, 0.01)
    np.testing.assert_allclose(c1.mu - c0.mu, 10.0 * (s.phi - prev.phi), atol=1e-12)
    np.testing.assert_allclose(c1.theta - c0.theta, 10.0 * (s.psi - prev.psi), atol=1e-12)


@pytest.mark.parametrize("K", [0.0, 0.5, 3.0])
def test_residual_is_mass_compatible(K, rng):
    g = Grid(8, 5, 2.0, 1.0)
    p = params(K, sigma=0.1)
    old, new = random_state(g, rng), random_state(g, rng)
    r_phi, r_psi, _ = residual(g, p, new, old, 0.01)
    d_phi = G.integrate_bulk(g, new.phi - old.phi) / 0.01
    d_psi = G.integrate_surface(g, new.psi - old.psi) / 0.01
    assert G.integrate_bulk(g, r_phi) == pytest.approx(d_phi, abs=1e-13 * max(1, abs(d_phi)) * 100)
    assert G.integrate_surface(g, r_psi) == pytest.approx(d_psi, abs=1e-13 * max(1, abs(d_psi)) * 100)
    with pytest.raises(ValueError):
        residual(g, p, new, old, 0.0)


def test_residual_matches_dense_oracle(rng):
    g = Grid(6, 4, 1.0, 0.8)
    p = params(1.5)
    old, new = random_state(g, rng, 0.3), random_state(g, rng, 0.3)
    dt = 0.02
    r_phi, r_psi, chem = residual(g, p, new, old, dt)
    # convex part at the new state, concave part at the old one
    mu, theta = dense_chem_oracle(g, p, new)
    mu += LOG.pi(old.phi) - LOG.pi(new.phi)
    theta += LOG_S.pi(old.psi) - LOG_S.pi(new.psi)
    L = dense_laplacian(g)
    C = dense_circulant(g.nx, g.hx)
    want_phi = (new.phi - old.phi) / dt - (L @ mu.ravel()).reshape(g.bulk_shape)
    want_psi = (new.psi - old.psi) / dt - (C @ theta.T).T
    np.testing.assert_allclose(r_phi, want_phi, atol=1e-10 * np.max(np.abs(want_phi)))
    np.testing.assert_allclose(r_psi, want_psi, atol=1e-10 * np.max(np.abs(want_psi)))


def test_params_validation():
    with pytest.raises(ValueError):
        params(-1.0)
    with pytest.raises(ValueError):
        params(1.0, sigma=-0.1)
    with pytest.raises(ValueError):
        params(1.0, eps=1.5)
    p = params(1.0, eps=0.1)
    assert p.surf.eps == pytest.approx(0.1) and not p.singular
    assert params(0.0).chi == 0.0 and params(4.0).chi == 0.25
