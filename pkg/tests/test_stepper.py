import numpy as np
import pytest
import scipy.sparse as sp

from bsch import grid as G
from bsch.errors import Aborted, LinearBreakdown, NewtonDivergence
from bsch.grid import Grid
from bsch.model import ModelParams, PhaseState, energy
from bsch.potentials import Potential
from bsch.stepper import LinearSolver, StepperConfig, StepSystem, run, solve_linearized, step

from conftest import fixed_point_step

LOG24 = Potential.logarithmic(2.0, 4.0)
LOG12 = Potential.logarithmic(1.0, 2.0)


def params(K, sigma=0.0, pot=LOG24, eps=None):
    return ModelParams(K=K, potential_bulk=pot, potential_surf=pot, sigma=sigma, yosida_eps=eps)


def noise_state(g, rng, amp=0.2, mean=0.0):
    return PhaseState(mean + amp * (2 * rng.random(g.bulk_shape) - 1),
                      mean + amp * (2 * rng.random(g.surf_shape) - 1))


def test_constant_state_is_fixed_point():
    g = Grid(8, 4, 2.0, 1.0)
    s = PhaseState(np.full(g.bulk_shape, 0.3), np.full(g.surf_shape, 0.3))
    new, chem, rpt = step(g, params(1.0), StepperConfig(dt=0.1), s)
    assert rpt.newton_iters == 1
    assert np.array_equal(new.phi, s.phi) and np.array_equal(new.psi, s.psi)
    assert new.t == pytest.approx(0.1)
    np.testing.assert_allclose(chem.mu, LOG24.derivative(0.3), atol=1e-13)


@pytest.mark.parametrize("K", [0.0, 0.5, 2.0])
@pytest.mark.parametrize("sigma", [0.0, 0.1])
def test_step_matches_fixed_point_oracle(K, sigma):
    g = Grid(6, 4, 1.5, 1.0)
    rng = np.random.default_rng(int(10 * K + 100 * sigma))
    old = noise_state(g, rng)
    p = params(K, sigma)
    phi, psi, lam, iters = fixed_point_step(g, p, old, 1e-3)
    assert iters < 20000
    new, chem, rpt = step(g, p, StepperConfig(dt=1e-3), old)
    assert np.max(np.abs(new.phi - phi)) <= 1e-8
    assert np.max(np.abs(new.psi - psi)) <= 1e-8
    assert np.max(np.abs(chem.dn_phi - lam)) <= 1e-8
    assert G.mean_bulk(g, new.phi) == pytest.approx(G.mean_bulk(g, old.phi), abs=1e-12)
    assert G.mean_surface(g, new.psi) == pytest.approx(G.mean_surface(g, old.psi), abs=1e-12)
    if K == 0:
        np.testing.assert_allclose(G.trace(g, new.phi), new.psi, atol=1e-12)


def test_solve_linearized_matches_dense():
    g = Grid(4, 4, 1.0, 1.0)
    rng = np.random.default_rng(5)
    old = noise_state(g, rng)
    sys_ = StepSystem(g, params(1.0), 1e-2)
    x = sys_.pack(old.phi, rng.standard_normal(g.bulk_shape), old.psi,
                  rng.standard_normal(g.surf_shape), rng.standard_normal(g.surf_shape))
    J = sys_.jacobian(x)
    rhs = rng.standard_normal(sys_.n)
    want = np.linalg.solve(J.toarray(), rhs)
    np.testing.assert_allclose(solve_linearized(J, rhs), want, rtol=1e-10, atol=1e-10 * np.max(np.abs(want)))
    cfg = StepperConfig(dt=1e-2, linear_solver="bicgstab")
    np.testing.assert_allclose(solve_linearized(J, rhs, cfg), want, rtol=1e-6, atol=1e-8 * np.max(np.abs(want)))


def test_jacobian_matches_finite_differences():
    g = Grid(5, 4, 1.0, 1.0)
    rng = np.random.default_rng(9)
    old = noise_state(g, rng)
    sys_ = StepSystem(g, params(0.7, 0.1), 1e-2)
    x = sys_.pack(old.phi * 0.9, rng.standard_normal(g.bulk_shape), old.psi * 0.9,
                  rng.standard_normal(g.surf_shape), rng.standard_normal(g.surf_shape))
    J = sys_.jacobian(x).toarray()
    h = 1e-6
    for k in rng.choice(sys_.n, 12, replace=False):
        e = np.zeros(sys_.n)
        e[k] = h
        fd = (sys_.residual(x + e, old) - sys_.residual(x - e, old)) / (2 * h)
        np.testing.assert_allclose(fd, J[:, k], atol=1e-5 * (1 + np.max(np.abs(J[:, k]))))


def test_singular_direct_system_raises():
    with pytest.raises(LinearBreakdown):
        solve_linearized(sp.csc_matrix((3, 3)), np.ones(3))


@pytest.mark.parametrize("K", [0.0, 1.0])
def test_reduced_hessian_positive_definite(K):
    g = Grid(6, 4, 1.0, 1.0)
    rng = np.random.default_rng(2)
    s = noise_state(g, rng, 0.8)
    H = StepSystem(g, params(K), 1e-3).reduced_hessian(s.phi, s.psi)
    assert abs(H - H.T).max() <= 1e-10 * abs(H).max()
    for _ in range(50):
        v = rng.standard_normal(H.shape[0])
        assert v @ (H @ v) > 0


def test_bicgstab_step_agrees_with_direct():
    g = Grid(8, 6, 2.0, 1.0)
    old = noise_state(g, np.random.default_rng(4))
    a, _, _ = step(g, params(1.0), StepperConfig(dt=1e-3), old)
    b, _, rb = step(g, params(1.0), StepperConfig(dt=1e-3, linear_solver=LinearSolver.BICGSTAB), old)
    assert np.max(np.abs(a.phi - b.phi)) <= 1e-9
    assert rb.newton_iters >= 2


def test_yosida_and_quartic_steps_converge():
    g = Grid(8, 4, 2.0, 1.0)
    old = noise_state(g, np.random.default_rng(6), 0.5)
    for p in (params(1.0, eps=0.01), params(0.0, pot=Potential.quartic())):
        new, _, rpt = step(g, p, StepperConfig(dt=1e-2), old)
        assert rpt.final_residual <= 1e-11
        assert rpt.energy_after <= rpt.energy_before + 1e-12


def test_newton_budget_exhaustion():
    g = Grid(8, 4, 2.0, 1.0)
    old = noise_state(g, np.random.default_rng(8), 0.5)
    with pytest.raises(NewtonDivergence):
        step(g, params(1.0), StepperConfig(dt=1e-2, newton_max_iter=1), old)


def test_run_zero_time_and_validation():
    g = Grid(8, 4, 1.0, 1.0)
    s0 = noise_state(g, np.random.default_rng(1))
    seen = []
    tr = run(g, params(1.0), StepperConfig(dt=0.1), s0, 0.0, callbacks=[lambda s, c, r: seen.append(r)])
    assert tr.steps == 0 and tr.state is s0 and seen == [None]
    with pytest.raises(ValueError):
        run(g, params(1.0), StepperConfig(dt=0.1), s0, 0.25)
    with pytest.raises(ValueError):
        run(g, params(1.0), StepperConfig(dt=0.1), s0, -1.0)
    with pytest.raises(ValueError):
        StepperConfig(dt=0.0)


def test_run_records_and_dissipates():
    g = Grid(16, 8, 8.0, 4.0)
    s0 = noise_state(g, np.random.default_rng(3), 0.05)
    p = params(1.0, pot=LOG12)
    recs = []
    tr = run(g, p, StepperConfig(dt=0.01), s0, 0.5, callbacks=[lambda s, c, r: recs.append((s, r))],
             record_every=5)
    assert tr.steps == 50 and len(recs) == 11
    e = [energy(g, p, s).total for s, _ in recs]
    assert all(b <= a + 1e-10 for a, b in zip(e, e[1:]))
    assert all(r.energy_after <= r.energy_before + 1e-10 for r in tr.reports)
    assert G.mean_bulk(g, tr.state.phi) == pytest.approx(G.mean_bulk(g, s0.phi), abs=1e-13)


def test_run_halves_step_on_failure(monkeypatch):
    import bsch.stepper as S
    real = S.step
    calls = []

    def flaky(g, p, cfg, s, dt=None, system=None):
        calls.append(dt)
        if dt > 0.03:
            raise NewtonDivergence("forced")
        return real(g, p, cfg, s, dt, system)

    monkeypatch.setattr(S, "step", flaky)
    g = Grid(8, 4, 2.0, 1.0)
    s0 = noise_state(g, np.random.default_rng(8), 0.5)
    tr = S.run(g, params(1.0), StepperConfig(dt=0.05), s0, 0.1)
    assert tr.halvings == 2 and tr.dt_min_used == 0.025
    assert calls == [0.05, 0.025, 0.025, 0.05, 0.025, 0.025]
    assert tr.state.t == pytest.approx(0.1)
    assert len(tr.reports) == 2 and tr.reports[0].dt_used == 0.025


def test_run_aborts_at_dt_floor(monkeypatch):
    import bsch.stepper as S

    def always_fail(*a, **k):
        raise NewtonDivergence("forced")

    monkeypatch.setattr(S, "step", always_fail)
    g = Grid(8, 4, 2.0, 1.0)
    with pytest.raises(Aborted, match="dt floor"):
        S.run(g, params(1.0), StepperConfig(dt=0.05), noise_state(g, np.random.default_rng(0)), 0.05)
