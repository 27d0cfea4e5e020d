import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bsch.errors import DomainError, KindMismatch
from bsch.potentials import (
    Potential, YosidaApprox, eval_beta, eval_moreau_envelope, eval_pi, eval_yosida, f0,
    subgradient_indicator, validate_assumptions,
)

LOG24 = Potential.logarithmic(2.0, 4.0)
LOG12 = Potential.logarithmic(1.0, 2.0)
QUART = Potential.quartic()


def bisect(f, lo, hi, tol=1e-15):
    """Plain bisection on an increasing function; the independent resolvent oracle."""
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol:
            break
    return 0.5 * (lo + hi)


def log_resolvent_oracle(theta, eps, r):
    return bisect(lambda j: j + eps * 0.5 * theta * math.log((1 + j) / (1 - j)) - r,
                  -1 + 1e-17, 1 - 1e-17)


def test_beta_examples():
    assert eval_beta(LOG24, 0.0) == 0.0
    assert eval_beta(LOG24, 0.5) == pytest.approx(math.log(3.0), abs=1e-14)
    assert eval_beta(QUART, -1.0) == -1.0


def test_pi_examples():
    assert eval_pi(LOG12, 0.25) == -0.5
    for p in (LOG12, QUART, Potential.double_obstacle(1.0)):
        assert eval_pi(p, 0.0) == 0.0
    assert eval_pi(QUART, 1.0) == -1.0


def test_beta_errors():
    with pytest.raises(DomainError):
        eval_beta(LOG12, 1.0)
    with pytest.raises(DomainError):
        eval_beta(LOG12, np.array([0.0, -1.2]))
    with pytest.raises(KindMismatch):
        eval_beta(Potential.double_obstacle(1.0), 0.0)
    assert eval_beta(QUART, 3.0) == 27.0


def test_beta_is_odd():
    r = np.linspace(-0.999999, 0.999999, 2001)
    assert np.max(np.abs(LOG24.beta(-r) + LOG24.beta(r))) <= 1e-14


@pytest.mark.parametrize("p", [LOG12, LOG24, QUART])
def test_derivatives_by_central_differences(p):
    r = np.linspace(-0.95, 0.95, 77)
    h = 1e-5
    fd = (p.beta_hat(r + h) - p.beta_hat(r - h)) / (2 * h)
    np.testing.assert_allclose(fd, p.beta(r), atol=1e-6)
    fd = (p.pi_hat(r + h) - p.pi_hat(r - h)) / (2 * h)
    np.testing.assert_allclose(fd, p.pi(r), atol=1e-6)
    fd = (p.beta(r + h) - p.beta(r - h)) / (2 * h)
    np.testing.assert_allclose(fd, p.dbeta(r), rtol=1e-6, atol=1e-9)


def test_logarithmic_density_closed_form():
    r = 0.3
    w = 1.0 * ((1 + r) * math.log(1 + r) + (1 - r) * math.log(1 - r)) - 2.0 * r * r
    assert LOG24.density(r) == pytest.approx(w, abs=1e-15)
    assert f0(0.5) == pytest.approx(math.log(3.0), abs=1e-15)


def test_yosida_origin():
    for base in (LOG24, QUART):
        assert eval_yosida(YosidaApprox(base, 0.3), 0.0) == (0.0, 0.0)
        assert eval_moreau_envelope(YosidaApprox(base, 0.3), 0.0) == 0.0


def test_yosida_matches_bisection_oracle():
    y = YosidaApprox(LOG24, 0.5)
    b, j = eval_yosida(y, 0.9)
    jo = log_resolvent_oracle(2.0, 0.5, 0.9)
    assert j == pytest.approx(jo, abs=1e-12)
    assert j + 0.5 * math.log((1 + j) / (1 - j)) == pytest.approx(0.9, abs=1e-12)
    assert b == pytest.approx((0.9 - jo) / 0.5, abs=1e-12)
    env = (0.9 - jo) ** 2 / (2 * 0.5) + ((1 + jo) * math.log(1 + jo) + (1 - jo) * math.log(1 - jo))
    assert eval_moreau_envelope(y, 0.9) == pytest.approx(env, abs=1e-12)


def test_yosida_pointwise_convergence_toward_beta():
    # At eps = 1e-2 the gap to ln 3 is about 2.6%; it shrinks linearly in eps.
    exact = math.log(3.0)
    gaps = []
    for eps in (1e-2, 1e-3, 1e-4):
        b, _ = eval_yosida(YosidaApprox(LOG24, eps), 0.5)
        jo = log_resolvent_oracle(2.0, eps, 0.5)
        assert b == pytest.approx((0.5 - jo) / eps, rel=1e-9)
        gaps.append(abs(b - exact) / exact)
    assert gaps[0] < 0.03
    assert gaps[1] < 0.02
    assert gaps[0] / gaps[1] == pytest.approx(10, rel=0.1)


def test_quartic_envelope_below_base():
    y = YosidaApprox(QUART, 0.1)
    v = eval_moreau_envelope(y, 2.0)
    assert math.isfinite(v) and 0 < v < 4.0
    b, j = eval_yosida(y, 2.0)
    assert j + 0.1 * j**3 == pytest.approx(2.0, abs=1e-13)
    assert v == pytest.approx((2 - j) ** 2 / 0.2 + j**4 / 4, abs=1e-13)


def test_yosida_rejects_bad_parameters():
    with pytest.raises(ValueError):
        YosidaApprox(LOG12, 0.0)
    with pytest.raises(ValueError):
        YosidaApprox(LOG12, 1.0)
    with pytest.raises(KindMismatch):
        YosidaApprox(Potential.double_obstacle(1.0), 0.1)


@pytest.mark.parametrize("base", [LOG12, QUART])
@pytest.mark.parametrize("eps", [0.5, 1e-2, 1e-4])
def test_yosida_structural_properties(base, eps):
    y = YosidaApprox(base, eps)
    r = np.sort(np.random.default_rng(3).uniform(-3, 3, 4000))
    b, j = y.resolve(r)
    tol = 1e-12 * np.maximum(1.0, np.abs(b[1:]))  # rounding of b = (r - J) / eps
    assert np.all(np.diff(b) >= -tol)
    dr = np.diff(r)
    assert np.all(np.abs(np.diff(b)) <= dr / eps + tol)
    assert np.all(np.abs(np.diff(j)) <= dr + 1e-12)
    env = y.beta_hat(r)
    assert np.all(env >= -1e-15)
    inside = np.abs(r) < 1
    assert np.all(env[inside] <= base.beta_hat(r[inside]) + 1e-12)
    # derivative of the envelope is beta_eps
    h = 1e-6
    fd = (y.beta_hat(r + h) - y.beta_hat(r - h)) / (2 * h)
    assert np.all(np.abs(fd - b) <= 1e-5 * np.maximum(1, np.abs(b)) / eps)
    fd = (y.beta(r + h) - y.beta(r - h)) / (2 * h)
    assert np.all(np.abs(fd - y.dbeta(r)) <= 1e-4 * (1 + y.dbeta(r)) / eps)


def test_yosida_extreme_arguments_stay_finite():
    y = YosidaApprox(LOG12, 1e-3)
    b, j = y.resolve(np.array([-1e6, -1.5, 1.5, 1e6]))
    assert np.all(np.isfinite(b)) and np.all(np.abs(j) <= 1)
    np.testing.assert_allclose(b, (np.array([-1e6, -1.5, 1.5, 1e6]) - j) / 1e-3, rtol=1e-12)
    assert np.all(np.isfinite(y.beta_hat(np.array([-1e6, 1e6]))))


@settings(max_examples=60, deadline=None)
@given(r1=st.floats(-5, 5), r2=st.floats(-5, 5), eps=st.floats(1e-4, 0.9))
def test_yosida_pairs_property(r1, r2, eps):
    y = YosidaApprox(LOG24, eps)
    (b1, b2), (j1, j2) = y.resolve(np.array([r1, r2]))
    if r1 <= r2:
        assert b1 <= b2 + 1e-12
    assert abs(b1 - b2) <= abs(r1 - r2) / eps + 1e-12 * max(1.0, abs(b1), abs(b2))
    assert abs(j1 - j2) <= abs(r1 - r2) + 1e-12


def test_subgradient_examples():
    assert subgradient_indicator(0.3, 0.0)
    assert subgradient_indicator(1.0, 2.5)
    assert not subgradient_indicator(-1.0, 0.1)
    assert subgradient_indicator(-1.0, -3.0)
    assert not subgradient_indicator(0.3, 1e-3)
    assert subgradient_indicator(1 - 1e-9, 1.0)  # inside the contact band
    with pytest.raises(DomainError):
        subgradient_indicator(1.5, 0.0)


def test_validate_logarithmic_pair():
    rep = validate_assumptions(LOG24, LOG24, 1000)
    assert rep.all_passed, rep.lines()
    assert rep["A2"].constants["rho"] == pytest.approx(1.0, abs=1e-12)
    assert rep["A2"].constants["c0"] == 0.0
    assert rep["A5a"].constants["gamma_sharp"] == 1.0
    assert rep["A5b"].constants["kappa"] == pytest.approx(1.0, abs=0.15)
    assert rep["A1"].constants["varpi_bulk"] == pytest.approx(2.0, rel=1e-9)
    assert rep["A3"].constants["gamma_bulk"] == pytest.approx(4.0)


def test_validate_flags_failures():
    rep = validate_assumptions(QUART, QUART, 200)
    assert not rep["A1"].passed
    # a constant ratio between bulk and surface is still a valid domination
    rep = validate_assumptions(Potential.logarithmic(2.0, 1.0), Potential.logarithmic(1.0, 1.0), 400)
    assert rep["A2"].passed  # ratio is constant (2), so a finite rho exists
    assert rep["A2"].constants["rho"] == pytest.approx(2.0, rel=1e-9)
    with pytest.raises(ValueError):
        validate_assumptions(LOG12, LOG12, 50)
    with pytest.raises(KindMismatch):
        validate_assumptions(Potential.double_obstacle(1.0), LOG12)


@pytest.mark.parametrize("m", np.linspace(-0.9, 0.9, 7))
def test_coercivity_around_mean(m):
    """f0(r)(r - m) >= c |f0(r)| - c' with c, c' fitted from the samples."""
    gap = np.geomspace(1e-12, 1.0, 400)
    r = np.concatenate([-(1 - gap), 1 - gap])
    f = f0(r)
    lhs = f * (r - m)
    c = 0.5 * (1 - abs(m))
    cprime = max(0.0, float(np.max(c * np.abs(f) - lhs)))
    assert c > 0
    assert np.all(lhs >= c * np.abs(f) - cprime - 1e-12)
    # the constant c' stays moderate: the bound is driven by the tails, not violated there
    tail = np.abs(r) > 1 - 1e-6
    assert np.all(lhs[tail] - c * np.abs(f[tail]) > 0)
