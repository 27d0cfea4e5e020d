"""Free-energy densities split into a convex part and a concave perturbation.

Every density is written as ``F = beta_hat + pi_hat`` with ``beta_hat`` convex
(possibly singular at +-1) and ``pi_hat`` smooth with a globally Lipschitz
derivative.  Three kinds are supported:

* ``logarithmic`` (Flory-Huggins)::

      W(r) = theta/2 * [(1+r) ln(1+r) + (1-r) ln(1-r)] - theta_c/2 * r**2

* ``quartic``: ``W(r) = (r**2 - 1)**2 / 4`` split as ``r**4/4`` plus
  ``-r**2/2 + 1/4``.
* ``double_obstacle``: indicator of [-1, 1] minus ``theta_c/2 * r**2``.  Its
  convex part is set-valued, so it only enters through
  :func:`subgradient_indicator`.

The Moreau-Yosida regularisation of the convex part is provided by
:class:`YosidaApprox`.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConvergenceError, DomainError, KindMismatch

__all__ = [
    "Kind",
    "Potential",
    "YosidaApprox",
    "AssumptionCheck",
    "AssumptionReport",
    "eval_beta",
    "eval_pi",
    "eval_yosida",
    "eval_moreau_envelope",
    "subgradient_indicator",
    "validate_assumptions",
    "f0",
]

RESOLVENT_TOL = 1e-14
RESOLVENT_MAX_ITER = 200


class Kind(str, enum.Enum):
    LOGARITHMIC = "logarithmic"
    QUARTIC = "quartic"
    DOUBLE_OBSTACLE = "double_obstacle"


def f0(r):
    """Derivative of the logarithmic entropy, ``ln((1+r)/(1-r))``."""
    return 2.0 * np.arctanh(r)


def _log_cosh(u):
    a = np.abs(u)
    return a + np.log1p(np.exp(-2.0 * a)) - math.log(2.0)


@dataclass(frozen=True)
class Potential:
    """A convex/concave split free-energy density.

    Parameters
    ----------
    kind : Kind
        Which density.
    theta : float
        Absolute temperature (logarithmic kind only).
    theta_c : float
        Critical temperature; coefficient of the concave quadratic for the
        logarithmic and double-obstacle kinds.
    """

    kind: Kind
    theta: float = 1.0
    theta_c: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.kind is Kind.LOGARITHMIC and not self.theta > 0:
            raise ValueError(f"theta must be > 0, got {self.theta}")
        if self.kind is not Kind.QUARTIC and not self.theta_c > 0:
            raise ValueError(f"theta_c must be > 0, got {self.theta_c}")

    @classmethod
    def logarithmic(cls, theta: float, theta_c: float) -> "Potential":
        return cls(Kind.LOGARITHMIC, float(theta), float(theta_c))

    @classmethod
    def quartic(cls) -> "Potential":
        return cls(Kind.QUARTIC, 0.0, 0.0)

    @classmethod
    def double_obstacle(cls, theta_c: float) -> "Potential":
        return cls(Kind.DOUBLE_OBSTACLE, 0.0, float(theta_c))

    @property
    def singular(self) -> bool:
        return self.kind is not Kind.QUARTIC

    @property
    def varpi(self) -> float:
        """Lower bound of ``beta'`` on the domain (0 when none exists)."""
        return self.theta if self.kind is Kind.LOGARITHMIC else 0.0

    @property
    def pi_lipschitz(self) -> float:
        return 1.0 if self.kind is Kind.QUARTIC else self.theta_c

    def check_domain(self, r) -> None:
        if not self.singular:
            return
        r = np.asarray(r)
        bad = ~(np.abs(r) < 1.0)
        if np.any(bad):
            worst = r[bad].flat[0]
            raise DomainError(
                f"{self.kind.value} potential evaluated at {worst!r}, "
                "outside the open interval (-1, 1)"
            )

    def _require_pointwise(self):
        if self.kind is Kind.DOUBLE_OBSTACLE:
            raise KindMismatch(
                "the double-obstacle convex part is set-valued; "
                "use subgradient_indicator instead"
            )

    # convex part -----------------------------------------------------------

    def beta_hat(self, r):
        self._require_pointwise()
        self.check_domain(r)
        r = np.asarray(r, dtype=float)
        if self.kind is Kind.QUARTIC:
            return 0.25 * r**4
        return 0.5 * self.theta * ((1.0 + r) * np.log1p(r) + (1.0 - r) * np.log1p(-r))

    def beta(self, r):
        self._require_pointwise()
        self.check_domain(r)
        r = np.asarray(r, dtype=float)
        if self.kind is Kind.QUARTIC:
            return r**3
        return self.theta * np.arctanh(r)

    def dbeta(self, r):
        self._require_pointwise()
        self.check_domain(r)
        r = np.asarray(r, dtype=float)
        if self.kind is Kind.QUARTIC:
            return 3.0 * r**2
        return self.theta / ((1.0 - r) * (1.0 + r))

    def beta_inverse(self, b):
        """Inverse of ``beta`` (defined on all of R)."""
        self._require_pointwise()
        b = np.asarray(b, dtype=float)
        if self.kind is Kind.QUARTIC:
            return np.cbrt(b)
        return np.tanh(b / self.theta)

    # concave part ----------------------------------------------------------

    def pi_hat(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind is Kind.QUARTIC:
            return 0.25 - 0.5 * r**2
        return -0.5 * self.theta_c * r**2

    def pi(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind is Kind.QUARTIC:
            return -r
        return -self.theta_c * r

    def dpi(self, r):
        return np.full_like(np.asarray(r, dtype=float), -self.pi_lipschitz)

    # full density ----------------------------------------------------------

    def density(self, r):
        return self.beta_hat(r) + self.pi_hat(r)

    def derivative(self, r):
        return self.beta(r) + self.pi(r)


def _scalar_or_array(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


def eval_beta(p: Potential, r):
    """``beta(r)``, the derivative of the convex part.

    Raises
    ------
    DomainError
        If ``|r| >= 1`` for a singular kind.
    KindMismatch
        For the double-obstacle kind, whose subgradient is set-valued.
    """
    return _scalar_or_array(p.beta(r))


def eval_pi(p: Potential, r):
    """``pi(r)``, the derivative of the concave perturbation."""
    return _scalar_or_array(p.pi(r))


def _safeguarded_newton(
    g: Callable, dg: Callable, lo: np.ndarray, hi: np.ndarray, x0: np.ndarray,
    xtol: np.ndarray, ftol: np.ndarray,
):
    """Vectorised Newton iteration on increasing ``g`` with bisection fallback.

    ``g(lo) <= 0 <= g(hi)`` must hold elementwise.
    """
    x = x0.copy()
    lo = lo.copy()
    hi = hi.copy()
    active = np.ones(x.shape, dtype=bool)
    for _ in range(RESOLVENT_MAX_ITER):
        gx = g(x)
        done = np.abs(gx) <= ftol
        active &= ~done
        if not active.any():
            return x
        neg = gx < 0
        lo = np.where(active & neg, x, lo)
        hi = np.where(active & ~neg, x, hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = gx / dg(x)
        xn = x - step
        outside = ~((xn > lo) & (xn < hi)) | ~np.isfinite(xn)
        xn = np.where(outside, 0.5 * (lo + hi), xn)
        moved = np.abs(xn - x)
        x = np.where(active, xn, x)
        converged = active & ((moved <= xtol) | (hi - lo <= xtol))
        active &= ~converged
        if not active.any():
            return x
    raise ConvergenceError(
        f"resolvent solve did not converge in {RESOLVENT_MAX_ITER} iterations"
    )


@dataclass(frozen=True)
class YosidaApprox:
    """Moreau-Yosida regularisation of the convex part of ``base``.

    The effective parameter is ``epsilon * rho``: ``rho = 1`` gives the bulk
    regularisation ``beta_eps``, ``rho > 1`` the scaled surface one.
    """

    base: Potential
    epsilon: float
    rho: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if not self.rho > 0:
            raise ValueError(f"rho must be > 0, got {self.rho}")
        self.base._require_pointwise()

    @property
    def eps(self) -> float:
        return self.epsilon * self.rho

    def resolve(self, r):
        """Return ``(beta_eps(r), J_eps(r))`` elementwise."""
        r = np.asarray(r, dtype=float)
        eps = self.eps
        if self.base.kind is Kind.LOGARITHMIC:
            # Unknown is b = beta(J); then J = tanh(b / theta) never rounds
            # outside [-1, 1] and b = (r - J) / eps holds at the root.
            th = self.base.theta
            bound = r / eps
            lo = np.minimum(0.0, bound)
            hi = np.maximum(0.0, bound)
            b = _safeguarded_newton(
                lambda b: np.tanh(b / th) + eps * b - r,
                lambda b: 1.0 / (th * np.cosh(np.clip(b / th, -350, 350)) ** 2) + eps,
                lo, hi, np.zeros_like(r),
                xtol=np.maximum(np.abs(bound), 1.0) * 2e-16,
                ftol=np.full_like(r, RESOLVENT_TOL),
            )
            b = np.where(r == 0.0, 0.0, b)
            return b, np.tanh(b / th)
        lo = np.minimum(0.0, r)
        hi = np.maximum(0.0, r)
        j = _safeguarded_newton(
            lambda j: j + eps * j**3 - r,
            lambda j: 1.0 + 3.0 * eps * j**2,
            lo, hi, r.copy(),
            xtol=np.maximum(np.abs(r), 1.0) * 2e-16,
            ftol=np.full_like(r, RESOLVENT_TOL),
        )
        return (r - j) / eps, j

    def beta(self, r):
        return self.resolve(r)[0]

    def dbeta(self, r):
        """Derivative ``beta'(J) / (1 + eps * beta'(J))``."""
        b, j = self.resolve(r)
        if self.base.kind is Kind.LOGARITHMIC:
            th = self.base.theta
            u = np.clip(b / th, -350, 350)
            return 1.0 / (1.0 / (th * np.cosh(u) ** 2) + self.eps)
        d = 3.0 * j**2
        return d / (1.0 + self.eps * d)

    def beta_hat(self, r):
        """Moreau envelope ``|r - J|^2 / (2 eps) + beta_hat(J)``."""
        b, j = self.resolve(r)
        quad = 0.5 * self.eps * b**2
        if self.base.kind is Kind.LOGARITHMIC:
            th = self.base.theta
            u = b / th
            # F0(tanh u) = 2 u tanh u - 2 ln cosh u, stable for large |u|
            return quad + 0.5 * th * (2.0 * u * np.tanh(u) - 2.0 * _log_cosh(u))
        return quad + 0.25 * j**4

    # the concave part is untouched by the regularisation
    def pi(self, r):
        return self.base.pi(r)

    def pi_hat(self, r):
        return self.base.pi_hat(r)

    def density(self, r):
        return self.beta_hat(r) + self.pi_hat(r)

    def derivative(self, r):
        return self.beta(r) + self.pi(r)

    @property
    def singular(self) -> bool:
        return False

    def check_domain(self, r) -> None:
        return None


def eval_yosida(y: YosidaApprox, r):
    """Return ``(beta_eps(r), J_eps(r))``.

    Examples
    --------
    >>> y = YosidaApprox(Potential.logarithmic(2.0, 4.0), 0.5)
    >>> b, j = eval_yosida(y, 0.0)
    >>> (b, j)
    (0.0, 0.0)
    """
    b, j = y.resolve(r)
    return _scalar_or_array(b), _scalar_or_array(j)


def eval_moreau_envelope(y: YosidaApprox, r):
    return _scalar_or_array(y.beta_hat(r))


def subgradient_indicator(r, candidate, contact_tol: float = 1e-8, zero_tol: float = 0.0) -> bool:
    """Whether ``candidate`` lies in the subdifferential of the indicator of [-1, 1] at ``r``.

    Nodes with ``1 - |r| <= contact_tol`` count as contact points.
    """
    r = float(r)
    candidate = float(candidate)
    if abs(r) > 1.0 + contact_tol:
        raise DomainError(f"subgradient of I_[-1,1] is empty at r={r!r}")
    if r >= 1.0 - contact_tol:
        return candidate >= -zero_tol
    if r <= -1.0 + contact_tol:
        return candidate <= zero_tol
    return abs(candidate) <= zero_tol


# ---------------------------------------------------------------------------
# structural assumption validators


@dataclass
class AssumptionCheck:
    name: str
    passed: bool
    constants: dict = field(default_factory=dict)
    note: str = ""


@dataclass
class AssumptionReport:
    checks: dict

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def __getitem__(self, key) -> AssumptionCheck:
        return self.checks[key]

    def lines(self) -> list[str]:
        out = []
        for c in self.checks.values():
            consts = ", ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}"
                               for k, v in c.constants.items())
            out.append(f"{c.name}: {'pass' if c.passed else 'FAIL'}"
                       + (f" [{consts}]" if consts else "")
                       + (f" {c.note}" if c.note else ""))
        return out


def _sample_points(samples: int) -> np.ndarray:
    half = samples // 2
    gap = np.geomspace(1e-12, 1.0, half)
    r = np.concatenate([-(1.0 - gap), 1.0 - gap[::-1]])
    return np.unique(np.concatenate([r, [0.0]]))


def _fit_slope(x, y):
    a = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    return float(coef[0]), float(coef[1])


def _sharp_constant(lnd, absb, gamma):
    """Smallest C with ``ln C + C |b|**gamma >= ln beta'`` at every sample."""
    need = np.empty_like(lnd)
    for k, (target, bb) in enumerate(zip(lnd, absb)):
        h = lambda c: math.log(c) + c * bb**gamma - target  # noqa: E731
        lo, hi = 1e-12, 1.0
        while h(hi) < 0:
            hi *= 2.0
            if hi > 1e12:
                return math.inf, need
        if h(lo) >= 0:
            need[k] = lo
            continue
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if h(mid) < 0:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-13 * hi:
                break
        need[k] = hi
    return float(need.max()), need


def validate_assumptions(p_bulk: Potential, p_surf: Potential, samples: int = 1000) -> AssumptionReport:
    """Numerically check the structural assumptions on a bulk/surface pair.

    Samples cluster geometrically toward +-1.  Constants are fitted, not
    proved: the report states what the samples support.
    """
    if samples < 100:
        raise ValueError("samples must be >= 100")
    for p in (p_bulk, p_surf):
        p._require_pointwise()
    r = _sample_points(samples)
    if p_bulk.singular or p_surf.singular:
        p_bulk.check_domain(r)
        p_surf.check_domain(r)
    checks = {}

    # (A1) monotone, normalised, singular at the ends, beta' bounded below
    a1_ok = True
    consts = {}
    notes = []
    for label, p in (("bulk", p_bulk), ("surf", p_surf)):
        b = p.beta(r)
        db = p.dbeta(r)
        mono = bool(np.all(np.diff(b) >= 0))
        varpi = float(db.min())
        normal = p.beta(0.0) == 0.0 and p.beta_hat(0.0) == 0.0
        blowup = bool(b[-1] > 10.0 * abs(b[len(b) // 2 + 1]) + 1.0 and b[0] < -10.0 * abs(b[len(b) // 2 - 1]) - 1.0)
        ok = mono and varpi > 0 and normal and p.singular and blowup
        if not ok:
            notes.append(f"{label}: monotone={mono} varpi={varpi:.3g} normalised={normal} singular={p.singular and blowup}")
        consts[f"varpi_{label}"] = varpi
        a1_ok &= ok
    checks["A1"] = AssumptionCheck("A1", a1_ok, consts, "; ".join(notes))

    # (A2) |beta| <= rho |beta_G| + c0, beta_G dominating
    b = np.abs(p_bulk.beta(r))
    bg = np.abs(p_surf.beta(r))

    def domination(num, den):
        tail = den > 1.0
        if not tail.any():
            return math.inf, 0.0, math.inf
        ratio = num[tail] / den[tail]
        rho = max(float(ratio.max()), 1e-300)
        c0 = max(0.0, float((num - rho * den).max()))
        slope, _ = _fit_slope(np.log(den[tail]), np.log(np.maximum(ratio, 1e-300)))
        return rho, c0, slope

    rho, c0, slope = domination(b, bg)
    rrho, rc0, rslope = domination(bg, b)
    a2_ok = math.isfinite(rho) and slope <= 1e-6
    checks["A2"] = AssumptionCheck(
        "A2", a2_ok,
        {"rho": rho, "c0": c0, "reverse_rho": rrho, "reverse_c0": rc0,
         "reverse_holds": bool(math.isfinite(rrho) and rslope <= 1e-6)},
    )

    # (A3) pi globally Lipschitz: difference quotients on nested grids agree
    a3_ok = True
    consts = {}
    for label, p in (("bulk", p_bulk), ("surf", p_surf)):
        lips = []
        for n in (201, 2001):
            x = np.linspace(-10.0, 10.0, n)
            lips.append(float(np.max(np.abs(np.diff(p.pi(x)) / np.diff(x)))))
        consts[f"gamma_{label}"] = lips[-1]
        a3_ok &= abs(lips[0] - lips[1]) <= 1e-9 * max(1.0, lips[1])
    checks["A3"] = AssumptionCheck("A3", a3_ok, consts)

    # (A5a) beta' <= C exp(C |beta|^gamma), gamma in [1, 2); bulk potential
    bb = np.abs(p_bulk.beta(r))
    with np.errstate(divide="ignore"):
        lnd = np.log(p_bulk.dbeta(r))
    tail = bb > 1.0
    a5a_ok = False
    consts = {}
    if tail.sum() >= 10:
        slope, _ = _fit_slope(bb[tail], lnd[tail])
        consts["exp_slope"] = slope
        for gamma in (1.0, 1.25, 1.5, 1.75):
            c_all, need = _sharp_constant(lnd, bb, gamma)
            if not math.isfinite(c_all):
                continue
            outer = np.argsort(bb)[-max(len(bb) // 10, 5):]
            inner_mask = np.ones(len(bb), dtype=bool)
            inner_mask[outer] = False
            c_inner = float(need[inner_mask].max())
            # stable constant: the outermost decile does not demand more
            if need[outer].max() <= 1.05 * c_inner + 1e-12:
                consts.update(C_sharp=c_all, gamma_sharp=gamma)
                a5a_ok = True
                break
    checks["A5a"] = AssumptionCheck("A5a", a5a_ok, consts)

    # (A5b) 1/beta(1 - 2 delta) = O(|ln delta|^-kappa) with kappa > 1/2
    delta = np.logspace(-2, -10, 9)
    kappas = []
    for side in (1.0, -1.0):
        vals = np.abs(p_bulk.beta(side * (1.0 - 2.0 * delta)))
        kappa, _ = _fit_slope(np.log(np.abs(np.log(delta))), np.log(vals))
        kappas.append(kappa)
    kappa = min(kappas)
    checks["A5b"] = AssumptionCheck("A5b", kappa > 0.5, {"kappa": kappa})
    return AssumptionReport(checks)
