"""Closed-form solutions of the dividend/reinsurance HJB equation.

Two regimes are covered:

* ``CHEAP_HEAVY`` (lambda >= 2 mu): retention is 1 everywhere and the value
  below the barrier ``b`` is ``C0 (exp(zeta1 x) - exp(zeta2 x))``.
* ``INTERIOR`` (mu < lambda < 2 mu): below the switching level ``m`` the
  value is parametrised by its slope ``z = v'(x)`` through ``x = X(z)``, and
  the optimal retention is ``-(lambda/sigma^2) z X'(z)``.  Between ``m`` and
  ``b`` retention is 1 and the value is a combination of the two exponentials.

In both regimes the value continues linearly with slope 1 above ``b``.

``X`` depends on the barrier only through a rescaling ``z -> z / z1(b)``, so
the switching level ``m`` and the retention function are the same for every
barrier; only the slope level ``z1`` moves.  The interior code evaluates
everything in the scaled variable ``w = z / z1`` which keeps the numbers O(1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import integrate

from .errors import DomainError, NoConvergence
from .model import ModelParams, Regime, classify, validate
from .roots import bisect_decreasing

# b >= b0 is checked with this relative slack so that b = b0 computed twice passes.
_BARRIER_SLACK = 1e-12


def compute_zetas(params: ModelParams) -> tuple[float, float]:
    """Roots of 0.5 sigma^2 z^2 + mu z - c = 0, positive root first."""
    s2 = params.sigma2
    root = math.sqrt(params.mu * params.mu + 2.0 * s2 * params.c)
    zeta1 = (-params.mu + root) / s2
    # Product of roots is -2c/sigma^2; avoids cancellation in zeta1 when mu >> sigma.
    if params.mu > 0:
        zeta1 = 2.0 * params.c / (params.mu + root)
    zeta2 = (-params.mu - root) / s2
    return zeta1, zeta2


def exponential_smooth_fit_barrier(params: ModelParams) -> float:
    """Zero of d^2/dx^2 (exp(zeta1 x) - exp(zeta2 x)): 2 ln|zeta2/zeta1| / (zeta1 - zeta2)."""
    zeta1, zeta2 = compute_zetas(params)
    return 2.0 * math.log(abs(zeta2 / zeta1)) / (zeta1 - zeta2)


class _Shape(NamedTuple):
    """Barrier-independent constants of the interior regime."""

    p: float  # 1 + c/alpha, exponent of z in X
    amp: float  # C3 * z1^(-p)
    k: float  # (lambda - mu)/(alpha + c), coefficient of ln z in X
    m: float  # switching level X(z1)
    w0: float  # z0 / z1 where X(z0) = 0


def _interior_shape(params: ModelParams) -> _Shape:
    alpha, c, delta, lam, mu = params.alpha, params.c, params.delta, params.lam, params.mu
    ac = alpha + c
    p = 1.0 + c / alpha
    amp = lam * (c + alpha * (2.0 * mu / lam - 1.0)) / (2.0 * ac * ac)
    k = delta / ac
    # X(z1) with C3, C4 substituted; the ln z1 terms cancel.
    m = amp - delta * c / (ac * ac) + delta * alpha / (ac * ac) * math.log(amp * ac * ac / (delta * c))
    w0 = (amp * ac * ac / (delta * c)) ** (1.0 / p)
    return _Shape(p, amp, k, m, w0)


def switching_level(params: ModelParams) -> float:
    """Reserve level ``m`` below which partial reinsurance is optimal (interior regime)."""
    validate(params)
    if classify(params) is not Regime.INTERIOR:
        raise DomainError("the switching level only exists when mu < lambda < 2 mu")
    return _interior_shape(params).m


def _interior_smooth_fit_gap(params: ModelParams) -> float:
    """Barrier minus switching level at which v''(b-) = 0 with full retention above m."""
    zeta1, zeta2 = compute_zetas(params)
    k = params.lam / params.sigma2
    return math.log((zeta1 + k) * (-zeta2) / ((-zeta2 - k) * zeta1)) / (zeta1 - zeta2)


def compute_b0(params: ModelParams) -> float:
    """Unconstrained optimal dividend barrier (the smooth-fit point v''(b0) = 0).

    In the cheap/heavy regime this is ``2 ln|zeta2/zeta1| / (zeta1 - zeta2)``.
    In the interior regime the barrier sits a fixed gap above the switching level.
    """
    validate(params)
    if classify(params) is Regime.CHEAP_HEAVY:
        return exponential_smooth_fit_barrier(params)
    return _interior_shape(params).m + _interior_smooth_fit_gap(params)


@dataclass(frozen=True)
class HjbSolution:
    """Coefficients of the value function for one barrier ``b``.

    Interior-only fields (``z1``, ``C1``..``C4``, ``m``, ``Delta``) are ``None``
    in the cheap/heavy regime, and ``C0`` is ``None`` in the interior regime.
    """

    params: ModelParams
    regime: Regime
    b: float
    b0: float
    zeta1: float
    zeta2: float
    alpha: float
    C0: float | None = None
    z1: float | None = None
    C1: float | None = None
    C2: float | None = None
    C3: float | None = None
    C4: float | None = None
    m: float | None = None
    Delta: float | None = None
    shape: _Shape | None = None

    @property
    def is_unconstrained(self):
        return abs(self.b - self.b0) <= _BARRIER_SLACK * max(1.0, self.b0)

    def value(self, x):
        return value_g(self, x)

    def control(self, x):
        return control_A(self, x)

    def control_function(self):
        return ControlFunction(self)


def _check_barrier(params, b, b0):
    if not math.isfinite(b) or b < b0 * (1.0 - _BARRIER_SLACK):
        raise DomainError(f"barrier must satisfy b >= b0 = {b0!r}, got {b!r}")


def solve_cheap_heavy(params: ModelParams, b: float | None = None) -> HjbSolution:
    validate(params)
    if classify(params) is not Regime.CHEAP_HEAVY:
        raise DomainError("cheap/heavy solution requires lambda >= 2 mu")
    zeta1, zeta2 = compute_zetas(params)
    b0 = exponential_smooth_fit_barrier(params)
    b = b0 if b is None else float(b)
    _check_barrier(params, b, b0)
    C0 = 1.0 / (zeta1 * math.exp(zeta1 * b) - zeta2 * math.exp(zeta2 * b))
    return HjbSolution(params, Regime.CHEAP_HEAVY, b, b0, zeta1, zeta2, params.alpha, C0=C0)


def solve_interior_coefficients(params: ModelParams, b: float | None = None) -> HjbSolution:
    """Jointly determine ``z1``, ``m``, ``Delta = b - m`` and ``C1``..``C4`` at barrier ``b``.

    The apparent circularity (``z1`` depends on ``b - m``, ``m = X(z1)``) is
    resolved exactly because ``X(z1)`` does not depend on ``z1``; the defining
    residual ``|m - X(z1)|`` is still checked.
    """
    validate(params)
    if classify(params) is not Regime.INTERIOR:
        raise DomainError("interior solution requires mu < lambda < 2 mu")
    zeta1, zeta2 = compute_zetas(params)
    shape = _interior_shape(params)
    b0 = shape.m + _interior_smooth_fit_gap(params)
    b = b0 if b is None else float(b)
    _check_barrier(params, b, b0)

    alpha, c, lam, s2 = params.alpha, params.c, params.lam, params.sigma2
    k = lam / s2
    m = shape.m
    if not 0.0 < m < b:
        raise NoConvergence(f"switching level m={m!r} outside (0, b={b!r})")
    Delta = b - m
    z1 = (zeta1 - zeta2) / ((-zeta2 - k) * math.exp(zeta1 * Delta) + (zeta1 + k) * math.exp(zeta2 * Delta))
    C1 = z1 * (-zeta2 - k) / (zeta1 - zeta2)
    C2 = z1 * (zeta1 + k) / (zeta1 - zeta2)
    C3 = z1 ** shape.p * lam * (c + alpha * (2.0 * params.mu / lam - 1.0)) / (2.0 * (alpha + c) ** 2)
    ac2 = (alpha + c) ** 2
    delta = params.delta
    C4 = -delta * c / ac2 + delta * alpha / ac2 * math.log(C3) + delta * alpha / ac2 * math.log(ac2 / (delta * c))

    sol = HjbSolution(
        params, Regime.INTERIOR, b, b0, zeta1, zeta2, alpha,
        z1=z1, C1=C1, C2=C2, C3=C3, C4=C4, m=m, Delta=Delta, shape=shape,
    )
    residual = abs(m - X_of_z(sol, z1))
    if residual > 1e-9 * max(1.0, m):
        raise NoConvergence("switching level does not reproduce X(z1)", residual)
    return sol


def solve_hjb(params: ModelParams, b: float | None = None) -> HjbSolution:
    """HJB solution at barrier ``b`` (default: the unconstrained optimum ``b0``)."""
    validate(params)
    if classify(params) is Regime.CHEAP_HEAVY:
        return solve_cheap_heavy(params, b)
    return solve_interior_coefficients(params, b)


def _require_interior(sol):
    if sol.regime is not Regime.INTERIOR:
        raise DomainError("X(z) is only defined in the interior regime")


def X_of_z(sol: HjbSolution, z):
    """Reserve level at which the value function has slope ``z``."""
    _require_interior(sol)
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0):
        raise DomainError("X(z) requires z > 0")
    k = sol.params.delta / (sol.alpha + sol.params.c)
    out = sol.C3 * z ** (-sol.shape.p) + sol.C4 - k * np.log(z)
    return out if out.ndim else float(out)


def X_prime(sol: HjbSolution, z):
    _require_interior(sol)
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0):
        raise DomainError("X'(z) requires z > 0")
    s = sol.shape
    out = -s.p * sol.C3 * z ** (-s.p - 1.0) - s.k / z
    return out if out.ndim else float(out)


def _h(shape, w):
    """X(z1 * w); strictly decreasing in w, h(1) = m, h(w0) = 0."""
    return shape.m + shape.amp * np.expm1(-shape.p * np.log(w)) - shape.k * np.log(w)


def _h_prime(shape, w):
    return -shape.p * shape.amp * w ** (-shape.p - 1.0) - shape.k / w


def _scaled_inverse(shape, y):
    """w with h(w) = y for y in [0, m], by bisection plus one Newton polish."""
    y = np.asarray(y, dtype=float)
    hi = 2.0
    while _h(shape, hi) > 0.0:
        hi *= 2.0
    w = bisect_decreasing(lambda v: _h(shape, v), y, 1.0, hi)
    w = w - (_h(shape, w) - y) / _h_prime(shape, w)
    return np.clip(w, 1.0, None)


def X_inverse(sol: HjbSolution, y):
    """The unique ``z >= z1`` with ``X(z) = y``, for ``0 <= y <= m``."""
    _require_interior(sol)
    y = np.asarray(y, dtype=float)
    tol = 1e-12 * max(1.0, sol.m)
    if np.any(y < -tol) or np.any(y > sol.m + tol):
        raise DomainError(f"X^-1 is only consulted on [0, m] = [0, {sol.m!r}]")
    out = sol.z1 * _scaled_inverse(sol.shape, np.clip(y, 0.0, sol.m))
    return out if out.ndim else float(out)


def _as_nonneg(x):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(np.isnan(x)):
        raise DomainError("value function is defined for x >= 0 only")
    return x


def _interior_below_m(sol, x):
    s = sol.shape
    w = _scaled_inverse(s, x)
    c = sol.params.c
    return sol.z1 * ((sol.alpha + c) * s.amp * w ** (-c / sol.alpha) / c - s.k * w)


def _exp_part(sol, x):
    u = x - sol.m
    return sol.C1 / sol.zeta1 * np.exp(sol.zeta1 * u) + sol.C2 / sol.zeta2 * np.exp(sol.zeta2 * u)


def value_g(sol: HjbSolution, x):
    """Value of the barrier-``b`` policy with optimal retention, started at ``x``."""
    x = _as_nonneg(x)
    b = sol.b
    if sol.regime is Regime.CHEAP_HEAVY:
        xb = np.minimum(x, b)
        below = sol.C0 * (np.expm1(sol.zeta1 * xb) - np.expm1(sol.zeta2 * xb))
        out = below + np.maximum(x - b, 0.0)
    else:
        top = float(_exp_part(sol, b))
        out = np.where(x >= b, top + (x - b), _exp_part(sol, np.clip(x, sol.m, b)))
        low = x < sol.m
        if np.any(low):
            out = np.array(out, dtype=float)
            out[low] = _interior_below_m(sol, x[low])
    return out if np.ndim(out) else float(out)


def value_f(sol: HjbSolution, x):
    """Unconstrained optimal value; ``sol`` must be built at ``b = b0``."""
    if not sol.is_unconstrained:
        raise DomainError(f"value_f needs the solution at b0={sol.b0!r}, got b={sol.b!r}")
    return value_g(sol, x)


def value_slope(sol: HjbSolution, x):
    """Analytic first and second derivatives of ``value_g`` (left limits at ``b``)."""
    x = _as_nonneg(x)
    b = sol.b
    if sol.regime is Regime.CHEAP_HEAVY:
        xb = np.minimum(x, b)
        d1 = sol.C0 * (sol.zeta1 * np.exp(sol.zeta1 * xb) - sol.zeta2 * np.exp(sol.zeta2 * xb))
        d2 = sol.C0 * (sol.zeta1 ** 2 * np.exp(sol.zeta1 * xb) - sol.zeta2 ** 2 * np.exp(sol.zeta2 * xb))
    else:
        u = np.clip(x, sol.m, b) - sol.m
        d1 = sol.C1 * np.exp(sol.zeta1 * u) + sol.C2 * np.exp(sol.zeta2 * u)
        d2 = sol.C1 * sol.zeta1 * np.exp(sol.zeta1 * u) + sol.C2 * sol.zeta2 * np.exp(sol.zeta2 * u)
        low = x < sol.m
        if np.any(low):
            d1 = np.array(d1, dtype=float)
            d2 = np.array(d2, dtype=float)
            w = _scaled_inverse(sol.shape, x[low])
            d1[low] = sol.z1 * w
            d2[low] = sol.z1 / _h_prime(sol.shape, w)
    above = x > b
    d1 = np.where(above, 1.0, d1)
    d2 = np.where(above, 0.0, d2)
    if np.ndim(x) == 0:
        return float(d1), float(d2)
    return d1, d2


def integrate_inverse(sol: HjbSolution, x: float) -> float:
    """Quadrature of X^-1 over [0, x] for x <= m; an independent route to the value."""
    _require_interior(sol)
    if not 0.0 <= x <= sol.m:
        raise DomainError("quadrature route only covers [0, m]")
    result, _ = integrate.quad(lambda y: X_inverse(sol, y), 0.0, x, epsabs=1e-12, epsrel=1e-13, limit=200)
    return result


def control_A(sol: HjbSolution, x):
    """Optimal retention ratio A*(x) in [d, 1]."""
    x = _as_nonneg(x)
    if sol.regime is Regime.CHEAP_HEAVY:
        out = np.ones_like(x)
    else:
        out = np.ones_like(x)
        low = x < sol.m
        if np.any(low):
            s = sol.shape
            w = _scaled_inverse(s, x[low])
            out[low] = sol.params.lam / sol.params.sigma2 * (s.p * s.amp * w ** (-s.p) + s.k)
        np.minimum(out, 1.0, out=out)
    return out if out.ndim else float(out)


class ControlFunction:
    """Feedback retention ``x -> A*(x)`` bound to one solution.

    Calling it evaluates the exact formula.  :meth:`fast` returns a tabulated
    version for inner simulation loops: nodes are placed by sampling the slope
    variable, so every node value is exact and only the linear interpolation
    between nodes is approximate.
    """

    def __init__(self, sol: HjbSolution, n_table: int = 4097):
        self.sol = sol
        self.n_table = n_table
        self._table = None

    def __call__(self, x):
        return control_A(self.sol, x)

    @property
    def constant(self):
        return self.sol.regime is Regime.CHEAP_HEAVY

    def _build_table(self):
        s = self.sol.shape
        # Uniform in x would need an inversion per node; sample w instead, densest near x = 0.
        w = np.geomspace(s.w0, 1.0, self.n_table)
        xs = _h(s, w)
        xs[0], xs[-1] = 0.0, s.m
        a = self.sol.params.lam / self.sol.params.sigma2 * (s.p * s.amp * w ** (-s.p) + s.k)
        a[-1] = 1.0
        return np.maximum.accumulate(xs), np.minimum(a, 1.0)

    def fast(self, x):
        x = np.asarray(x, dtype=float)
        if self.constant:
            return np.ones_like(x)
        if self._table is None:
            self._table = self._build_table()
        xs, a = self._table
        return np.interp(x, xs, a, left=a[0], right=1.0)


class HjbResidual(NamedTuple):
    at_control: float
    max_over_actions: float


def hjb_residual(sol: HjbSolution, x: float, h: float | None = None, actions=None) -> HjbResidual:
    """Evaluate 0.5 sigma^2 a^2 v'' + (mu - (1-a) lambda) v' - c v by central differences.

    ``at_control`` uses a = A*(x); ``max_over_actions`` maximises over ``actions``
    (default 101 points of [0, 1]) together with A*(x).
    """
    p = sol.params
    if h is None:
        h = 1e-4 * max(1.0, sol.b)
    if x - h < 0:
        raise DomainError("residual needs x >= h for central differences")
    vm, v0, vp = (float(value_g(sol, t)) for t in (x - h, x, x + h))
    d1 = (vp - vm) / (2.0 * h)
    d2 = (vp - 2.0 * v0 + vm) / (h * h)
    a_star = float(control_A(sol, x))
    grid = np.linspace(0.0, 1.0, 101) if actions is None else np.asarray(actions, dtype=float)
    grid = np.append(grid, a_star)
    lhs = 0.5 * p.sigma2 * grid ** 2 * d2 + (p.mu - (1.0 - grid) * p.lam) * d1 - p.c * v0
    return HjbResidual(float(lhs[-1]), float(lhs.max()))
