"""Finite-horizon ruin probabilities from the survival PDE.

The survival probability ``phi(t, y)`` of the barrier-``b`` policy solves

    phi_t = a(y) phi_yy + drift(y) phi_y,   0 < y < b,
    phi(0, y) = 1 (y > 0),  phi(t, 0) = 0,  phi_y(t, b) = 0,

with ``a = (A*(y) sigma)^2 / 2`` and ``drift = lambda A*(y) - (lambda - mu)``.
The ruin probability over ``[0, T]`` is ``1 - phi(T, y)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special
from scipy.linalg import lapack

from .errors import DomainError, GridError, InstabilityError
from .hjb import ControlFunction, compute_b0, solve_hjb
from .model import ModelParams, Regime, validate

DEFAULT_NY = 400
# Values outside [-TOL_CLIP, 1 + TOL_CLIP] indicate an unresolved grid, not round-off.
TOL_CLIP = 1e-8
_RANNACHER_STEPS = 2
_MAX_SAVED_ROWS = 201


@dataclass(frozen=True)
class SurvivalField:
    """Survival probabilities on ``[0, T] x [0, b]``.

    ``values[i, j]`` approximates ``phi(times[i], y[j])``; only a subsample of
    time levels is kept (always including 0 and T).
    """

    b: float
    T: float
    y: np.ndarray
    times: np.ndarray
    values: np.ndarray
    nt: int

    @property
    def ny(self):
        return self.y.size

    @property
    def final(self):
        return self.values[-1]

    def survival(self, x):
        x = np.asarray(x, dtype=float)
        tol = 1e-12 * max(1.0, self.b)
        if np.any(x < -tol) or np.any(x > self.b + tol):
            raise DomainError(f"x must lie in [0, b] = [0, {self.b!r}]")
        out = np.interp(np.clip(x, 0.0, self.b), self.y, self.final)
        return out if out.ndim else float(out)

    def ruin(self, x):
        return 1.0 - np.asarray(self.survival(x)) if np.ndim(x) else 1.0 - self.survival(x)


def spatial_grid(b: float, ny: int, m: float | None = None) -> np.ndarray:
    """``ny`` nodes on ``[0, b]``, uniform on each side of ``m`` with a node exactly at ``m``."""
    if ny < 3:
        raise GridError(f"need at least 3 spatial nodes, got {ny}")
    if not (b > 0 and math.isfinite(b)):
        raise GridError(f"barrier must be positive and finite, got {b!r}")
    n = ny - 1
    if m is None or not 0.0 < m < b:
        return np.linspace(0.0, b, ny)
    n_low = min(max(1, round(n * m / b)), n - 1)
    low = np.linspace(0.0, m, n_low + 1)
    high = np.linspace(m, b, n - n_low + 1)
    return np.concatenate([low, high[1:]])


def _operator(y, a, drift):
    """Tridiagonal discretisation of a phi'' + drift phi' on nodes 1..N (Dirichlet at 0, Neumann at N)."""
    h = np.diff(y)
    hm, hp = h[:-1], h[1:]
    a_in, dr_in = a[1:-1], drift[1:-1]
    s = hm + hp
    lower = 2.0 * a_in / (hm * s) - dr_in * hp / (hm * s)
    upper = 2.0 * a_in / (hp * s) + dr_in * hm / (hp * s)
    # Where central differencing of the drift breaks positivity, fall back to upwinding.
    bad = (lower < 0) | (upper < 0)
    if np.any(bad):
        up = np.where(dr_in > 0, dr_in / hp, 0.0)
        down = np.where(dr_in < 0, -dr_in / hm, 0.0)
        lower = np.where(bad, 2.0 * a_in / (hm * s) + down, lower)
        upper = np.where(bad, 2.0 * a_in / (hp * s) + up, upper)
    hN = h[-1]
    lower = np.append(lower, 2.0 * a[-1] / hN ** 2)
    upper = np.append(upper, 0.0)
    diag = -(lower + upper)
    # Node 1's lower neighbour is the Dirichlet node; it drops out of the system.
    return lower[1:], diag, upper[:-1]


class _Stepper:
    """Solves (I - theta dt L) x = (I + (1 - theta) dt L) v with a factorised tridiagonal."""

    def __init__(self, lower, diag, upper, dt, theta):
        self.lower, self.diag, self.upper = lower, diag, upper
        self.ex = (1.0 - theta) * dt
        dl, d, du, du2, ipiv, info = lapack.dgttrf(-theta * dt * lower, 1.0 - theta * dt * diag, -theta * dt * upper)
        if info != 0:
            raise GridError(f"tridiagonal factorisation failed (info={info})")
        self.factors = (dl, d, du, du2, ipiv)

    def __call__(self, v):
        rhs = v + self.ex * (self.diag * v)
        if self.ex:
            rhs[1:] += self.ex * self.lower * v[:-1]
            rhs[:-1] += self.ex * self.upper * v[1:]
        out, info = lapack.dgttrs(*self.factors, rhs)
        return out


def _auto_nt(T, diag, ny):
    # Below this count the explicit half has nonnegative weights and 0 <= phi <= 1 is
    # guaranteed; the damped start keeps coarser steps accurate, so cap at 10 * ny.
    dt_pos = 2.0 / np.max(np.abs(diag))
    return max(3, min(math.ceil(T / dt_pos), 10 * ny))


def solve_survival_pde(params: ModelParams, control: ControlFunction, b: float, T: float | None = None,
                       ny: int = DEFAULT_NY, nt: int | None = None) -> SurvivalField:
    """Crank-Nicolson solution of the survival equation for the barrier-``b`` policy."""
    validate(params)
    T = params.T if T is None else float(T)
    if not (T > 0 and math.isfinite(T)):
        raise GridError(f"horizon must be positive, got {T!r}")
    if nt is not None and nt < 3:
        raise GridError(f"need at least 3 time steps, got {nt}")
    sol = control.sol
    if b < sol.b0 * (1 - 1e-12):
        raise DomainError(f"barrier {b!r} below b0 = {sol.b0!r}")
    m = sol.m if sol.regime is Regime.INTERIOR else None
    y = spatial_grid(b, ny, m)
    A = np.asarray(control(y), dtype=float)
    a = 0.5 * (A * params.sigma) ** 2
    drift = params.lam * A - params.delta
    lower, diag, upper = _operator(y, a, drift)
    if nt is None:
        nt = _auto_nt(T, diag, ny)
    dt = T / nt

    implicit = _Stepper(lower, diag, upper, 0.5 * dt, 1.0)
    cn = _Stepper(lower, diag, upper, dt, 0.5)

    v = np.ones(ny - 1)
    save_every = max(1, -(-nt // (_MAX_SAVED_ROWS - 1)))
    times, rows = [0.0], [np.concatenate([[1.0], v])]
    for n in range(1, nt + 1):
        if n <= _RANNACHER_STEPS:
            v = implicit(implicit(v))
        else:
            v = cn(v)
        lo, hi = v.min(), v.max()
        if lo < -TOL_CLIP or hi > 1.0 + TOL_CLIP:
            raise InstabilityError(
                f"survival probability left [0, 1] at step {n} (range [{lo:.3e}, {hi:.3e}]); refine the grid"
            )
        if n % save_every == 0 or n == nt:
            times.append(n * dt)
            rows.append(np.concatenate([[0.0], v]))
    values = np.clip(np.array(rows), 0.0, 1.0)
    return SurvivalField(b=float(b), T=T, y=y, times=np.array(times), values=values, nt=nt)


def ruin_probability(params: ModelParams, control: ControlFunction, b: float, T: float | None, x,
                     ny: int = DEFAULT_NY, nt: int | None = None):
    """psi^b(T, x) = 1 - phi^b(T, x), linear in x between grid nodes."""
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr < 0) or np.any(x_arr > b * (1 + 1e-12)):
        raise DomainError(f"x must lie in [0, b] = [0, {b!r}]")
    return solve_survival_pde(params, control, b, T, ny, nt).ruin(x)


def u_of_b(params: ModelParams, T: float | None, b: float, ny: int = DEFAULT_NY, nt: int | None = None) -> float:
    """Survival probability over ``[0, T]`` starting at the barrier, as a function of the barrier."""
    sol = solve_hjb(params, b)
    field = solve_survival_pde(params, ControlFunction(sol), b, T, ny, nt)
    return float(field.final[-1])


def ruin_at_barrier(params: ModelParams, b: float, T: float | None = None, ny: int = DEFAULT_NY,
                    nt: int | None = None) -> float:
    return 1.0 - u_of_b(params, T, b, ny, nt)


def ruin_curve(params: ModelParams, barriers, T: float | None = None, ny: int = DEFAULT_NY, nt: int | None = None):
    """Samples of ``b -> psi^b(T, b)``."""
    return np.array([ruin_at_barrier(params, float(b), T, ny, nt) for b in barriers])


def hitting_probability(mu: float, sigma: float, x: float, T: float) -> float:
    """P[mu t + sigma W_t reaches -x by T], by quadrature of the first-passage density.

    Uses t = s^2 so that the t^(-3/2) factor becomes s^(-2) and is damped by
    the exponential near s = 0.
    """
    if x <= 0:
        raise DomainError("hitting level must be positive")

    def integrand(s):
        t = s * s
        return 2.0 / t * math.exp(-(x + mu * t) ** 2 / (2.0 * sigma ** 2 * t)) if s > 0 else 0.0

    total, _ = integrate.quad(integrand, 0.0, math.sqrt(T), epsabs=1e-13, epsrel=1e-11, limit=400)
    return x / (math.sqrt(2.0 * math.pi) * sigma) * total


def epsilon0_lower_bound(params: ModelParams, x: float, T: float | None = None) -> float:
    """Analytic lower bound on the ruin probability of the unconstrained policy started at ``x``."""
    validate(params)
    T = params.T if T is None else T
    b0 = compute_b0(params)
    if not 0.0 < x <= b0 * (1 + 1e-12):
        raise DomainError(f"bound holds for 0 < x <= b0 = {b0!r}")
    d = params.d_min
    sigma = params.sigma
    tail = special.ndtr(-x / (d * sigma * math.sqrt(T)))
    log_girsanov = math.log(4.0) + 2.0 * math.log(tail) - 2.0 / params.sigma2 * (params.lam ** 2 + params.delta ** 2) * T
    girsanov = math.exp(log_girsanov) if tail > 0 else 0.0
    return min(girsanov, hitting_probability(params.mu, sigma, x, T))

