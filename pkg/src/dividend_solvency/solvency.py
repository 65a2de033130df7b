"""Solvency-constrained barrier choice and the inverse risk problems.

The admissible barriers are those whose ruin probability over ``[0, T]``,
started at the barrier itself, is at most ``epsilon``.  Since that probability
decreases continuously in ``b``, either ``b0`` is admissible or there is a
unique larger barrier ``b*`` where the constraint binds.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError, NoBracket, NoConvergence, Unattainable
from .hjb import ControlFunction, HjbSolution, solve_hjb
from .model import ModelParams, validate
from .ruin import DEFAULT_NY, solve_survival_pde

TOL_EPS = 1e-4
MAX_ITER = 60
B_HI_CAP = 64.0
_GROWTH = 2.0


@lru_cache(maxsize=256)
def _solution(params: ModelParams, b: float | None) -> HjbSolution:
    return solve_hjb(params, b)


def epsilon_of_b(params: ModelParams, b: float, ny: int = DEFAULT_NY, nt: int | None = None) -> float:
    """Ruin probability over ``[0, T]`` of the barrier-``b`` policy started at ``b``."""
    return float(1.0 - _barrier_field(params, b, ny, nt).final[-1])


def solve_b_star(params: ModelParams, tol_eps: float = TOL_EPS, ny: int = DEFAULT_NY, nt: int | None = None,
                 max_iter: int = MAX_ITER, cap: float = B_HI_CAP) -> float:
    """Smallest barrier whose ruin probability (start at the barrier) equals ``epsilon``.

    The result satisfies ``epsilon - tol_eps <= psi(T, b*) <= epsilon``.

    Raises ``DomainError`` when ``b0`` already meets the constraint and
    ``NoBracket`` when no barrier up to ``cap * b0`` does.
    """
    validate(params)
    eps = params.epsilon
    b0 = _solution(params, None).b0

    def gap(b):
        return epsilon_of_b(params, b, ny, nt) - eps

    g0 = gap(b0)
    if g0 <= 0:
        raise DomainError(f"b0 already satisfies the constraint (ruin {g0 + eps:.6g} <= {eps!r})")
    lo, hi = b0, b0
    while True:
        hi = min(hi * _GROWTH, cap * b0)
        g_hi = gap(hi)
        if g_hi <= 0:
            break
        if hi >= cap * b0:
            raise NoBracket(f"ruin probability {g_hi + eps:.6g} still above {eps!r} at b = {cap!r} * b0 = {hi!r}")
        lo = hi
    # lo stays infeasible and hi feasible, so the returned barrier always meets the constraint.
    for _ in range(max_iter):
        if g_hi >= -tol_eps:
            return hi
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            return hi
        g_mid = gap(mid)
        if g_mid <= 0:
            hi, g_hi = mid, g_mid
        else:
            lo = mid
    if g_hi >= -tol_eps:
        return hi
    raise NoConvergence(f"barrier search exhausted {max_iter} iterations at b = {hi!r}", abs(g_hi))


def _barrier_field(params, b, ny, nt):
    sol = _solution(params, float(b))
    return solve_survival_pde(params, ControlFunction(sol), sol.b, params.T, ny, nt)


def _capital(field, eps, xtol):
    if not 0.0 < eps <= 1.0:
        raise DomainError(f"epsilon must lie in (0, 1], got {eps!r}")
    top = field.ruin(field.b)
    if top > eps:
        raise Unattainable(f"ruin probability {top:.6g} at full capital b = {field.b!r} exceeds {eps!r}")
    # psi(0) = 1 >= eps; keep lo infeasible and hi feasible.
    lo, hi = 0.0, field.b
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if field.ruin(mid) <= eps:
            hi = mid
        else:
            lo = mid
    return hi


def risk_capital(params: ModelParams, b: float, epsilon: float | None = None, ny: int = DEFAULT_NY,
                 nt: int | None = None, xtol: float | None = None) -> float:
    """Smallest initial reserve ``x`` with ruin probability at most ``epsilon`` under barrier ``b``.

    Works on a single survival field, so ``x`` is exact up to ``xtol`` for the
    piecewise-linear interpolant of that field.
    """
    eps = params.epsilon if epsilon is None else float(epsilon)
    field = _barrier_field(params, b, ny, nt)
    return _capital(field, eps, 1e-10 * field.b if xtol is None else xtol)


@dataclass(frozen=True)
class PolicyDecision:
    """Outcome of the solvency check.

    ``attained_ruin_prob`` is measured at the chosen barrier with the reserve
    starting there.
    """

    chosen_barrier: float
    constrained: bool
    attained_ruin_prob: float
    solution: HjbSolution

    @property
    def b0(self):
        return self.solution.b0

    @property
    def regime(self):
        return self.solution.regime

    def value_at(self, x):
        return self.solution.value(x)

    def control_at(self, x):
        return self.solution.control(x)


def decide_policy(params: ModelParams, tol_eps: float = TOL_EPS, ny: int = DEFAULT_NY,
                  nt: int | None = None) -> PolicyDecision:
    """Unconstrained optimum if it is solvent enough, else the binding constrained barrier."""
    validate(params)
    base = _solution(params, None)
    p0 = epsilon_of_b(params, base.b0, ny, nt)
    if p0 <= params.epsilon:
        return PolicyDecision(base.b0, False, p0, base)
    b_star = solve_b_star(params, tol_eps, ny, nt)
    sol = _solution(params, float(b_star))
    return PolicyDecision(b_star, True, epsilon_of_b(params, b_star, ny, nt), sol)


def barrier_curve(params: ModelParams, epsilons, tol_eps: float = TOL_EPS, ny: int = DEFAULT_NY,
                  nt: int | None = None) -> np.ndarray:
    """``b(epsilon)``: the decided barrier for each risk level (``b0`` where unconstrained)."""
    out = []
    for eps in epsilons:
        p = ModelParams(params.mu, params.lam, params.sigma, params.c, params.T, float(eps))
        out.append(decide_policy(p, tol_eps, ny, nt).chosen_barrier)
    return np.array(out)


def capital_curve(params: ModelParams, b: float, epsilons, ny: int = DEFAULT_NY, nt: int | None = None) -> np.ndarray:
    """``x(epsilon)`` at barrier ``b`` for each risk level, from one survival field."""
    field = _barrier_field(params, b, ny, nt)
    return np.array([_capital(field, float(e), 1e-10 * field.b) for e in epsilons])
