from dataclasses import replace

import numpy as np
import pytest

from dividend_solvency import (
    DomainError, NoBracket, Unattainable, compute_b0, decide_policy, epsilon0_lower_bound, epsilon_of_b,
    risk_capital, ruin_probability, solve_b_star, solve_hjb,
)
from dividend_solvency.solvency import TOL_EPS, barrier_curve, capital_curve

from conftest import fig1_params


def test_loose_constraint_keeps_b0(both_regimes):
    p = replace(both_regimes, epsilon=1 - 1e-9)
    d = decide_policy(p)
    assert not d.constrained
    assert d.chosen_barrier == d.b0 == compute_b0(p)
    assert d.attained_ruin_prob <= p.epsilon
    xs = np.linspace(0, 2 * d.b0, 20)
    np.testing.assert_array_equal(d.value_at(xs), solve_hjb(p).value(xs))


def test_short_horizon_is_unconstrained():
    p = fig1_params(T=5.0, epsilon=0.5)
    assert not decide_policy(p).constrained


def test_tight_constraint_binds(both_regimes):
    p = replace(both_regimes, epsilon=0.05)
    d = decide_policy(p)
    assert d.constrained
    assert d.chosen_barrier > d.b0
    assert p.epsilon - TOL_EPS <= d.attained_ruin_prob <= p.epsilon
    xs = np.linspace(0, 3 * d.chosen_barrier, 200)
    assert np.all(d.value_at(xs) <= solve_hjb(p).value(xs) * (1 + 1e-12))
    assert np.all(d.control_at(xs) <= 1.0)


def test_below_analytic_bound_forces_constraint(interior):
    b0 = compute_b0(interior)
    eps = 0.5 * epsilon0_lower_bound(interior, b0)
    psi_b0 = epsilon_of_b(interior, b0)
    assert psi_b0 > eps
    d = decide_policy(replace(interior, epsilon=eps))
    assert d.constrained and d.chosen_barrier > b0
    assert d.attained_ruin_prob <= eps


def test_b_star_round_trip_and_monotone(interior):
    bs = []
    for eps in (0.02, 0.1, 0.3):
        b = solve_b_star(replace(interior, epsilon=eps))
        assert abs(epsilon_of_b(interior, b) - eps) <= TOL_EPS
        bs.append(b)
    assert bs[0] > bs[1] > bs[2] > compute_b0(interior)


def test_b_star_not_needed(cheap):
    with pytest.raises(DomainError):
        solve_b_star(replace(cheap, epsilon=0.99))


def test_no_bracket_within_cap(cheap):
    with pytest.raises(NoBracket):
        solve_b_star(replace(cheap, epsilon=1e-4), cap=2.0)


def test_barrier_curve_decreasing(interior):
    b = barrier_curve(interior, [0.05, 0.2, 0.5, 0.999999])
    assert np.all(np.diff(b) <= 0)
    assert b[-1] == compute_b0(interior)


def test_risk_capital_contract(interior):
    b = 2 * compute_b0(interior)
    cf = solve_hjb(interior, b).control_function()
    for eps in (0.3, 0.5, 0.8):
        x = risk_capital(interior, b, eps)
        assert ruin_probability(interior, cf, b, None, x) <= eps + 1e-12
        assert ruin_probability(interior, cf, b, None, max(x - 1e-6 * b, 0)) > eps - 1e-9


def test_capital_curve_decreasing_to_zero(interior):
    b = 2 * compute_b0(interior)
    xs = capital_curve(interior, b, [0.2, 0.4, 0.6, 0.9, 0.999, 1.0])
    assert np.all(np.diff(xs) < 0)
    assert xs[-1] <= 1e-8 * b
    assert xs[-2] < 0.05 * b


def test_risk_capital_unattainable(interior):
    b0 = compute_b0(interior)
    with pytest.raises(Unattainable):
        risk_capital(interior, b0, 0.1)
    with pytest.raises(DomainError):
        risk_capital(interior, b0, 0.0)
