import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dividend_solvency import DomainError, ModelParams, Regime, compute_b0, compute_zetas, hjb_residual, solve_hjb
from dividend_solvency.hjb import (
    ControlFunction, X_inverse, X_of_z, integrate_inverse, switching_level, value_f, value_slope,
)
from dividend_solvency.roots import bisect

from conftest import fig1_params


def test_zetas_fig1():
    z1, z2 = compute_zetas(fig1_params())
    assert abs(z1 - 0.02) <= 1e-12
    assert abs(z2 + 0.10) <= 1e-12


def test_cheap_heavy_b0_matches_bisection_oracle(cheap):
    z1, z2 = compute_zetas(cheap)
    # Smooth fit: zeta1^2 e^{zeta1 b} = zeta2^2 e^{zeta2 b}, solved independently.
    b, _ = bisect(lambda b: z1 ** 2 * math.exp(z1 * b) - z2 ** 2 * math.exp(z2 * b), 1e-6, 1e3, xtol=1e-13)
    assert compute_b0(cheap) == pytest.approx(b, rel=1e-12)
    assert compute_b0(cheap) == pytest.approx(26.824, abs=5e-4)


def test_interior_b0_is_smooth_fit_point(interior):
    sol = solve_hjb(interior)
    _, d2 = value_slope(sol, sol.b0 * (1 - 1e-12))
    assert abs(d2) <= 1e-12
    assert sol.m == pytest.approx(7.591438, abs=1e-6)
    assert sol.b0 == pytest.approx(26.779647, abs=1e-6)


def test_smooth_fit_value_at_barrier_is_mu_over_c(both_regimes):
    sol = solve_hjb(both_regimes)
    p = both_regimes
    assert sol.value(sol.b0) == pytest.approx(p.mu / p.c, rel=1e-10)
    d1, _ = value_slope(sol, sol.b0)
    assert d1 == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("factor", [1.0, 2.0])
def test_hjb_residual(both_regimes, factor):
    sol = solve_hjb(both_regimes, factor * compute_b0(both_regimes))
    xs = np.linspace(0.02 * sol.b, 0.98 * sol.b, 50)
    for x in xs:
        r = hjb_residual(sol, x)
        assert abs(r.at_control) <= 1e-6
        assert r.max_over_actions <= 1e-6


def test_above_barrier_generator_is_negative(both_regimes):
    sol = solve_hjb(both_regimes)
    for x in np.linspace(1.05, 3.0, 10) * sol.b:
        assert hjb_residual(sol, x).max_over_actions < 0


def test_control_bounds_and_monotone(both_regimes):
    sol = solve_hjb(both_regimes)
    xs = np.linspace(0.0, 1.5 * sol.b, 1000)
    a = sol.control(xs)
    assert np.all(a >= both_regimes.d_min - 1e-12)
    assert np.all(a <= 1.0)
    assert np.all(np.diff(a) >= -1e-12)


def test_interior_control_reaches_d_at_zero_and_one_at_m(interior):
    sol = solve_hjb(interior)
    assert sol.control(0.0) == pytest.approx(interior.d_min, rel=1e-9)
    assert sol.control(sol.m) == 1.0
    assert sol.control(0.5 * sol.m) < 1.0


def test_control_does_not_depend_on_barrier(interior):
    xs = np.linspace(0, 20, 41)
    a0 = solve_hjb(interior).control(xs)
    a1 = solve_hjb(interior, 3 * compute_b0(interior)).control(xs)
    np.testing.assert_allclose(a0, a1, rtol=0, atol=1e-14)


def test_switching_level_independent_of_barrier(interior):
    b0 = compute_b0(interior)
    ms = [solve_hjb(interior, f * b0).m for f in (1.0, 1.7, 4.0)]
    assert max(ms) - min(ms) == 0.0
    assert switching_level(interior) == ms[0]
    with pytest.raises(DomainError):
        switching_level(fig1_params(lam=6.0))


@pytest.mark.parametrize("factor", [1.0, 2.5])
def test_closed_form_below_m_matches_quadrature(interior, factor):
    sol = solve_hjb(interior, factor * compute_b0(interior))
    for x in np.linspace(0.0, sol.m, 7)[1:]:
        assert sol.value(x) == pytest.approx(integrate_inverse(sol, x), rel=1e-10, abs=1e-12)


def test_x_inverse_round_trip(interior):
    sol = solve_hjb(interior)
    ys = np.linspace(0.0, sol.m, 101)
    np.testing.assert_allclose(X_of_z(sol, X_inverse(sol, ys)), ys, atol=1e-11)
    assert X_inverse(sol, sol.m) == pytest.approx(sol.z1, rel=1e-12)
    with pytest.raises(DomainError):
        X_inverse(sol, sol.m * 1.01)


def test_value_continuous_at_switch_and_barrier(interior):
    sol = solve_hjb(interior, 2 * compute_b0(interior))
    for point in (sol.m, sol.b):
        lo, hi = sol.value(point * (1 - 1e-10)), sol.value(point * (1 + 1e-10))
        assert lo == pytest.approx(hi, rel=1e-8)
        d_lo, _ = value_slope(sol, point * (1 - 1e-9))
        d_hi, _ = value_slope(sol, point * (1 + 1e-9))
        assert d_lo == pytest.approx(d_hi, rel=1e-6)


def test_value_increasing_concave_and_zero_at_zero(both_regimes):
    sol = solve_hjb(both_regimes)
    xs = np.linspace(0, 2 * sol.b, 400)
    v = sol.value(xs)
    assert v[0] == 0.0
    assert np.all(np.diff(v) > 0)
    d1, d2 = value_slope(sol, xs[1:])
    assert np.all(d2 <= 1e-12)


@pytest.mark.parametrize("factor", [1.1, 2.0, 4.0])
def test_barrier_value_below_optimum(both_regimes, factor):
    f_sol = solve_hjb(both_regimes)
    g_sol = solve_hjb(both_regimes, factor * f_sol.b0)
    xs = np.linspace(0, 5 * f_sol.b0, 300)
    assert np.all(g_sol.value(xs) <= value_f(f_sol, xs) * (1 + 1e-12))


def test_value_f_requires_b0(cheap):
    with pytest.raises(DomainError):
        value_f(solve_hjb(cheap, 2 * compute_b0(cheap)), 1.0)


def test_barrier_below_b0_rejected(both_regimes):
    with pytest.raises(DomainError):
        solve_hjb(both_regimes, 0.5 * compute_b0(both_regimes))


def test_negative_reserve_rejected(cheap):
    with pytest.raises(DomainError):
        solve_hjb(cheap).value(-1.0)


def test_fast_control_table_accuracy(interior):
    sol = solve_hjb(interior)
    cf = ControlFunction(sol)
    xs = np.linspace(0, 1.2 * sol.m, 5001)
    assert np.max(np.abs(cf.fast(xs) - cf(xs))) <= 1e-8
    assert not cf.constant
    assert ControlFunction(solve_hjb(fig1_params())).constant


params_strategy = st.builds(
    lambda mu, ratio, s2, c: ModelParams.from_sigma2(mu, mu * ratio, s2, c, 10.0, 0.5),
    mu=st.floats(0.2, 5.0), ratio=st.floats(1.05, 4.0), s2=st.floats(5.0, 200.0), c=st.floats(0.01, 0.2),
)


@settings(max_examples=40, deadline=None)
@given(params_strategy)
def test_random_parameters_solve_the_hjb(p):
    sol = solve_hjb(p)
    assert sol.b0 > 0
    if sol.regime is Regime.INTERIOR:
        assert 0 < sol.m < sol.b0
    xs = np.linspace(0.05, 0.95, 9) * sol.b
    scale = p.mu / p.c
    d1, d2 = value_slope(sol, xs)
    v = sol.value(xs)
    a = sol.control(xs)
    at_control = 0.5 * p.sigma2 * a * a * d2 + (p.mu - (1 - a) * p.lam) * d1 - p.c * v
    grid = np.linspace(0, 1, 201)[:, None]
    over_actions = 0.5 * p.sigma2 * grid ** 2 * d2 + (p.mu - (1 - grid) * p.lam) * d1 - p.c * v
    assert np.max(np.abs(at_control)) <= 1e-10 * scale
    assert np.max(over_actions) <= 1e-10 * scale
    a = sol.control(np.linspace(0, sol.b, 200))
    assert np.all(np.diff(a) >= -1e-12)
    assert np.all((a >= p.d_min - 1e-12) & (a <= 1.0))
