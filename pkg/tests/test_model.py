import math

import pytest
from hypothesis import given, strategies as st

from dividend_solvency import (
    DegenerateCost, ModelParams, NonPositive, Regime, RiskOutOfRange, ValidationError, classify, validate,
)


def make(**kw):
    base = dict(mu=2.0, lam=6.0, sigma=math.sqrt(50.0), c=0.05, T=50.0, epsilon=0.1)
    base.update(kw)
    return ModelParams(**base)


def test_fig1_parameters_are_valid():
    p = make()
    assert validate(p) is p
    assert p.sigma2 == pytest.approx(50.0, rel=1e-15)
    assert p.delta == 4.0
    assert p.alpha == pytest.approx(36.0 / 100.0)


@pytest.mark.parametrize("lam", [2.0, 0.4, 1.0])
def test_reinsurance_must_cost_more_than_own_loading(lam):
    with pytest.raises(DegenerateCost):
        validate(make(lam=lam))


@pytest.mark.parametrize("field", ["sigma", "c", "T"])
@pytest.mark.parametrize("value", [0.0, -1.0])
def test_nonpositive_scales(field, value):
    with pytest.raises(NonPositive):
        validate(make(**{field: value}))


@pytest.mark.parametrize("eps", [0.0, 1.0, -0.1, 1.5])
def test_risk_level_outside_unit_interval(eps):
    with pytest.raises(RiskOutOfRange):
        validate(make(epsilon=eps))


def test_negative_mu_and_nan_rejected():
    with pytest.raises(NonPositive):
        validate(make(mu=-0.5, lam=1.0))
    with pytest.raises(ValidationError):
        validate(make(c=float("nan")))


def test_validation_errors_are_value_errors():
    with pytest.raises(ValueError):
        validate(make(lam=1.0))


def test_from_sigma2_rejects_nonpositive():
    with pytest.raises(NonPositive):
        ModelParams.from_sigma2(2, 6, 0.0, 0.05, 50, 0.1)


@pytest.mark.parametrize("lam,regime", [(6.0, Regime.CHEAP_HEAVY), (4.0, Regime.CHEAP_HEAVY),
                                        (3.0, Regime.INTERIOR), (2.0001, Regime.INTERIOR)])
def test_classify(lam, regime):
    assert classify(make(lam=lam)) is regime


def test_d_min():
    assert make(lam=6.0).d_min == 1.0
    assert make(lam=3.0).d_min == pytest.approx(2.0 / 3.0)


@given(mu=st.floats(0.01, 10), ratio=st.floats(1.0001, 5), s2=st.floats(0.1, 500), c=st.floats(1e-3, 1))
def test_validate_idempotent_and_classify_partitions(mu, ratio, s2, c):
    p = ModelParams.from_sigma2(mu, mu * ratio, s2, c, 10.0, 0.5)
    assert validate(validate(p)) == p
    assert (classify(p) is Regime.CHEAP_HEAVY) == (p.lam >= 2 * p.mu)
