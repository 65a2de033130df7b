import pytest

from dividend_solvency import ModelParams


def fig1_params(lam=6.0, T=50.0, epsilon=0.1, mu=2.0, sigma2=50.0):
    return ModelParams.from_sigma2(mu=mu, lam=lam, sigma2=sigma2, c=0.05, T=T, epsilon=epsilon)


@pytest.fixture
def cheap():
    return fig1_params(lam=6.0)


@pytest.fixture
def interior():
    return fig1_params(lam=3.0)


@pytest.fixture(params=[6.0, 3.0], ids=["cheap_heavy", "interior"])
def both_regimes(request):
    return fig1_params(lam=request.param)
