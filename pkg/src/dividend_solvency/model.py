"""Problem parameters, validation and regime classification."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import DegenerateCost, NonPositive, RiskOutOfRange


class Regime(enum.Enum):
    """Which branch of the HJB solution applies.

    ``CHEAP_HEAVY`` (lambda >= 2 mu): full retention is optimal everywhere.
    ``INTERIOR`` (mu < lambda < 2 mu): partial reinsurance below a switching level.
    """

    CHEAP_HEAVY = "CheapHeavy"
    INTERIOR = "Interior"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class ModelParams:
    """Market and contract primitives of the reserve model.

    Attributes:
        mu: insurer safety loading (drift of the uncontrolled reserve).
        lam: reinsurer safety loading; must exceed ``mu``.
        sigma: diffusion volatility.
        c: discount rate.
        T: solvency horizon.
        epsilon: admissible ruin probability over ``[0, T]``.
    """

    mu: float
    lam: float
    sigma: float
    c: float
    T: float
    epsilon: float

    @classmethod
    def from_sigma2(cls, mu, lam, sigma2, c, T, epsilon):
        if sigma2 <= 0:
            raise NonPositive(f"sigma2 must be > 0, got {sigma2!r}")
        return cls(mu=mu, lam=lam, sigma=math.sqrt(sigma2), c=c, T=T, epsilon=epsilon)

    @property
    def sigma2(self):
        return self.sigma * self.sigma

    @property
    def delta(self):
        """Transaction cost lambda - mu."""
        return self.lam - self.mu

    @property
    def alpha(self):
        return self.lam * self.lam / (2.0 * self.sigma2)

    @property
    def d_min(self):
        """Lower bound of the optimal retention ratio, min(1, 2(lambda - mu)/lambda)."""
        return min(1.0, 2.0 * self.delta / self.lam)


def validate(params: ModelParams) -> ModelParams:
    """Return ``params`` unchanged if every standing assumption holds, else raise."""
    for name in ("mu", "lam", "sigma", "c", "T", "epsilon"):
        value = getattr(params, name)
        if not math.isfinite(value):
            raise NonPositive(f"{name} must be finite, got {value!r}")
    if params.mu < 0:
        raise NonPositive(f"mu must be >= 0, got {params.mu!r}")
    if params.lam <= params.mu:
        raise DegenerateCost(
            f"lambda must exceed mu (positive transaction cost), got lambda={params.lam!r}, mu={params.mu!r}"
        )
    for name in ("sigma", "c", "T"):
        if getattr(params, name) <= 0:
            raise NonPositive(f"{name} must be > 0, got {getattr(params, name)!r}")
    if not 0.0 < params.epsilon < 1.0:
        raise RiskOutOfRange(f"epsilon must lie in (0, 1), got {params.epsilon!r}")
    return params


def classify(params: ModelParams) -> Regime:
    if params.lam >= 2.0 * params.mu:
        return Regime.CHEAP_HEAVY
    return Regime.INTERIOR
