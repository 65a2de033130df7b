"""Optimal dividend barriers with proportional reinsurance under a solvency constraint."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError, DegenerateCost, DividendSolverError, DomainError, GridError, InstabilityError, NoBracket,
    NoConvergence, NonPositive, RiskOutOfRange, Unattainable, ValidationError,
)
from .hjb import ControlFunction, HjbSolution, compute_b0, compute_zetas, hjb_residual, solve_hjb  # noqa: E402
from .model import ModelParams, Regime, classify, validate  # noqa: E402
from .ruin import epsilon0_lower_bound, ruin_probability, solve_survival_pde, u_of_b  # noqa: E402
from .simulate import PathBatch, SimConfig, estimate_ruin_prob, estimate_value, simulate_batch  # noqa: E402
from .solvency import PolicyDecision, decide_policy, epsilon_of_b, risk_capital, solve_b_star  # noqa: E402

__all__ = [
    "ConfigError", "ControlFunction", "DegenerateCost", "DividendSolverError", "DomainError", "GridError",
    "HjbSolution", "InstabilityError", "ModelParams", "NoBracket", "NoConvergence", "NonPositive", "PathBatch",
    "PolicyDecision", "Regime", "RiskOutOfRange", "SimConfig", "Unattainable", "ValidationError", "classify",
    "compute_b0", "compute_zetas", "decide_policy", "epsilon0_lower_bound", "epsilon_of_b", "estimate_ruin_prob",
    "estimate_value", "hjb_residual", "risk_capital", "ruin_probability", "simulate_batch", "solve_b_star",
    "solve_hjb", "solve_survival_pde", "u_of_b", "validate",
]
