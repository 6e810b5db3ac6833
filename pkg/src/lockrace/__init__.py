"""Equilibrium thresholds for multi-lock acquisition races."""

__version__ = "0.1.0"

from .equilibrium import (
    AsymptoticResult,
    EquilibriumNotConverged,
    EquilibriumResult,
    asymptotic_equilibrium,
    gamma_derivative,
    gamma_first_lock,
    solve_equilibrium,
    verify_equilibrium,
)
from .estimator import MTEquilibrium, PayoffSimulator
from .model import (
    ConfigError,
    GameConfig,
    MTStrategy,
    SampledFunction,
    StrategyProfile,
    ThresholdPolicy,
    validate_config,
)
from .recursion import ContinuationValues, backward_recursion, quadrature_check
from .simulator import deviation_test_mc, estimate_payoffs, simulate_episode

__all__ = [
    "AsymptoticResult",
    "ConfigError",
    "ContinuationValues",
    "EquilibriumNotConverged",
    "EquilibriumResult",
    "GameConfig",
    "MTEquilibrium",
    "MTStrategy",
    "PayoffSimulator",
    "SampledFunction",
    "StrategyProfile",
    "ThresholdPolicy",
    "asymptotic_equilibrium",
    "backward_recursion",
    "deviation_test_mc",
    "estimate_payoffs",
    "gamma_derivative",
    "gamma_first_lock",
    "quadrature_check",
    "simulate_episode",
    "solve_equilibrium",
    "validate_config",
    "verify_equilibrium",
]
