"""Refracted optimal multiple stopping under geometric Brownian motion."""

from .gbm_model import MarketModel, call_expectation, first_passage_factor, gamma, lognormal_density
from .numerics import GridFunction, PriceGrid, bisect, build_grid, evaluate, lognormal_expectation
from .reward import ApplicabilityError, ProjectSpec, RewardFunction
from .solver import (
    IterationRecord,
    SolveResult,
    SolverInvariantError,
    iterate,
    positive_part_equivalence_check,
    solve_multiple,
    solve_single,
    value_at,
    value_bound_check,
)

__version__ = "0.1.0"
