"""Preventive maintenance planning for wind farms under stochastic component failures."""

from .costs import (DELTA_INSURANCE, END_OF_LIFE, FULL_CONTRACT, NORMAL_PHASE, ComponentType,
                    CostTensor, Estimates, Farm, McSettings, Variant, build_cost_tensor, estimate,
                    estimates_for)
from .model import IlpModel, Schedule, build_polytope, group_turbines
from .planning import Plan, build_model, plan
from .revenue import RevenueFunction, build_revenue_function
from .solver import Solution, SolverConfig, brute_force_solve, export_mps, solve_exact
from .stochastic import SeedPolicy, WeibullParams

__version__ = "0.1.0"

__all__ = [
    "DELTA_INSURANCE", "END_OF_LIFE", "FULL_CONTRACT", "NORMAL_PHASE", "ComponentType",
    "CostTensor", "Estimates", "Farm", "IlpModel", "McSettings", "Plan", "RevenueFunction",
    "Schedule", "SeedPolicy", "Solution", "SolverConfig", "Variant", "WeibullParams",
    "brute_force_solve", "build_cost_tensor", "build_model", "build_polytope",
    "build_revenue_function", "estimate", "estimates_for", "export_mps", "group_turbines", "plan",
    "solve_exact",
]
