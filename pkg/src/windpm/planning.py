"""End-to-end planning: estimates -> cost tensor -> integer program -> schedule."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np

from .costs import (Estimates, Farm, McSettings, Variant, availability_coefficients,
                    build_cost_tensor, estimates_for, occasion_coefficients)
from .model import (IlpModel, Schedule, TurbineClasses, attach_availability, attach_objective,
                    build_polytope, group_turbines)
from .revenue import RevenueFunction
from .solver import Solution, SolverConfig, extract_schedule, solve_exact

log = logging.getLogger(__name__)


@dataclass
class Plan:
    variant: Variant
    classes: TurbineClasses
    model: IlpModel
    solution: Solution
    schedule: Schedule          # per class slot
    farm_schedule: Schedule     # per farm turbine
    estimate_seconds: float

    @property
    def objective(self) -> float:
        return self.solution.objective

    @property
    def stops(self) -> tuple:
        return self.schedule.stops()


def build_model(variant: Variant, farm: Farm, est: Estimates, R: RevenueFunction,
                classes: TurbineClasses) -> IlpModel:
    """Assemble the integer program for ``variant`` on class representatives.

    ``est.turbines`` must list the class representatives in slot order.
    """
    if tuple(est.turbines) != classes.representatives:
        raise ValueError("estimates must cover exactly the class representatives")
    tensor = build_cost_tensor(variant, farm, est)
    y, z = occasion_coefficients(farm, R, est)
    model = build_polytope(variant.start, variant.end, len(classes.members), farm.n_components,
                           multiplicity=classes.multiplicity, turbines=classes.representatives)
    attach_objective(model, tensor, y, z)
    if variant.availability is not None:
        ax, ay, unit = availability_coefficients(variant.availability, farm, R, est)
        attach_availability(model, variant.availability, variant.epsilon, ax, ay, unit,
                            n_turbines=farm.n_turbines)
    model.meta["variant"] = variant
    return model


def plan(variant: Variant, farm: Farm, ages, R: RevenueFunction, mc: McSettings,
         config: SolverConfig = SolverConfig(), est: Estimates | None = None,
         classes: TurbineClasses | None = None) -> Plan:
    """Optimal PM plan for ``variant`` with turbines grouped by identical ages."""
    ages = np.asarray(ages, dtype=float).reshape(farm.n_turbines, farm.n_components)
    classes = group_turbines(ages) if classes is None else classes
    t0 = time.perf_counter()
    if est is None:
        est = estimates_for(variant, farm, ages, R, mc, turbines=classes.representatives)
    t_est = time.perf_counter() - t0
    model = build_model(variant, farm, est, R, classes)
    sol = solve_exact(model, config)
    sched = extract_schedule(sol, model)
    log.info("%s [%d,%d]: objective %.1f, stops %s", variant.label, variant.start, variant.end,
             sol.objective, sched.stops())
    return Plan(variant, classes, model, sol, sched, classes.expand(sched), t_est)
