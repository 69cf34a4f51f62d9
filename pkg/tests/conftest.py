import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from windpm.costs import ComponentType, Farm, McSettings
from windpm.defaults import reference_farm, reference_revenue
from windpm.revenue import build_revenue_function
from windpm.stochastic import SeedPolicy, WeibullParams

settings.register_profile("windpm", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("windpm")


def flat_revenue(rate=30.0, life=240, gamma_bar=1.0):
    return build_revenue_function(np.full(life, rate), gamma_bar)


def exp_farm(scale=100.0, cm_cost=100.0, pm_cost=10.0, n_turbines=1, n_components=1,
             farm_cost=50.0, cm_duration=1.0):
    comps = tuple(ComponentType(f"c{j}", cm_cost, pm_cost, cm_cost / 2,
                                WeibullParams(scale=scale, shape=1.0), cm_duration)
                  for j in range(n_components))
    return Farm(n_turbines, comps, 1.0 / 6.0, 0.0, farm_cost)


@pytest.fixture(scope="session")
def ref_farm():
    return reference_farm(10)


@pytest.fixture(scope="session")
def ref_R(ref_farm):
    return build_revenue_function(reference_revenue(), ref_farm.gamma_bar)


@pytest.fixture
def mc_small():
    return McSettings(2000, SeedPolicy(7))


def synthetic_model(start, end, n_slots, n_components, seed, multiplicity=None):
    """Model with random positive interval and occasion costs."""
    from windpm.model import attach_objective, build_polytope

    rng = np.random.default_rng(seed)
    L = end - start
    model = build_polytope(start, end, n_slots, n_components, multiplicity=multiplicity)
    # convex-in-length interval costs so that PM pays off, plus noise
    span = np.subtract.outer(np.arange(L + 2), np.arange(L + 1)).T.astype(float)
    weight = rng.uniform(0.5, 3.0, (n_slots, n_components, 1, 1))
    pm = rng.uniform(2.0, 20.0, (n_slots, n_components, 1, 1))
    tensor = weight * np.maximum(span, 0.0) ** 2 + pm + rng.uniform(0.0, 5.0, span.shape)
    y = rng.uniform(0.0, 30.0, (n_slots, L + 1, L + 1))
    z = rng.uniform(0.0, 60.0, (L + 1, L + 1))
    attach_objective(model, tensor, y, z)
    return model, tensor, y, z


def estimated_model(length, n_components, seed, samples=400):
    """Small single-turbine model whose costs come from shared-seed estimates."""
    from windpm.costs import McSettings, Variant
    from windpm.model import group_turbines
    from windpm.planning import build_model
    from windpm.costs import estimates_for

    rng = np.random.default_rng(seed)
    comps = tuple(
        ComponentType(f"c{j}", float(rng.uniform(80, 250)), float(rng.uniform(5, 60)),
                      40.0, WeibullParams(scale=float(rng.uniform(3, 15)),
                                          shape=float(rng.uniform(1.0, 4.0))), 1.0)
        for j in range(n_components))
    farm = Farm(1, comps, 1.0 / 6.0, float(rng.uniform(0, 10)), float(rng.uniform(0, 80)))
    R = build_revenue_function(rng.uniform(15, 30, 24), farm.gamma_bar)
    variant = Variant("full-contract", 0, length, 24)
    ages = np.zeros((1, n_components))
    classes = group_turbines(ages)
    est = estimates_for(variant, farm, ages, R, McSettings(samples, SeedPolicy(seed)),
                        turbines=classes.representatives)
    return build_model(variant, farm, est, R, classes)


def constrained_model(start, end, n_slots, n_components, seed, tighten=0.9):
    """Synthetic model plus a budget row that cuts off its unconstrained optimum."""
    from windpm.model import attach_availability
    from windpm.solver import solve_exact

    model, tensor, y, z = synthetic_model(start, end, n_slots, n_components, seed)
    L = end - start
    rng = np.random.default_rng(seed + 10_000)
    ax = rng.uniform(0.0, 1.0, (n_slots, n_components, L + 1, L + 2))
    ay = rng.uniform(0.0, 1.0, (n_slots, L + 1, L + 1))
    free = solve_exact(model).values
    probe = attach_availability(synthetic_model(start, end, n_slots, n_components, seed)[0],
                                "time", 1.0, ax, ay, unit=1.0, n_turbines=1)
    used = float((probe.A_ub[-1] @ free)[0])
    return attach_availability(model, "time", 1.0, ax, ay, unit=tighten * used, n_turbines=1)


# ----------------------------------------------------------------------------
# acceptance report: one line per criterion at the end of the run

ACCEPTANCE = {}


def record_criterion(number, title, passed, detail):
    ACCEPTANCE[number] = (title, passed, detail)
    print(f"criterion {number} {'PASS' if passed else 'FAIL'}: {title} | {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(
            f"criterion {number} {'PASS' if passed else 'FAIL'}: {title} | {detail}")
