"""Reference wind-farm data used by the example configuration and tests."""
from __future__ import annotations

from .costs import ComponentType, Farm
from .revenue import default_monthly_revenue, tile_revenue
from .stochastic import WeibullParams

# name, CM cost, PM cost, component cost (k$), Weibull shape, scale (months)
REFERENCE_COMPONENTS = (
    ("rotor", 162.0, 28.0, 112.0, 3.0, 100.0),
    ("main_bearing", 110.0, 15.0, 60.0, 2.0, 125.0),
    ("gearbox", 202.0, 38.0, 152.0, 3.0, 80.0),
    ("generator", 150.0, 25.0, 100.0, 2.0, 110.0),
)

LIFE_MONTHS = 240


def reference_components(cm_duration: float = 1.0) -> tuple[ComponentType, ...]:
    return tuple(
        ComponentType(name, cm, pm, comp, WeibullParams(scale=scale, shape=shape), cm_duration)
        for name, cm, pm, comp, shape, scale in REFERENCE_COMPONENTS
    )


def reference_farm(n_turbines: int = 10) -> Farm:
    return Farm(n_turbines=n_turbines, components=reference_components(), pm_duration=1.0 / 6.0,
                turbine_cost=0.0, farm_cost=50.0)


def reference_revenue(life: int = LIFE_MONTHS):
    return tile_revenue(default_monthly_revenue(), life)
