"""Sampled-failure simulation of maintenance policies.

Three policies are supported: rolling-horizon optimised PM that is replanned
at every failure, pure corrective maintenance, and a constant-interval block
policy.  Failure lifetimes come from one stream per (replication, turbine,
component); the k-th individual put into a slot always receives the k-th draw
of that stream, whatever the policy, so policies are compared on common random
numbers.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .costs import (END_OF_LIFE, FULL_CONTRACT, NORMAL_PHASE, ComponentType, Estimates, Farm,
                    McSettings, Variant, estimate, merge_rows, replicate_slots, window_slice)
from .model import group_turbines
from .planning import plan
from .revenue import ConfigurationError, RevenueFunction
from .solver import SolverConfig, SolverError
from .stochastic import SeedPolicy, residual_total_life

log = logging.getLogger(__name__)

PM, CM, SKIPPED = "PM", "CM", "FailureSkipped"

PURE_CM = "pure-cm"
CONSTANT_INTERVAL = "constant-interval"
OPTIMIZED_ROLLING = "optimized-rolling"
POLICY_KINDS = (OPTIMIZED_ROLLING, PURE_CM, CONSTANT_INTERVAL)

PHASE_FULL_CONTRACT = "full-contract"
PHASE_LIFETIME = "lifetime"

# leading spawn-key word separating failure streams from estimator streams
_FAILURE_STREAM = 0x5EED


class SimulationError(RuntimeError):
    """A policy could not be carried out; ``trace`` holds the events so far."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class Policy:
    """Maintenance policy and its parameters.

    ``window`` is the replanning window of the rolling policy in the lifetime
    phase rule; ``intervals`` the PM interval (months) per component type of
    the constant-interval policy.  ``eol_skip`` enables the end-of-life rule
    that leaves a failed component unrepaired when repair does not pay back;
    by default it is on for the lifetime phase rule only.
    """

    kind: str = OPTIMIZED_ROLLING
    window: int = 120
    phase_rule: str = PHASE_FULL_CONTRACT
    intervals: tuple | None = None
    eol_skip: bool | None = None

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ConfigurationError(f"unknown policy {self.kind!r}")
        if self.phase_rule not in (PHASE_FULL_CONTRACT, PHASE_LIFETIME):
            raise ConfigurationError(f"unknown phase rule {self.phase_rule!r}")
        if self.window < 1:
            raise ConfigurationError("replanning window must be at least one step")
        if self.kind == CONSTANT_INTERVAL:
            if not self.intervals or any(i < 1 for i in self.intervals):
                raise ConfigurationError("constant-interval policy needs intervals >= 1")

    @property
    def skips_uneconomic_repairs(self) -> bool:
        if self.eol_skip is not None:
            return self.eol_skip
        return self.kind == OPTIMIZED_ROLLING and self.phase_rule == PHASE_LIFETIME

    @property
    def label(self) -> str:
        return self.kind


@dataclass(frozen=True)
class ScriptedFailure:
    time: float
    turbine: int
    component: int


@dataclass(frozen=True)
class Scenario:
    """One simulated farm history over ``(0, horizon]``.

    ``script`` replaces sampled lifetimes by explicit failure times: a slot
    then fails at the first scripted time after its current component was
    installed, and never otherwise.
    """

    farm: Farm
    revenue: RevenueFunction
    horizon: int
    seed: int = 20240101
    replication: int = 0
    script: tuple = ()

    def __post_init__(self):
        if not 1 <= self.horizon <= self.revenue.life:
            raise ConfigurationError(f"horizon {self.horizon} outside [1, {self.revenue.life}]")
        for f in self.script:
            if not (0 < f.time <= self.revenue.life and 0 <= f.turbine < self.farm.n_turbines
                    and 0 <= f.component < self.farm.n_components):
                raise ConfigurationError(f"scripted failure {f} outside the farm or life")

    @property
    def life(self) -> int:
        return self.revenue.life

    def replica(self, replication: int) -> "Scenario":
        return dataclasses.replace(self, replication=replication)


@dataclass(frozen=True)
class Event:
    time: float
    turbine: int
    component: int
    kind: str
    cost: float
    downtime: float


@dataclass(frozen=True)
class PlanSnapshot:
    time: float
    variant: str
    start: int
    end: int
    objective: float
    schedule: tuple  # per turbine, per component months


@dataclass
class SimulationTrace:
    policy: str
    horizon: int
    n_turbines: int
    events: list = field(default_factory=list)
    plans: list = field(default_factory=list)

    @property
    def total_cost(self) -> float:
        return math.fsum(e.cost for e in self.events)

    @property
    def total_downtime(self) -> float:
        return math.fsum(e.downtime for e in self.events)

    def count(self, kind: str) -> int:
        return sum(1 for e in self.events if e.kind == kind)

    def to_csv(self, handle=None, component_names=None) -> str:
        buf = io.StringIO() if handle is None else handle
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time", "turbine", "component", "event", "cost_k", "downtime_months"])
        for e in self.events:
            comp = component_names[e.component] if component_names else e.component
            w.writerow([repr(float(e.time)), e.turbine + 1, comp, e.kind, repr(float(e.cost)),
                        repr(float(e.downtime))])
        return buf.getvalue() if handle is None else ""


@dataclass(frozen=True)
class Metrics:
    policy: str
    total_cost: float
    downtime_per_turbine: float
    availability: float
    failures_per_turbine: float
    pm_events: int


def load_script(source, component_names) -> tuple:
    """Parse scripted failures from JSON.

    Accepts a list (or ``{"failures": [...]}``) of objects with ``month``
    (or ``time``), a 1-based ``turbine`` and a ``component`` given by name or
    0-based index.
    """
    data = json.loads(source) if isinstance(source, str) else source
    if isinstance(data, dict):
        data = data.get("failures")
    if not isinstance(data, list):
        raise ConfigurationError("scripted failures must be a list")
    names = list(component_names)
    out = []
    for n, item in enumerate(data):
        try:
            when = float(item["month"] if "month" in item else item["time"])
            turbine = int(item["turbine"]) - 1
            comp = item["component"]
            comp = names.index(comp) if isinstance(comp, str) else int(comp)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigurationError(f"scripted failure #{n}: {exc}") from exc
        out.append(ScriptedFailure(when, turbine, comp))
    return tuple(sorted(out, key=lambda f: (f.time, f.turbine, f.component)))


def end_of_life_cm_decision(component: ComponentType, v: float, R: RevenueFunction) -> bool:
    """Whether repairing a component that fails at ``v`` pays back before end of life."""
    if not 0 <= v <= R.life:
        raise ConfigurationError(f"failure time {v} outside [0, {R.life}]")
    gamma = component.cm_duration
    return bool(R(min(v + gamma, R.life + R.gamma_bar)) >= component.cm_cost + R.loss(v, gamma))


def compute_metrics(trace: SimulationTrace, farm: Farm, horizon: int | None = None) -> Metrics:
    horizon = trace.horizon if horizon is None else horizon
    m = farm.n_turbines
    down = trace.total_downtime
    fails = trace.count(CM) + trace.count(SKIPPED)
    return Metrics(
        policy=trace.policy,
        total_cost=trace.total_cost,
        downtime_per_turbine=down / m,
        availability=min(1.0, max(0.0, 1.0 - down / (m * horizon))),
        failures_per_turbine=fails / m,
        pm_events=trace.count(PM),
    )


# ----------------------------------------------------------------------------
# event engine shared by all policies


class _Farm:
    """Mutable state of one simulated history."""

    def __init__(self, scenario: Scenario, policy: Policy):
        self.sc = scenario
        self.policy = policy
        farm = scenario.farm
        self.m, self.n = farm.n_turbines, farm.n_components
        self.installed = np.zeros((self.m, self.n))
        self.failure = np.full((self.m, self.n), np.inf)
        self.alive = np.ones(self.m, dtype=bool)
        self.trace = SimulationTrace(policy.label, scenario.horizon, self.m)
        seeds = SeedPolicy(scenario.seed)
        self._rng = {(i, j): seeds.rng(_FAILURE_STREAM, scenario.replication, i, j)
                     for i in range(self.m) for j in range(self.n)}
        self._script = {}
        for f in scenario.script:
            self._script.setdefault((f.turbine, f.component), []).append(f.time)
        for i in range(self.m):
            for j in range(self.n):
                self.failure[i, j] = self._next_failure(i, j, 0.0)

    def _next_failure(self, i, j, installed_at):
        if self.sc.script:
            later = [t for t in self._script.get((i, j), ()) if t > installed_at]
            return min(later) if later else math.inf
        e = self._rng[i, j].standard_exponential()
        return installed_at + float(residual_total_life(self.sc.farm.components[j].weibull, 0.0, e))

    def _renew(self, i, j, when):
        self.installed[i, j] = when
        self.failure[i, j] = self._next_failure(i, j, when)

    def next_failure(self):
        """Earliest pending failure ``(time, i, j)`` within the horizon, or None."""
        masked = np.where(self.alive[:, None], self.failure, np.inf)
        flat = int(np.argmin(masked))
        i, j = divmod(flat, self.n)
        v = masked[i, j]
        return (float(v), i, j) if v <= self.sc.horizon else None

    def fail(self, v, i, j):
        """Repair, or leave down for good when the end-of-life rule says so."""
        comp = self.sc.farm.components[j]
        R = self.sc.revenue
        if self.policy.skips_uneconomic_repairs and not end_of_life_cm_decision(comp, v, R):
            H = self.sc.horizon
            self.trace.events.append(Event(v, i, j, SKIPPED, float(R.loss(v, H - v)), H - v))
            self.alive[i] = False
            self.failure[i, :] = np.inf
            return False
        cost = comp.cm_cost + float(R.loss(v, comp.cm_duration))
        self.trace.events.append(Event(v, i, j, CM, cost, comp.cm_duration))
        self._renew(i, j, v)
        return True

    def preventive(self, t, work):
        """PM at step ``t``; ``work`` maps turbine -> component indices."""
        farm, R = self.sc.farm, self.sc.revenue
        first = True
        for i in sorted(work):
            if not self.alive[i] or not work[i]:
                continue
            for n, j in enumerate(sorted(work[i])):
                cost = farm.components[j].pm_cost
                down = 0.0
                if n == 0:
                    cost += float(farm.turbine_cost_at(t)) + float(R.loss(min(t, R.life),
                                                                           farm.pm_duration))
                    down = farm.pm_duration
                if first:
                    cost += float(farm.farm_cost_at(t))
                    first = False
                self.trace.events.append(Event(float(t), i, j, PM, cost, down))
                self._renew(i, j, float(t))

    def ages_at(self, s):
        return np.maximum(0.0, s - self.installed)


def run_pure_cm(scenario: Scenario, policy: Policy | None = None) -> SimulationTrace:
    """Corrective maintenance only."""
    policy = Policy(PURE_CM) if policy is None else policy
    st = _Farm(scenario, policy)
    while (nf := st.next_failure()) is not None:
        st.fail(*nf)
    return st.trace


def ci_months(intervals, horizon: int) -> dict:
    """PM months of a constant-interval policy: month -> component indices."""
    out = {}
    for j, step in enumerate(intervals):
        if step is None or not math.isfinite(step):
            continue
        step = int(step)
        for t in range(step, horizon, step):
            out.setdefault(t, []).append(j)
    return out


def run_constant_interval(scenario: Scenario, policy: Policy) -> SimulationTrace:
    """Farm-wide PM of component type j every ``intervals[j]`` months; CM in between."""
    if policy.kind != CONSTANT_INTERVAL:
        raise ConfigurationError("policy is not constant-interval")
    if len(policy.intervals) != scenario.farm.n_components:
        raise ConfigurationError("need one interval per component type")
    st = _Farm(scenario, policy)
    months = ci_months(policy.intervals, scenario.horizon)
    for t in sorted(months):
        while (nf := st.next_failure()) is not None and nf[0] <= t:
            st.fail(*nf)
        st.preventive(t, {i: months[t] for i in range(st.m)})
    while (nf := st.next_failure()) is not None:
        st.fail(*nf)
    return st.trace


def tune_constant_intervals(farm: Farm, R: RevenueFunction, horizon: int, mc: McSettings,
                            grid=range(12, 73), est: Estimates | None = None,
                            max_sweeps: int = 10) -> tuple:
    """Per-component intervals minimising the expected cost of the block policy.

    Coordinate descent over ``grid`` with expected CM costs from the estimator
    (age-0 rows of a single turbine) and exact PM and occasion costs.
    """
    if est is None:
        est = estimate(farm, np.zeros((farm.n_turbines, farm.n_components)), 0, horizon,
                       horizon, R, mc, turbines=(0,))
    grid = tuple(int(g) for g in grid)
    m = farm.n_turbines

    def cost(intervals):
        total = 0.0
        for j, step in enumerate(intervals):
            cuts = [0, *range(step, horizon, step), horizon]
            total += m * sum(est.phi[0, j, a, b] for a, b in zip(cuts, cuts[1:]))
            total += m * farm.components[j].pm_cost * (len(cuts) - 2)
        for t in ci_months(intervals, horizon):
            total += m * (float(farm.turbine_cost_at(t)) + float(R.loss(t, farm.pm_duration)))
            total += float(farm.farm_cost_at(t))
        return total

    current = [grid[len(grid) // 2]] * farm.n_components
    best = cost(current)
    for _ in range(max_sweeps):
        changed = False
        for j in range(farm.n_components):
            for g in grid:
                trial = list(current)
                trial[j] = g
                c = cost(trial)
                if c < best - 1e-9:
                    best, current, changed = c, trial, True
        if not changed:
            break
    log.info("constant intervals %s, expected cost %.1f", current, best)
    return tuple(current)


# ----------------------------------------------------------------------------
# rolling horizon


def rolling_base_estimates(scenario: Scenario, policy: Policy, mc: McSettings) -> Estimates:
    """Age-0 estimates reused by every replan of every replication."""
    farm = scenario.farm
    zeros = np.zeros((farm.n_turbines, farm.n_components))
    if policy.phase_rule == PHASE_FULL_CONTRACT:
        H = scenario.horizon
        return estimate(farm, zeros, 0, H, H, scenario.revenue, mc, turbines=(0,))
    T = scenario.life
    return estimate(farm, zeros, 0, T, T, scenario.revenue, mc, turbines=(0,),
                    eol_deltas=(0.0,))


def _variant_at(s: int, scenario: Scenario, policy: Policy) -> Variant | None:
    T = scenario.life
    if policy.phase_rule == PHASE_FULL_CONTRACT:
        e = scenario.horizon
        return Variant(FULL_CONTRACT, s, e, T) if e > s else None
    if s + policy.window < T:
        return Variant(NORMAL_PHASE, s, s + policy.window, T)
    return Variant(END_OF_LIFE, s, T, T) if T > s else None


def _replan(st: _Farm, s: int, variant: Variant, base: Estimates, mc: McSettings,
            config: SolverConfig):
    sc = st.sc
    alive = np.flatnonzero(st.alive)
    if alive.size == 0:
        return {}, None
    sub = dataclasses.replace(sc.farm, n_turbines=int(alive.size))
    ages = st.ages_at(s)[alive]
    classes = group_turbines(ages)
    reps = classes.representatives
    sliced = window_slice(base, s, variant.end, horizon=variant.horizon)
    deltas = (0.0,) if variant.kind == END_OF_LIFE else ()
    row = estimate(sub, ages, s, variant.end, variant.horizon, sc.revenue, mc, turbines=reps,
                   eol_deltas=deltas, rows=(s,))
    est = merge_rows(replicate_slots(sliced, reps), row, rows=(s,))
    result = plan(variant, sub, ages, sc.revenue, mc, config, est=est, classes=classes)
    work = {}
    per_turbine = result.farm_schedule.plans
    for slot, i in enumerate(alive):
        for j, months in enumerate(per_turbine[slot]):
            for t in months:
                work.setdefault(t, {}).setdefault(int(i), []).append(j)
    full = [((),) * sc.farm.n_components for _ in range(st.m)]
    for slot, i in enumerate(alive):
        full[i] = tuple(per_turbine[slot])
    snap = PlanSnapshot(float(s), variant.label, variant.start, variant.end,
                        result.objective, tuple(full))
    return work, snap


def run_rolling_horizon(scenario: Scenario, policy: Policy | None = None,
                        mc: McSettings | None = None, config: SolverConfig = SolverConfig(),
                        base: Estimates | None = None) -> SimulationTrace:
    """Optimised PM, replanned from the step before every failure.

    A failure at continuous time ``v`` is repaired at ``v``; the new plan
    starts at step ``ceil(v) - 1`` so PM may still be scheduled in the month
    of the failure.  Planned PM not yet performed is superseded.  In the
    lifetime phase rule the plan also rolls forward when its window ends.
    """
    policy = Policy() if policy is None else policy
    mc = McSettings(seeds=SeedPolicy(scenario.seed)) if mc is None else mc
    if base is None:
        base = rolling_base_estimates(scenario, policy, mc)
    st = _Farm(scenario, policy)
    H = scenario.horizon

    def start_plan(s):
        variant = _variant_at(s, scenario, policy)
        if variant is None:
            return {}, H
        try:
            work, snap = _replan(st, s, variant, base, mc, config)
        except SolverError as exc:
            raise SimulationError(f"replan at step {s} failed: {exc}", st.trace) from exc
        if snap is not None:
            st.trace.plans.append(snap)
        return work, variant.end

    work, window_end = start_plan(0)
    while True:
        pending = sorted(t for t in work if t <= min(window_end, H))
        t_pm = pending[0] if pending else math.inf
        nf = st.next_failure()
        v = nf[0] if nf is not None else math.inf
        roll = window_end if window_end < H else math.inf
        if nf is not None and v <= t_pm and v <= roll:
            repaired = st.fail(*nf)
            s = max(0, math.ceil(v) - 1)
            if s >= H or (not repaired and not st.alive.any()):
                work = {}
                continue
            work, window_end = start_plan(s)
        elif math.isfinite(t_pm) and t_pm <= roll:
            st.preventive(t_pm, work.pop(t_pm))
        elif math.isfinite(roll):
            work, window_end = start_plan(int(roll))
        else:
            break
    return st.trace


def run_policy(scenario: Scenario, policy: Policy, mc: McSettings | None = None,
               config: SolverConfig = SolverConfig(), base: Estimates | None = None):
    if policy.kind == PURE_CM:
        return run_pure_cm(scenario, policy)
    if policy.kind == CONSTANT_INTERVAL:
        return run_constant_interval(scenario, policy)
    return run_rolling_horizon(scenario, policy, mc, config, base)


def _replicate_one(args):
    scenario, policy, mc, config, base = args
    trace = run_policy(scenario, policy, mc, config, base)
    return compute_metrics(trace, scenario.farm)


def replicate(scenario: Scenario, policy: Policy, replications: int,
              mc: McSettings | None = None, config: SolverConfig = SolverConfig(),
              threads: int = 1) -> list:
    """Metrics of ``replications`` independent histories (replication ids 0..n-1).

    Results do not depend on ``threads``: every replication is seeded by its
    id alone and results are returned in id order.
    """
    mc = McSettings(seeds=SeedPolicy(scenario.seed)) if mc is None else mc
    base = rolling_base_estimates(scenario, policy, mc) if policy.kind == OPTIMIZED_ROLLING else None
    jobs = [(scenario.replica(r), policy, mc, config, base) for r in range(replications)]
    if threads <= 1:
        return [_replicate_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_replicate_one, jobs, chunksize=max(1, len(jobs) // (4 * threads))))


def summarize(metrics) -> Metrics:
    """Mean over replications."""
    metrics = list(metrics)
    if not metrics:
        raise ConfigurationError("no replications to summarize")

    def mean(attr):
        return float(np.mean([getattr(x, attr) for x in metrics]))

    return Metrics(metrics[0].policy, mean("total_cost"), mean("downtime_per_turbine"),
                   mean("availability"), mean("failures_per_turbine"),
                   int(round(mean("pm_events"))))
