"""Monte Carlo interval-cost estimation and variant cost tensors.

Estimation is organised around *pools*: for each (turbine, component, start
step u) one batch of ``samples`` renewal paths is drawn from its own seeded
stream and simulated to the estimation horizon.  Every quantity indexed by an
end step t (expected CM cost, failure count, downtime loss, failure-free
fraction) is read off the same pool by binning failure epochs on the month
grid and taking cumulative sums, so all (u, t) cells of a fixed u share one
set of random numbers.  Turbine- and farm-level failure-free fractions are
computed on the union of the very same paths.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .revenue import ConfigurationError, RevenueFunction
from .stochastic import SeedPolicy, WeibullParams, sample_failure_matrix

FULL_CONTRACT = "full-contract"
NORMAL_PHASE = "normal-phase"
END_OF_LIFE = "end-of-life"
DELTA_INSURANCE = "delta-insurance"
VARIANT_KINDS = (FULL_CONTRACT, NORMAL_PHASE, END_OF_LIFE, DELTA_INSURANCE)


@dataclass(frozen=True)
class ComponentType:
    name: str
    cm_cost: float          # component + logistics at CM, k$
    pm_cost: float          # PM action, k$
    component_cost: float   # component only at CM, k$
    weibull: WeibullParams
    cm_duration: float = 1.0  # months

    def __post_init__(self):
        if min(self.cm_cost, self.pm_cost, self.component_cost) < 0:
            raise ConfigurationError(f"{self.name}: costs must be >= 0")
        if self.component_cost > self.cm_cost:
            raise ConfigurationError(f"{self.name}: component cost exceeds total CM cost")
        if self.cm_duration <= 0:
            raise ConfigurationError(f"{self.name}: CM duration must be > 0")


@dataclass(frozen=True, eq=False)
class Farm:
    """Turbines, component types and shared occasion costs.

    ``turbine_cost`` and ``farm_cost`` are either scalars or per-month series
    indexed by the month t = 1..T.
    """

    n_turbines: int
    components: tuple[ComponentType, ...]
    pm_duration: float = 1.0 / 6.0
    turbine_cost: float | tuple = 0.0
    farm_cost: float | tuple = 50.0

    def __post_init__(self):
        if self.n_turbines < 1 or not self.components:
            raise ConfigurationError("farm needs at least one turbine and one component type")
        if self.pm_duration <= 0:
            raise ConfigurationError("PM duration must be > 0")

    @property
    def n_components(self) -> int:
        return len(self.components)

    @property
    def gamma_bar(self) -> float:
        return max([self.pm_duration] + [c.cm_duration for c in self.components])

    def _series(self, value, t):
        t = np.asarray(t, dtype=np.int64)
        if np.ndim(value) == 0:
            return np.full(t.shape, float(value))
        arr = np.asarray(value, dtype=float)
        return arr[np.clip(t, 1, arr.size) - 1]

    def turbine_cost_at(self, t):
        return self._series(self.turbine_cost, t)

    def farm_cost_at(self, t):
        return self._series(self.farm_cost, t)

    def with_pm_costs(self, factor: float) -> "Farm":
        comps = tuple(
            ComponentType(c.name, c.cm_cost, c.pm_cost * factor, c.component_cost, c.weibull,
                          c.cm_duration)
            for c in self.components
        )
        return Farm(self.n_turbines, comps, self.pm_duration, self.turbine_cost, self.farm_cost)


@dataclass(frozen=True)
class McSettings:
    """Estimator settings.

    ``farm_scope`` selects the turbines whose failures enter the farm-level
    failure-free fraction: ``"slots"`` uses only the modelled turbines (one
    representative per class after symmetry reduction), ``"farm"`` the union
    over every turbine of the farm.
    """

    samples: int = 10_000
    seeds: SeedPolicy = field(default_factory=SeedPolicy)
    farm_scope: str = "slots"

    def __post_init__(self):
        if self.samples < 1:
            raise ConfigurationError("need at least one Monte Carlo replication")
        if self.farm_scope not in ("slots", "farm"):
            raise ConfigurationError(f"unknown farm_scope {self.farm_scope!r}")


@dataclass(frozen=True)
class Variant:
    """Which interval-cost model to build, over which window.

    ``start``/``end`` delimit the planning window; PM may be scheduled at the
    steps start+1..end.  ``life`` is the end of life T.  For the insurance
    variant ``base`` selects the contract-end form or the end-of-life form of
    the per-failure cost.  ``availability`` adds a production- or time-based
    guarantee with tolerance ``epsilon``.
    """

    kind: str
    start: int
    end: int
    life: int
    delta: float = 0.0
    base: str = FULL_CONTRACT
    availability: str | None = None
    epsilon: float = 1.0

    def __post_init__(self):
        if self.kind not in VARIANT_KINDS:
            raise ConfigurationError(f"unknown variant {self.kind!r}")
        if not (0 <= self.start < self.end <= self.life):
            raise ConfigurationError(
                f"window [{self.start}, {self.end}] must satisfy 0 <= start < end <= life={self.life}")
        if self.kind == END_OF_LIFE and self.end != self.life:
            raise ConfigurationError("end-of-life window must end at the end of life")
        if not 0.0 <= self.delta <= 1.0:
            raise ConfigurationError("delta must lie in [0, 1]")
        if self.kind == DELTA_INSURANCE:
            if self.base not in (FULL_CONTRACT, END_OF_LIFE):
                raise ConfigurationError(f"insurance base must be {FULL_CONTRACT} or {END_OF_LIFE}")
            if self.base == END_OF_LIFE and self.end != self.life:
                raise ConfigurationError("end-of-life insurance window must end at the end of life")
        if self.availability not in (None, "production", "time"):
            raise ConfigurationError(f"unknown availability kind {self.availability!r}")
        if self.availability is not None and not 0.0 < self.epsilon <= 1.0:
            raise ConfigurationError("epsilon must lie in (0, 1]")

    @property
    def horizon(self) -> int:
        """Last step up to which CM costs are estimated."""
        return self.life if self.kind == NORMAL_PHASE else self.end

    @property
    def uses_eol_cost(self) -> bool:
        return self.kind == END_OF_LIFE or (self.kind == DELTA_INSURANCE and self.base == END_OF_LIFE)

    @property
    def label(self) -> str:
        if self.kind == DELTA_INSURANCE:
            return f"{self.kind}[{self.base},delta={self.delta:g}]"
        return self.kind


# ----------------------------------------------------------------------------
# pools and cumulative binning


def _pool(farm: Farm, i: int, j: int, u: int, age: float, horizon: int, mc: McSettings,
          tag: int | None = None) -> np.ndarray:
    key = (i, j, u) if tag is None else (i, j, u, tag)
    return sample_failure_matrix(farm.components[j].weibull, u, age, horizon, mc.samples,
                                 mc.seeds.rng(*key))


def _cumulate(times: np.ndarray, weights, u: int, upto: int, n_paths: int) -> np.ndarray:
    """out[k] = mean over paths of the summed weights of failures at or before u + k."""
    ok = np.isfinite(times) & (times <= upto)
    b = np.maximum(np.ceil(times[ok]) - u, 1).astype(np.int64)
    w = np.broadcast_to(weights, times.shape)[ok]
    acc = np.bincount(b, weights=w, minlength=upto - u + 1)
    return np.cumsum(acc[: upto - u + 1]) / n_paths


def _expected_last_shift(times: np.ndarray, u: int, upto: int, n_paths: int) -> np.ndarray:
    """E[max{u, last failure <= u + k}] - u for k = 0..upto-u.

    ``times`` must be sorted along axis 1.  The last failure at or before t
    telescopes into a sum of gaps between consecutive failures, which is then
    binned like any other per-failure weight.
    """
    prev = np.empty_like(times)
    prev[:, 0] = u
    prev[:, 1:] = np.maximum(times[:, :-1], u)
    fin = np.isfinite(times)
    gaps = np.zeros_like(times)
    gaps[fin] = np.maximum(times[fin] - prev[fin], 0.0)
    return _cumulate(times, gaps, u, upto, n_paths)


def _fraction_row(shift: np.ndarray) -> np.ndarray:
    """Failure-free fraction (t - E[last]) / (t - u) for t = u+1..u+len-1; entry 0 is nan."""
    span = np.arange(shift.size, dtype=float)
    out = np.full(shift.size, np.nan)
    out[1:] = 1.0 - shift[1:] / span[1:]
    return np.clip(out, 0.0, 1.0)


def _sorted_union(mats) -> np.ndarray:
    return np.sort(np.concatenate(mats, axis=1), axis=1)


# ----------------------------------------------------------------------------
# estimates


@dataclass(eq=False)
class Estimates:
    """Monte Carlo ingredients for one window.

    Arrays over end steps are indexed ``[..., u - start, t - start]``; entries
    with t <= u hold the value at t = u (zero for sums, nan for fractions).

    phi        (k, n, L+1, H-s+1)  expected CM cost, Lambda^CM + revenue loss per failure
    loss       (k, n, L+1, H-s+1)  expected CM downtime revenue loss
    count      (k, n, L+1, H-s+1)  expected number of failures
    eol        {delta: array}      expected end-of-life CM cost, min{cost; R(U+gamma)}
    p_comp     (k, n, L+1, L+2)    component failure-free fraction, t = s..e+1
    p_turb     (k, L+1, L+2)       turbine failure-free fraction
    p_farm     (L+1, L+2)          farm failure-free fraction
    fresh_tail {(i, j, v): value}  CM cost over [v, H] of a new component installed at v

    ``k`` indexes ``turbines`` (the turbines whose per-component ingredients
    were estimated); the turbines covered by ``p_farm`` follow
    ``McSettings.farm_scope``.
    """

    start: int
    end: int
    horizon: int
    turbines: tuple[int, ...]
    samples: int
    phi: np.ndarray
    loss: np.ndarray
    count: np.ndarray
    eol: dict
    p_comp: np.ndarray
    p_turb: np.ndarray
    p_farm: np.ndarray
    fresh_tail: dict

    @property
    def length(self) -> int:
        return self.end - self.start

    def save(self, path) -> None:
        """Write to an ``.npz`` archive (no pickling)."""
        keys = sorted(self.fresh_tail)
        deltas = sorted(self.eol)
        np.savez(
            path,
            meta=np.array([self.start, self.end, self.horizon, self.samples], dtype=np.int64),
            turbines=np.array(self.turbines, dtype=np.int64),
            phi=self.phi, loss=self.loss, count=self.count,
            eol_deltas=np.array(deltas, dtype=float),
            eol=np.stack([self.eol[d] for d in deltas]) if deltas else np.zeros((0,)),
            p_comp=self.p_comp, p_turb=self.p_turb, p_farm=self.p_farm,
            tail_keys=np.array(keys, dtype=np.int64).reshape(-1, 3),
            tail_values=np.array([self.fresh_tail[k] for k in keys], dtype=float),
        )

    @classmethod
    def load(cls, path) -> "Estimates":
        with np.load(path, allow_pickle=False) as z:
            start, end, horizon, samples = (int(v) for v in z["meta"])
            deltas = [float(d) for d in z["eol_deltas"]]
            eol = {d: z["eol"][n].copy() for n, d in enumerate(deltas)}
            tail = {tuple(int(x) for x in k): float(v)
                    for k, v in zip(z["tail_keys"], z["tail_values"])}
            return cls(start, end, horizon, tuple(int(i) for i in z["turbines"]), samples,
                       z["phi"].copy(), z["loss"].copy(), z["count"].copy(), eol,
                       z["p_comp"].copy(), z["p_turb"].copy(), z["p_farm"].copy(), tail)


def estimate(farm: Farm, ages, start: int, end: int, horizon: int, R: RevenueFunction,
             mc: McSettings, turbines=None, eol_deltas=(), fresh_tail_steps=(),
             rows=None) -> Estimates:
    """Estimate every ingredient on ``[start, end]`` with CM costs up to ``horizon``.

    Parameters
    ----------
    ages : array (m, n)
        Component ages at ``start``.  Rows u > start assume a PM at u (age 0).
    turbines : sequence of int, optional
        Turbines whose per-component tensors are needed; all by default.  The
        farm-level fraction unions these turbines, or every turbine when
        ``mc.farm_scope == "farm"``.
    eol_deltas : sequence of float
        Insurance levels for which the end-of-life per-failure cost is needed
        (0.0 gives the uninsured end-of-life cost).
    fresh_tail_steps : sequence of int
        Steps v for which the CM cost over [v, horizon] of a new component is
        required (normal-phase age penalties).
    rows : sequence of int, optional
        Restrict estimation to these start steps u; other rows stay zero/nan.
    """
    m, n = farm.n_turbines, farm.n_components
    ages = np.asarray(ages, dtype=float).reshape(m, n)
    if not 0 <= start < end <= horizon <= R.life:
        raise ConfigurationError(f"bad estimation window [{start}, {end}] / horizon {horizon}")
    if np.any(ages < 0) or np.any(ages > start + 1e-9):
        raise ConfigurationError("component ages must lie in [0, start]")
    turbines = tuple(range(m)) if turbines is None else tuple(turbines)
    k_of = {i: k for k, i in enumerate(turbines)}
    L, HS = end - start, horizon - start
    deltas = tuple(float(d) for d in eol_deltas)

    phi = np.zeros((len(turbines), n, L + 1, HS + 1))
    loss = np.zeros_like(phi)
    count = np.zeros_like(phi)
    eol = {d: np.zeros_like(phi) for d in deltas}
    p_comp = np.full((len(turbines), n, L + 1, L + 2), np.nan)
    p_turb = np.full((len(turbines), L + 1, L + 2), np.nan)
    p_farm = np.full((L + 1, L + 2), np.nan)
    M = mc.samples
    scope = range(m) if mc.farm_scope == "farm" else turbines

    row_steps = range(start, end + 1) if rows is None else sorted(set(rows))
    for u in row_steps:
        a = u - start
        at_end = u == end
        if at_end:
            # only the empty tail interval starts at the window end
            p_comp[:, :, L, L + 1] = 0.0
            p_turb[:, L, L + 1] = 0.0
            p_farm[L, L + 1] = 0.0
            if horizon == end:
                continue
        farm_mats = []
        for i in scope:
            k = k_of.get(i)
            if at_end and k is None:
                continue
            turb_mats = []
            for j, comp in enumerate(farm.components):
                age = ages[i, j] if u == start else 0.0
                hz = horizon if k is not None else end
                U = _pool(farm, i, j, u, age, hz, mc)
                turb_mats.append(U)
                if k is None:
                    continue
                fin = np.isfinite(U)
                Uc = np.where(fin, U, 0.0)
                rl = np.where(fin, R.loss(Uc, comp.cm_duration), 0.0)
                seg = slice(a, HS + 1)
                phi[k, j, a, seg] = _cumulate(U, comp.cm_cost + rl, u, horizon, M)
                loss[k, j, a, seg] = _cumulate(U, rl, u, horizon, M)
                count[k, j, a, seg] = _cumulate(U, 1.0, u, horizon, M)
                if deltas:
                    after = np.where(fin, R(np.minimum(Uc + comp.cm_duration,
                                                       R.life + R.gamma_bar)), 0.0)
                    for d in deltas:
                        w = np.minimum(comp.cm_cost - d * comp.component_cost + rl, after)
                        eol[d][k, j, a, seg] = _cumulate(U, w, u, horizon, M)
                if at_end:
                    continue
                shift = _expected_last_shift(U, u, end, M)
                p_comp[k, j, a, a:L + 1] = _fraction_row(shift)
                p_comp[k, j, a, L + 1] = 0.0
            if at_end:
                continue
            farm_mats.extend(turb_mats)
            if k is not None:
                shift = _expected_last_shift(_sorted_union(turb_mats), u, end, M)
                p_turb[k, a, a:L + 1] = _fraction_row(shift)
                p_turb[k, a, L + 1] = 0.0
        if at_end:
            continue
        shift = _expected_last_shift(_sorted_union(farm_mats), u, end, M)
        p_farm[a, a:L + 1] = _fraction_row(shift)
        p_farm[a, L + 1] = 0.0

    fresh_tail = {}
    for v in fresh_tail_steps:
        if not start <= v <= horizon:
            raise ConfigurationError(f"tail step {v} outside [{start}, {horizon}]")
        for i in turbines:
            for j, comp in enumerate(farm.components):
                if start < v <= end and (rows is None or v in row_steps):
                    fresh_tail[i, j, v] = float(phi[k_of[i], j, v - start, HS])
                elif v == horizon:
                    fresh_tail[i, j, v] = 0.0
                else:
                    U = _pool(farm, i, j, v, 0.0, horizon, mc, tag=1)
                    fin = np.isfinite(U)
                    rl = np.where(fin, R.loss(np.where(fin, U, 0.0), comp.cm_duration), 0.0)
                    fresh_tail[i, j, v] = float(_cumulate(U, comp.cm_cost + rl, v, horizon, M)[-1])

    return Estimates(start, end, horizon, turbines, M, phi, loss, count, eol, p_comp, p_turb,
                     p_farm, fresh_tail)


def estimates_for(variant: Variant, farm: Farm, ages, R: RevenueFunction, mc: McSettings,
                  turbines=None, rows=None) -> Estimates:
    deltas = ()
    if variant.kind == END_OF_LIFE:
        deltas = (0.0,)
    elif variant.kind == DELTA_INSURANCE and variant.base == END_OF_LIFE:
        deltas = (variant.delta,)
    tail = ()
    if variant.kind == NORMAL_PHASE:
        g = math.floor(farm.pm_duration)
        tail = tuple(t - 1 for t in range(variant.end + 1 - g, variant.end + 2))
    return estimate(farm, ages, variant.start, variant.end, variant.horizon, R, mc,
                    turbines=turbines, eol_deltas=deltas, fresh_tail_steps=tail, rows=rows)


def merge_rows(base: Estimates, update: Estimates, rows) -> Estimates:
    """Copy of ``base`` with the given start-step rows taken from ``update``."""
    out = Estimates(base.start, base.end, base.horizon, base.turbines, base.samples,
                    base.phi.copy(), base.loss.copy(), base.count.copy(),
                    {d: v.copy() for d, v in base.eol.items()}, base.p_comp.copy(),
                    base.p_turb.copy(), base.p_farm.copy(), dict(base.fresh_tail))
    for u in rows:
        a = u - base.start
        for name in ("phi", "loss", "count", "p_comp", "p_turb"):
            getattr(out, name)[:, ..., a, :] = getattr(update, name)[:, ..., a, :]
        for d in out.eol:
            # levels absent from the update are invalidated rather than left stale
            out.eol[d][:, :, a, :] = update.eol[d][:, :, a, :] if d in update.eol else np.nan
        out.p_farm[a, :] = update.p_farm[a, :]
    return out


def window_slice(est: Estimates, start: int, end: int | None = None,
                 horizon: int | None = None) -> Estimates:
    """Restrict estimates to the sub-window ``[start, end]`` (rows u >= start).

    Valid because rows u > original start assume age 0, which does not depend
    on the original window.  Fractions at the new window end are reset to the
    end-of-window convention; the caller must recompute row ``start`` when the
    component ages there are not zero.  ``horizon`` defaults to ``end`` when
    the source horizon coincides with its window end, else to the source
    horizon.  New-component tail costs are filled in for every step of the
    sub-window from the age-0 rows.
    """
    end = est.end if end is None else end
    if not est.start <= start < end <= est.end:
        raise ConfigurationError("sub-window outside estimated window")
    if horizon is None:
        horizon = end if (end != est.end and est.horizon == est.end) else est.horizon
    if not end <= horizon <= est.horizon:
        raise ConfigurationError(f"horizon {horizon} outside [{end}, {est.horizon}]")
    a = start - est.start
    b = end - est.start
    hb = horizon - est.start
    pe = slice(a, b + 1)

    def cut_p(arr):
        out = np.concatenate([arr[..., pe], np.zeros(arr.shape[:-1] + (1,))], axis=-1)
        return out[..., a:b + 1, :].copy()

    p_comp = cut_p(est.p_comp)
    p_turb = cut_p(est.p_turb)
    p_farm = cut_p(est.p_farm)
    for arr in (p_comp, p_turb, p_farm):
        idx = np.arange(b - a + 1)
        mask = np.arange(b - a + 2)[None, :] <= idx[:, None]
        arr[..., mask] = np.nan
        arr[..., b - a + 1] = 0.0
    phi = est.phi[:, :, a:b + 1, a:hb + 1].copy()
    tail = {key: v for key, v in est.fresh_tail.items() if start <= key[2] <= horizon}
    for k, i in enumerate(est.turbines):
        for j in range(phi.shape[1]):
            for v in range(start + 1, end + 1):
                tail[i, j, v] = float(phi[k, j, v - start, horizon - start])
            tail[i, j, horizon] = 0.0
    return Estimates(
        start, end, horizon, est.turbines, est.samples,
        phi, est.loss[:, :, a:b + 1, a:hb + 1].copy(),
        est.count[:, :, a:b + 1, a:hb + 1].copy(),
        {d: v[:, :, a:b + 1, a:hb + 1].copy() for d, v in est.eol.items()},
        p_comp, p_turb, p_farm, tail,
    )


def replicate_slots(est: Estimates, turbines) -> Estimates:
    """Copy the single slot of ``est`` onto every turbine in ``turbines``.

    Used when all rows except the first are age-0 rows, which are identical
    in distribution for every turbine.
    """
    if len(est.turbines) != 1:
        raise ConfigurationError("replicate_slots needs single-slot estimates")
    turbines = tuple(turbines)
    K = len(turbines)
    src = est.turbines[0]

    def rep(arr):
        return np.repeat(arr, K, axis=0)

    tail = {(i, j, v): val for (t0, j, v), val in est.fresh_tail.items() if t0 == src
            for i in turbines}
    return Estimates(est.start, est.end, est.horizon, turbines, est.samples,
                     rep(est.phi), rep(est.loss), rep(est.count),
                     {d: rep(v) for d, v in est.eol.items()}, rep(est.p_comp),
                     rep(est.p_turb), est.p_farm.copy(), tail)


# ----------------------------------------------------------------------------
# single-cell convenience wrappers


def _single(farm, i, j, u, t, age, R, mc, horizon=None):
    horizon = t if horizon is None else horizon
    ages = np.zeros((farm.n_turbines, farm.n_components))
    ages[i, j] = age
    return estimate(farm, ages, u, t, horizon, R, mc, turbines=(i,), rows=(u,))


def estimate_phi(farm: Farm, i: int, j: int, u: int, t: int, age: float, R: RevenueFunction,
                 mc: McSettings) -> float:
    """Expected CM cost (component, logistics and downtime revenue) over [u, t]."""
    est = _single(farm, i, j, u, t, age, R, mc)
    return float(est.phi[0, j, 0, t - u])


def estimate_p_component(farm: Farm, i: int, j: int, u: int, t: int, age: float,
                         R: RevenueFunction, mc: McSettings) -> float:
    est = _single(farm, i, j, u, t, age, R, mc)
    return float(est.p_comp[0, j, 0, t - u])


def estimate_p_turbine(farm: Farm, i: int, u: int, t: int, ages, R: RevenueFunction,
                       mc: McSettings) -> float:
    est = estimate(farm, ages, u, t, t, R, mc, turbines=(i,), rows=(u,))
    return float(est.p_turb[0, 0, t - u])


def estimate_p_farm(farm: Farm, u: int, t: int, ages, R: RevenueFunction, mc: McSettings) -> float:
    est = estimate(farm, ages, u, t, t, R, mc, turbines=(0,), rows=(u,))
    return float(est.p_farm[0, t - u])


def estimate_cm_downtime_loss(farm: Farm, i: int, j: int, u: int, t: int, cap: int, age: float,
                              R: RevenueFunction, mc: McSettings) -> float:
    """Expected revenue lost to CM downtime for failures up to min(t, cap)."""
    hi = min(t, cap)
    if hi <= u:
        return 0.0
    est = _single(farm, i, j, u, hi, age, R, mc)
    return float(est.loss[0, j, 0, hi - u])


def estimate_expected_failure_count(farm: Farm, i: int, j: int, u: int, t: int, cap: int,
                                    age: float, R: RevenueFunction, mc: McSettings) -> float:
    hi = min(t, cap)
    if hi <= u:
        return 0.0
    est = _single(farm, i, j, u, hi, age, R, mc)
    return float(est.count[0, j, 0, hi - u])


# ----------------------------------------------------------------------------
# tensors


@dataclass(eq=False)
class CostTensor:
    """Interval costs ``values[k, j, u - start, t - start]`` for t = start..end+1.

    Entries with t <= u are nan.  ``turbines[k]`` names the farm turbine of
    slot ``k``.
    """

    label: str
    start: int
    end: int
    turbines: tuple[int, ...]
    values: np.ndarray

    def cell(self, k: int, j: int, u: int, t: int) -> float:
        return float(self.values[k, j, u - self.start, t - self.start])

    def to_csv(self, handle=None) -> str:
        buf = io.StringIO() if handle is None else handle
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["variant", "i", "j", "u", "t", "value_k"])
        K, N, Lu, Lt = self.values.shape
        for k in range(K):
            for j in range(N):
                for a in range(Lu):
                    for b in range(a + 1, Lt):
                        w.writerow([self.label, self.turbines[k], j, self.start + a,
                                    self.start + b, repr(float(self.values[k, j, a, b]))])
        return buf.getvalue() if handle is None else ""

    @classmethod
    def from_csv(cls, text: str) -> "CostTensor":
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows:
            raise ConfigurationError("empty cost tensor file")
        labels = {r["variant"] for r in rows}
        if len(labels) != 1:
            raise ConfigurationError(f"tensor file mixes variants {sorted(labels)}")
        us = [int(r["u"]) for r in rows]
        ts = [int(r["t"]) for r in rows]
        start, end = min(us), max(ts) - 1
        turbines = tuple(sorted({int(r["i"]) for r in rows}))
        n = max(int(r["j"]) for r in rows) + 1
        vals = np.full((len(turbines), n, end - start + 1, end - start + 2), np.nan)
        kmap = {i: k for k, i in enumerate(turbines)}
        for r, u, t in zip(rows, us, ts):
            vals[kmap[int(r["i"])], int(r["j"]), u - start, t - start] = float(r["value_k"])
        return cls(labels.pop(), start, end, turbines, vals)


def _pm_fraction_term(farm: Farm, est: Estimates) -> np.ndarray:
    lam = np.array([c.pm_cost for c in farm.components])
    return lam[None, :, None, None] * est.p_comp


def build_cost_tensor(variant: Variant, farm: Farm, est: Estimates) -> CostTensor:
    """Interval costs of ``variant`` from shared-path estimates."""
    if (est.start, est.end) != (variant.start, variant.end) or est.horizon != variant.horizon:
        raise ConfigurationError(
            f"estimates cover [{est.start}, {est.end}]/H={est.horizon}, variant needs "
            f"[{variant.start}, {variant.end}]/H={variant.horizon}")
    s, e = variant.start, variant.end
    L = e - s
    K, n = len(est.turbines), farm.n_components
    vals = np.full((K, n, L + 1, L + 2), np.nan)
    pm = _pm_fraction_term(farm, est)

    if variant.kind == FULL_CONTRACT or (variant.kind == DELTA_INSURANCE and variant.base == FULL_CONTRACT):
        cm = est.phi
        if variant.kind == DELTA_INSURANCE and variant.delta:
            lam_hat = np.array([c.component_cost for c in farm.components])
            cm = est.phi - variant.delta * lam_hat[None, :, None, None] * est.count
        body, tail = cm[..., : L + 1], cm[..., L]
    elif variant.kind == END_OF_LIFE or variant.kind == DELTA_INSURANCE:
        d = 0.0 if variant.kind == END_OF_LIFE else variant.delta
        if d not in est.eol:
            raise ConfigurationError(f"estimates lack end-of-life costs for delta={d}")
        cm = est.eol[d]
        body, tail = cm[..., : L + 1], cm[..., L]
    elif variant.kind == NORMAL_PHASE:
        body = est.phi[..., : L + 1]
        tail = None
    else:  # pragma: no cover - guarded by Variant
        raise ConfigurationError(variant.kind)

    for a in range(L + 1):
        vals[:, :, a, a + 1:L + 1] = body[:, :, a, a + 1:L + 1] + pm[:, :, a, a + 1:L + 1]

    if variant.kind == NORMAL_PHASE:
        g = math.floor(farm.pm_duration)
        HS = est.horizon - s
        for t in range(e + 1 - g, e + 2):
            for a in range(0, t - s):
                for k, i in enumerate(est.turbines):
                    for j in range(n):
                        vals[k, j, a, t - s] = est.phi[k, j, a, HS] - est.fresh_tail[i, j, t - 1]
    else:
        vals[:, :, :, L + 1] = tail

    return CostTensor(variant.label, s, e, est.turbines, vals)


def occasion_coefficients(farm: Farm, R: RevenueFunction, est: Estimates):
    """Objective coefficients of the turbine- and farm-level PM occasion variables.

    Returns ``(y_coef[k, u - s, t - s], z_coef[u - s, t - s])`` for t <= end,
    nan elsewhere.
    """
    s, e = est.start, est.end
    t = np.arange(s, e + 1)
    turbine_unit = farm.turbine_cost_at(t) + R.loss(np.minimum(t, R.life), farm.pm_duration)
    y = est.p_turb[:, :, : e - s + 1] * turbine_unit[None, None, :]
    z = est.p_farm[:, : e - s + 1] * farm.farm_cost_at(t)[None, :]
    return y, z


def availability_coefficients(kind: str, farm: Farm, R: RevenueFunction, est: Estimates):
    """Left-hand-side coefficients of the availability row and its per-turbine budget unit.

    Returns ``(x_coef[k, j, u, t], y_coef[k, u, t], unit)`` where the right-hand
    side is ``epsilon * m * unit``.
    """
    s, e = est.start, est.end
    L = e - s
    capped = np.concatenate(
        [np.arange(L + 1), [L]])  # t - s capped at e
    t = np.arange(s, e + 1)
    if kind == "production":
        x = est.loss[..., capped]
        y_unit = R.loss(t, farm.pm_duration)
        unit = float(R.loss(s, e - s))
    elif kind == "time":
        gam = np.array([c.cm_duration for c in farm.components])
        x = est.count[..., capped] * gam[None, :, None, None]
        y_unit = np.full(t.shape, farm.pm_duration)
        unit = float(e - s)
    else:
        raise ConfigurationError(f"unknown availability kind {kind!r}")
    x = x.copy()
    for a in range(L + 1):
        x[:, :, a, : a + 1] = np.nan
    y = est.p_turb[:, :, : L + 1] * y_unit[None, None, :]
    return x, y, unit
