"""Integer program over PM intervals: variables, schedule polytope, objective.

Variables (all binary in the formulation):

* ``x[k, j, u, t]`` -- component j of turbine slot k has consecutive PMs at u
  and t (t = end + 1 means "no further PM in the window"),
* ``y[k, u, t]``    -- turbine slot k has a PM occasion at t following one at u,
* ``z[u, t]``       -- farm PM occasion at t following one at u.

A turbine slot either is a single turbine or stands for a class of identical
turbines (``multiplicity`` > 1); per-turbine costs are scaled accordingly while
farm-level costs are charged once.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .revenue import ConfigurationError


@dataclass(eq=False)
class IlpModel:
    start: int
    end: int
    n_slots: int
    n_components: int
    multiplicity: np.ndarray
    turbines: tuple  # representative farm turbine per slot
    c: np.ndarray
    A_eq: sp.csr_matrix
    b_eq: np.ndarray
    A_ub: sp.csr_matrix
    b_ub: np.ndarray
    row_names_eq: list
    row_names_ub: list
    label: str = ""
    meta: dict = field(default_factory=dict)

    # --- index arithmetic -------------------------------------------------
    @property
    def length(self) -> int:
        return self.end - self.start

    @property
    def n_pairs(self) -> int:
        L = self.length
        return (L + 1) * (L + 2) // 2

    @property
    def n_ypairs(self) -> int:
        L = self.length
        return L * (L + 1) // 2

    @property
    def n_x(self) -> int:
        return self.n_slots * self.n_components * self.n_pairs

    @property
    def n_y(self) -> int:
        return self.n_slots * self.n_ypairs

    @property
    def n_vars(self) -> int:
        return self.n_x + self.n_y + self.n_ypairs

    def pair_arrays(self):
        return _pairs(self.length)

    def x_col(self, k: int, j: int, u: int, t: int) -> int:
        a, b = u - self.start, t - self.start
        if not 0 <= a < b <= self.length + 1:
            raise IndexError(f"no x variable for interval ({u}, {t})")
        return (k * self.n_components + j) * self.n_pairs + _pair_id(a, b, self.length + 1)

    def y_col(self, k: int, u: int, t: int) -> int:
        a, b = u - self.start, t - self.start
        if not 0 <= a < b <= self.length:
            raise IndexError(f"no y variable for interval ({u}, {t})")
        return self.n_x + k * self.n_ypairs + _pair_id(a, b, self.length)

    def z_col(self, u: int, t: int) -> int:
        a, b = u - self.start, t - self.start
        if not 0 <= a < b <= self.length:
            raise IndexError(f"no z variable for interval ({u}, {t})")
        return self.n_x + self.n_y + _pair_id(a, b, self.length)

    def column_names(self) -> list[str]:
        a, b = self.pair_arrays()
        ya, yb = _ypairs(self.length)
        s = self.start
        names = []
        for k in range(self.n_slots):
            for j in range(self.n_components):
                names.extend(f"x_{k}_{j}_{s + u}_{s + t}" for u, t in zip(a, b))
        for k in range(self.n_slots):
            names.extend(f"y_{k}_{s + u}_{s + t}" for u, t in zip(ya, yb))
        names.extend(f"z_{s + u}_{s + t}" for u, t in zip(ya, yb))
        return names

    def objective(self, v) -> float:
        return float(self.c @ np.asarray(v, dtype=float))


def _pair_id(a: int, b: int, top: int) -> int:
    """Index of (a, b), 0 <= a < b <= top, in row-major order over a then b."""
    # rows a' < a contribute (top - a') pairs each
    return a * top - a * (a - 1) // 2 + (b - a - 1)


def _pairs(L: int):
    """All (a, b) with 0 <= a < b <= L + 1, ordered by a then b."""
    a = np.concatenate([np.full(L + 1 - u, u) for u in range(L + 1)]).astype(np.int64)
    b = np.concatenate([np.arange(u + 1, L + 2) for u in range(L + 1)]).astype(np.int64)
    return a, b


def _ypairs(L: int):
    """All (a, b) with 0 <= a < b <= L."""
    if L == 0:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    a = np.concatenate([np.full(L - u, u) for u in range(L)]).astype(np.int64)
    b = np.concatenate([np.arange(u + 1, L + 1) for u in range(L)]).astype(np.int64)
    return a, b


def build_polytope(start: int, end: int, n_slots: int, n_components: int,
                   multiplicity=None, turbines=None) -> IlpModel:
    """Flow-balance and linking rows of the schedule polytope (zero objective)."""
    if end <= start or start < 0:
        raise ConfigurationError(f"degenerate window [{start}, {end}]")
    if n_slots < 1 or n_components < 1:
        raise ConfigurationError("need at least one turbine and one component")
    L = end - start
    mult = np.ones(n_slots, dtype=np.int64) if multiplicity is None else np.asarray(multiplicity, np.int64)
    turbines = tuple(range(n_slots)) if turbines is None else tuple(turbines)
    a, b = _pairs(L)
    P = a.size
    ya, yb = _ypairs(L)
    Py = ya.size
    K, n = n_slots, n_components
    X = K * n * P
    Y = K * Py

    # equality rows: per (k, j) one start row then one balance row per interior step
    rows, cols, vals = [], [], []
    names_eq = []
    b_eq = []
    per_block = L + 1
    for blk in range(K * n):
        k, j = divmod(blk, n)
        base_row = blk * per_block
        base_col = blk * P
        starts = np.nonzero(a == 0)[0]
        rows.append(np.full(starts.size, base_row))
        cols.append(base_col + starts)
        vals.append(np.ones(starts.size))
        inflow = np.nonzero(b <= L)[0]
        rows.append(base_row + b[inflow])
        cols.append(base_col + inflow)
        vals.append(np.ones(inflow.size))
        outflow = np.nonzero(a >= 1)[0]
        rows.append(base_row + a[outflow])
        cols.append(base_col + outflow)
        vals.append(-np.ones(outflow.size))
        names_eq.append(f"first_{k}_{j}")
        names_eq.extend(f"flow_{k}_{j}_{start + t}" for t in range(1, L + 1))
        b_eq.extend([1.0] + [0.0] * L)
    A_eq = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(K * n * per_block, X + Y + Py))

    # linking rows: x - y <= 0 for t <= end, then y - z <= 0
    xin = np.nonzero(b <= L)[0]
    ymap = np.array([_pair_id(int(p), int(q), L) for p, q in zip(a[xin], b[xin])], dtype=np.int64)
    rows, cols, vals = [], [], []
    names_ub = []
    r = 0
    for blk in range(K * n):
        k, j = divmod(blk, n)
        cnt = xin.size
        rr = r + np.arange(cnt)
        rows += [rr, rr]
        cols += [blk * P + xin, X + k * Py + ymap]
        vals += [np.ones(cnt), -np.ones(cnt)]
        names_ub.extend(f"link_x_{k}_{j}_{start + p}_{start + q}" for p, q in zip(a[xin], b[xin]))
        r += cnt
    for k in range(K):
        rr = r + np.arange(Py)
        rows += [rr, rr]
        cols += [X + k * Py + np.arange(Py), X + Y + np.arange(Py)]
        vals += [np.ones(Py), -np.ones(Py)]
        names_ub.extend(f"link_y_{k}_{start + p}_{start + q}" for p, q in zip(ya, yb))
        r += Py
    A_ub = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(r, X + Y + Py))
    return IlpModel(start, end, K, n, mult, turbines, np.zeros(X + Y + Py), A_eq,
                    np.asarray(b_eq), A_ub, np.zeros(r), names_eq, names_ub)


def _flatten_x(model: IlpModel, arr) -> np.ndarray:
    """Flatten a ``[k, j, u - s, t - s]`` array into x-column order."""
    a, b = model.pair_arrays()
    arr = np.asarray(arr, dtype=float)
    return arr[:, :, a, b].reshape(-1)


def _flatten_y(model: IlpModel, arr) -> np.ndarray:
    ya, yb = _ypairs(model.length)
    return np.asarray(arr, dtype=float)[..., ya, yb].reshape(-1)


def attach_objective(model: IlpModel, tensor, y_coef, z_coef) -> IlpModel:
    """Set the objective: interval costs on x plus PM-occasion costs on y and z.

    ``tensor`` is a :class:`~windpm.costs.CostTensor` (or raw array) indexed
    ``[k, j, u - s, t - s]``; ``y_coef[k, u - s, t - s]`` and
    ``z_coef[u - s, t - s]`` are per single turbine / per farm.
    """
    vals = getattr(tensor, "values", tensor)
    if getattr(tensor, "start", model.start) != model.start or getattr(tensor, "end", model.end) != model.end:
        raise ConfigurationError("cost tensor window does not match the model window")
    vals = np.asarray(vals)
    if vals.shape[:2] != (model.n_slots, model.n_components):
        raise ConfigurationError(f"tensor shape {vals.shape} does not match model slots/components")
    mult = model.multiplicity.astype(float)
    cx = _flatten_x(model, vals * mult[:, None, None, None])
    cy = _flatten_y(model, np.asarray(y_coef) * mult[:, None, None])
    cz = _flatten_y(model, z_coef)
    c = np.concatenate([cx, cy, cz])
    if not np.all(np.isfinite(c)):
        raise ConfigurationError("objective has non-finite coefficients")
    model.c = c
    model.label = getattr(tensor, "label", model.label)
    return model


def attach_availability(model: IlpModel, kind: str, epsilon: float, x_coef, y_coef,
                        unit: float, n_turbines: int | None = None) -> IlpModel:
    """Append the expected-availability row.

    ``x_coef``/``y_coef`` are per-turbine downtime (revenue or months); the
    budget is ``epsilon * n_turbines * unit`` where ``unit`` is the revenue
    (or time) of one fully functioning turbine over the window.
    """
    if kind not in ("production", "time"):
        raise ConfigurationError(f"unknown availability kind {kind!r}")
    if not 0.0 < epsilon <= 1.0:
        raise ConfigurationError("epsilon must lie in (0, 1]")
    m = int(model.multiplicity.sum()) if n_turbines is None else n_turbines
    mult = model.multiplicity.astype(float)
    row = np.concatenate([
        _flatten_x(model, np.asarray(x_coef) * mult[:, None, None, None]),
        _flatten_y(model, np.asarray(y_coef) * mult[:, None, None]),
        np.zeros(model.n_ypairs),
    ])
    row = np.nan_to_num(row)
    model.A_ub = sp.vstack([model.A_ub, sp.csr_matrix(row)], format="csr")
    model.b_ub = np.append(model.b_ub, epsilon * m * unit)
    model.row_names_ub.append(f"availability_{kind}")
    model.meta["availability"] = (kind, epsilon)
    return model


# ----------------------------------------------------------------------------
# schedules


@dataclass(frozen=True)
class Schedule:
    """PM months per (turbine slot, component); an empty tuple means no PM."""

    start: int
    end: int
    plans: tuple  # plans[k][j] -> tuple of months

    @property
    def n_slots(self) -> int:
        return len(self.plans)

    def months(self, k: int, j: int) -> tuple:
        return self.plans[k][j]

    def stops(self) -> tuple:
        """Distinct farm PM months."""
        return tuple(sorted({t for row in self.plans for ms in row for t in ms}))

    def key(self) -> tuple:
        return tuple(ms for row in self.plans for ms in row)


def validate_schedule(schedule: Schedule, start: int | None = None, end: int | None = None):
    start = schedule.start if start is None else start
    end = schedule.end if end is None else end
    for k, row in enumerate(schedule.plans):
        for j, months in enumerate(row):
            prev = start
            for t in months:
                if not (isinstance(t, (int, np.integer)) and prev < t <= end):
                    raise ConfigurationError(
                        f"slot {k} component {j}: PM months {months} not strictly increasing in "
                        f"({start}, {end}]")
                prev = t


def encode_schedule(model: IlpModel, schedule: Schedule) -> np.ndarray:
    """Binary vector with tight linking (y = max_j x, z = max_k y)."""
    validate_schedule(schedule, model.start, model.end)
    if schedule.n_slots != model.n_slots:
        raise ConfigurationError("schedule and model disagree on turbine slots")
    v = np.zeros(model.n_vars)
    for k, row in enumerate(schedule.plans):
        for j, months in enumerate(row):
            chain = (model.start,) + tuple(int(t) for t in months) + (model.end + 1,)
            for u, t in zip(chain[:-1], chain[1:]):
                v[model.x_col(k, j, u, t)] = 1.0
                if t <= model.end:
                    v[model.y_col(k, u, t)] = 1.0
                    v[model.z_col(u, t)] = 1.0
    return v


def decode_schedule(model: IlpModel, v, tol: float = 1e-6) -> Schedule:
    """Follow the unit flow of each component from the window start."""
    v = np.asarray(v, dtype=float)
    a, b = model.pair_arrays()
    P = model.n_pairs
    plans = []
    for k in range(model.n_slots):
        row = []
        for j in range(model.n_components):
            blk = v[(k * model.n_components + j) * P:(k * model.n_components + j + 1) * P]
            on = np.nonzero(blk > 0.5)[0]
            if np.any(np.abs(blk - np.round(blk)) > tol):
                raise ConfigurationError("x is not integral")
            nxt = {int(a[p]): int(b[p]) for p in on}
            if len(nxt) != on.size:
                raise ConfigurationError(f"slot {k} component {j}: branching flow")
            months = []
            cur = 0
            while cur != model.length + 1:
                if cur not in nxt:
                    raise ConfigurationError(f"slot {k} component {j}: broken chain at {cur}")
                cur = nxt.pop(cur)
                if cur <= model.length:
                    months.append(model.start + cur)
            if nxt:
                raise ConfigurationError(f"slot {k} component {j}: stray intervals {nxt}")
            row.append(tuple(months))
        plans.append(tuple(row))
    return Schedule(model.start, model.end, tuple(plans))


def schedule_objective(model: IlpModel, schedule: Schedule) -> float:
    return model.objective(encode_schedule(model, schedule))


def check_feasible(model: IlpModel, v, tol: float = 1e-9) -> bool:
    v = np.asarray(v, dtype=float)
    ok_eq = np.all(np.abs(model.A_eq @ v - model.b_eq) <= tol)
    ok_ub = np.all(model.A_ub @ v - model.b_ub <= tol * np.maximum(1.0, np.abs(model.b_ub)))
    return bool(ok_eq and ok_ub and np.all(v >= -tol) and np.all(v <= 1 + tol))


# ----------------------------------------------------------------------------
# turbine classes


@dataclass(frozen=True)
class TurbineClasses:
    """Partition of the farm's turbines into classes with identical states."""

    members: tuple  # members[k] -> tuple of farm turbine indices

    @property
    def representatives(self) -> tuple:
        return tuple(m[0] for m in self.members)

    @property
    def multiplicity(self) -> np.ndarray:
        return np.array([len(m) for m in self.members], dtype=np.int64)

    @property
    def n_turbines(self) -> int:
        return sum(len(m) for m in self.members)

    def expand(self, schedule: Schedule) -> Schedule:
        """Per-turbine schedule replicating each class plan to its members."""
        plans = [None] * self.n_turbines
        for k, mem in enumerate(self.members):
            for i in mem:
                plans[i] = schedule.plans[k]
        return Schedule(schedule.start, schedule.end, tuple(plans))


def group_turbines(ages, decimals: int = 9) -> TurbineClasses:
    """Group turbines whose component-age rows coincide (first occurrence order)."""
    ages = np.round(np.asarray(ages, dtype=float), decimals)
    groups: dict = {}
    for i, row in enumerate(ages):
        groups.setdefault(tuple(row), []).append(i)
    return TurbineClasses(tuple(tuple(v) for v in groups.values()))


def symmetry_reduce(ages) -> TurbineClasses:
    """Single-class reduction for a farm of identical turbines.

    Raises ConfigurationError when the turbines are not all in the same state.
    """
    classes = group_turbines(ages)
    if len(classes.members) != 1:
        raise ConfigurationError("symmetry reduction needs identical turbines")
    return classes
