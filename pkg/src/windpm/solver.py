"""Exact solution of :class:`~windpm.model.IlpModel` instances.

The built-in solver is a best-first branch and bound over the LP relaxation
(HiGHS through ``scipy.optimize.linprog``).  Only x is branched on: once x is
integral, the cheapest y and z are max-links of x, which are integral.
"""
from __future__ import annotations

import heapq
import io
import itertools
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .model import (IlpModel, Schedule, _ypairs, decode_schedule, encode_schedule,
                    validate_schedule)
from .revenue import ConfigurationError

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    """The LP engine failed, or the model is infeasible."""


class Infeasible(SolverError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    abs_gap: float = 1e-6
    rel_gap: float = 1e-9
    node_limit: int = 20_000
    time_limit: float = 3600.0
    int_tol: float = 1e-6


@dataclass
class Solution:
    values: np.ndarray
    objective: float
    bound: float
    optimal: bool
    nodes: int
    runtime: float
    schedule: Schedule | None = None
    status: str = "optimal"

    @property
    def gap(self) -> float:
        return max(0.0, self.objective - self.bound)


# ----------------------------------------------------------------------------
# LP relaxation


def _solve_lp(model: IlpModel, lb: np.ndarray, ub: np.ndarray):
    res = linprog(model.c, A_ub=model.A_ub, b_ub=model.b_ub, A_eq=model.A_eq, b_eq=model.b_eq,
                  bounds=np.column_stack([lb, ub]), method="highs-ds")
    if res.status == 2:
        return None, math.inf
    if res.status != 0:
        raise SolverError(f"LP relaxation failed: {res.message}")
    return res.x, float(res.fun)


def lp_relax(model: IlpModel) -> float:
    """Lower bound from the [0, 1] box relaxation; +inf if infeasible."""
    _, val = _solve_lp(model, np.zeros(model.n_vars), np.ones(model.n_vars))
    return val


def _tight(model: IlpModel, v: np.ndarray):
    """Round x, max-link y and z; returns (vector, schedule) or None if x is not a valid chain set."""
    x = np.round(v[: model.n_x])
    try:
        sched = decode_schedule(model, np.concatenate([x, np.zeros(model.n_vars - model.n_x)]))
    except ConfigurationError:
        return None
    return encode_schedule(model, sched), sched


def _feasible_rows(model: IlpModel, v: np.ndarray) -> bool:
    return bool(np.all(model.A_ub @ v <= model.b_ub + 1e-9 * np.maximum(1.0, np.abs(model.b_ub))))


# ----------------------------------------------------------------------------
# branch and bound


def solve_exact(model: IlpModel, config: SolverConfig = SolverConfig()) -> Solution:
    """Best-bound branch and bound with deterministic node order.

    Nodes are expanded by smallest LP bound, ties by greater depth, then by
    creation order.  The branching variable is the most fractional x (lowest
    index on ties), 1-branch first.  Among incumbents with equal objective the
    lexicographically smallest PM-month vector is kept.
    """
    t0 = time.perf_counter()
    n = model.n_vars
    counter = itertools.count()
    best_v, best_sched, best_obj = None, None, math.inf
    root_lb, root_ub = np.zeros(n), np.ones(n)

    def cutoff():
        if math.isinf(best_obj):
            return math.inf
        return best_obj - (config.abs_gap + config.rel_gap * abs(best_obj))

    def consider(v):
        nonlocal best_v, best_sched, best_obj
        tight = _tight(model, v)
        if tight is None:
            return
        vec, sched = tight
        if not _feasible_rows(model, vec):
            return
        obj = model.objective(vec)
        tol = config.abs_gap + config.rel_gap * abs(obj)
        if obj < best_obj - tol or (abs(obj - best_obj) <= tol and sched.key() < best_sched.key()):
            best_v, best_sched, best_obj = vec, sched, obj

    x0, val0 = _solve_lp(model, root_lb, root_ub)
    if x0 is None:
        raise Infeasible("model is infeasible")
    # rounded root point: an incumbent even if the limits stop the search at once
    consider(x0)
    heap = [(val0, 0, next(counter), {}, x0)]
    nodes = 1  # the root relaxation
    global_bound = val0
    status = "optimal"
    while heap:
        bound, negdepth, _, fix, v = heapq.heappop(heap)
        global_bound = bound
        if bound >= cutoff():
            global_bound = best_obj
            heap.clear()
            break
        if negdepth:
            nodes += 1
        if nodes > config.node_limit or time.perf_counter() - t0 > config.time_limit:
            status = "limit"
            heapq.heappush(heap, (bound, negdepth, next(counter), fix, v))
            break
        xs = v[: model.n_x]
        frac = np.abs(xs - np.round(xs))
        if frac.max(initial=0.0) <= config.int_tol:
            consider(v)
            continue
        # cheap incumbent: round the LP point
        consider(v)
        dist = np.abs(xs - 0.5)
        var = int(np.argmin(np.where(frac > config.int_tol, dist, np.inf)))
        for val in (1.0, 0.0):
            child = dict(fix)
            child[var] = val
            lb, ub = root_lb.copy(), root_ub.copy()
            idx = np.fromiter(child.keys(), dtype=np.int64)
            fixed = np.fromiter(child.values(), dtype=float)
            lb[idx] = fixed
            ub[idx] = fixed
            cv, cval = _solve_lp(model, lb, ub)
            if cv is None:
                continue
            if cval < cutoff():
                heapq.heappush(heap, (cval, negdepth - 1, next(counter), child, cv))
    if best_v is None:
        raise Infeasible("no integral solution found" + (" within limits" if status == "limit" else ""))
    if heap:
        global_bound = min(global_bound, min(h[0] for h in heap))
    optimal = status == "optimal"
    sol = Solution(values=best_v, objective=best_obj, bound=min(global_bound, best_obj),
                   optimal=optimal, nodes=nodes, runtime=time.perf_counter() - t0,
                   schedule=best_sched, status=status)
    log.info("B&B %s: obj=%.6f nodes=%d %.2fs", status, best_obj, nodes, sol.runtime)
    return sol


# ----------------------------------------------------------------------------
# brute force oracle


def _chains(start: int, end: int):
    steps = range(start + 1, end + 1)
    for r in range(len(steps) + 1):
        yield from itertools.combinations(steps, r)


def brute_force_solve(model: IlpModel, max_candidates: int = 10**7) -> Solution:
    """Enumerate every combination of per-component PM month sets."""
    t0 = time.perf_counter()
    L = model.length
    blocks = model.n_slots * model.n_components
    total = 2 ** (L * blocks)
    if total > max_candidates:
        raise ConfigurationError(f"{total} candidate schedules exceed the limit {max_candidates}")
    s = model.start
    Py = model.n_ypairs
    cx = model.c[: model.n_x]
    cy = model.c[model.n_x: model.n_x + model.n_y].reshape(model.n_slots, Py)
    cz = model.c[model.n_x + model.n_y:]
    extra_rows = "availability" in model.meta
    chains = list(_chains(s, model.end))

    # per (slot, component) chain: x cost and set of occasion pairs it opens
    pre = []
    for k in range(model.n_slots):
        for j in range(model.n_components):
            opts = []
            for ch in chains:
                full = (s,) + ch + (model.end + 1,)
                cost = sum(cx[model.x_col(k, j, u, t)] for u, t in zip(full[:-1], full[1:]))
                pairs = frozenset(model.z_col(u, t) - model.n_x - model.n_y
                                  for u, t in zip(full[:-1], full[1:]) if t <= model.end)
                opts.append((ch, cost, pairs))
            pre.append(opts)

    best = (math.inf, None)
    n = model.n_components
    for combo in itertools.product(*pre):
        obj = 0.0
        farm_pairs = set()
        for k in range(model.n_slots):
            turb_pairs = set()
            for j in range(n):
                _, cost, pairs = combo[k * n + j]
                obj += cost
                turb_pairs |= pairs
            obj += sum(cy[k, p] for p in turb_pairs)
            farm_pairs |= turb_pairs
        obj += sum(cz[p] for p in farm_pairs)
        if obj > best[0] + 1e-9 * max(1.0, abs(best[0])):
            continue
        key = tuple(c[0] for c in combo)
        sched = Schedule(s, model.end, tuple(
            tuple(key[k * n:(k + 1) * n]) for k in range(model.n_slots)))
        if extra_rows and not _feasible_rows(model, encode_schedule(model, sched)):
            continue
        tol = 1e-9 * max(1.0, abs(obj))
        if obj < best[0] - tol or best[1] is None or sched.key() < best[1].key():
            best = (obj, sched)
    if best[1] is None:
        raise Infeasible("no feasible schedule")
    vec = encode_schedule(model, best[1])
    return Solution(values=vec, objective=model.objective(vec), bound=model.objective(vec),
                    optimal=True, nodes=total, runtime=time.perf_counter() - t0,
                    schedule=best[1], status="enumerated")


# ----------------------------------------------------------------------------
# schedules from solutions


def extract_schedule(solution: Solution, model: IlpModel) -> Schedule:
    sched = decode_schedule(model, solution.values)
    validate_schedule(sched, model.start, model.end)
    return sched


def check_linking(model: IlpModel, v, tol: float = 1e-9) -> bool:
    """True when y = max_j x and z = max_k y hold on the t <= end intervals."""
    v = np.asarray(v, dtype=float)
    ya, yb = _ypairs(model.length)
    s = model.start
    z = v[model.n_x + model.n_y:]
    zmax = np.zeros_like(z)
    for k in range(model.n_slots):
        y = v[model.n_x + k * model.n_ypairs: model.n_x + (k + 1) * model.n_ypairs]
        xmax = np.zeros_like(y)
        for j in range(model.n_components):
            cols = [model.x_col(k, j, s + a, s + b) for a, b in zip(ya, yb)]
            xmax = np.maximum(xmax, v[cols])
        if np.any(np.abs(y - xmax) > tol):
            return False
        zmax = np.maximum(zmax, y)
    return bool(np.all(np.abs(z - zmax) <= tol))


# ----------------------------------------------------------------------------
# MPS


def _fmt(x: float) -> str:
    return repr(float(x))


def export_mps(model: IlpModel, destination=None, name: str = "WINDPM") -> str:
    """Write the model as an MPS file (all variables binary, objective MIN).

    Fields are laid out in fixed columns but names may exceed eight
    characters; readers must accept whitespace-separated fields.
    """
    if model.A_eq.shape[0] + model.A_ub.shape[0] == 0:
        raise ConfigurationError("model has no constraints")
    names = model.column_names()
    rows_eq, rows_ub = model.row_names_eq, model.row_names_ub
    A = sp.vstack([model.A_eq, model.A_ub], format="csc")
    row_names = rows_eq + rows_ub
    out = io.StringIO()
    w = out.write
    w(f"NAME          {name}\n")
    w("OBJSENSE\n    MIN\n")
    w("ROWS\n")
    w(" N  COST\n")
    for r in rows_eq:
        w(f" E  {r}\n")
    for r in rows_ub:
        w(f" L  {r}\n")
    w("COLUMNS\n")
    w("    MARKER                 'MARKER'                 'INTORG'\n")
    for col in range(model.n_vars):
        nm = names[col]
        if model.c[col] != 0.0:
            w(f"    {nm:<24}  {'COST':<24}  {_fmt(model.c[col])}\n")
        lo, hi = A.indptr[col], A.indptr[col + 1]
        for r, val in zip(A.indices[lo:hi], A.data[lo:hi]):
            w(f"    {nm:<24}  {row_names[r]:<24}  {_fmt(val)}\n")
    w("    MARKER                 'MARKER'                 'INTEND'\n")
    w("RHS\n")
    for r, val in zip(row_names, np.concatenate([model.b_eq, model.b_ub])):
        if val != 0.0:
            w(f"    {'RHS':<24}  {r:<24}  {_fmt(val)}\n")
    w("BOUNDS\n")
    for nm in names:
        w(f" BV {'BND':<24}  {nm}\n")
    w("ENDATA\n")
    text = out.getvalue()
    if destination is not None:
        Path(destination).write_text(text)
    return text


@dataclass
class MpsProblem:
    name: str
    columns: list
    c: np.ndarray
    eq_rows: list
    A_eq: sp.csr_matrix
    b_eq: np.ndarray
    ub_rows: list
    A_ub: sp.csr_matrix
    b_ub: np.ndarray
    binary: list = field(default_factory=list)


def read_mps(source) -> MpsProblem:
    """Parse the MPS subset written by :func:`export_mps` (plus G rows)."""
    text = Path(source).read_text() if not isinstance(source, str) or "\n" not in source else source
    section = None
    name = ""
    row_kind: dict = {}
    row_order: list = []
    col_index: dict = {}
    entries: list = []
    rhs: dict = {}
    obj_row = None
    binary = []
    for line in text.splitlines():
        if not line.strip() or line.startswith("*"):
            continue
        if not line[0].isspace():
            parts = line.split()
            section = parts[0]
            if section == "NAME":
                name = parts[1] if len(parts) > 1 else ""
            continue
        parts = line.split()
        if section == "OBJSENSE":
            if parts[0] != "MIN":
                raise ConfigurationError("only minimisation is supported")
        elif section == "ROWS":
            kind, rname = parts
            if kind == "N":
                obj_row = rname
            else:
                row_kind[rname] = kind
                row_order.append(rname)
        elif section == "COLUMNS":
            if len(parts) >= 3 and parts[1] == "'MARKER'":
                continue
            col = parts[0]
            idx = col_index.setdefault(col, len(col_index))
            for rname, val in zip(parts[1::2], parts[2::2]):
                entries.append((rname, idx, float(val)))
        elif section == "RHS":
            for rname, val in zip(parts[1::2], parts[2::2]):
                rhs[rname] = float(val)
        elif section == "BOUNDS":
            if parts[0] == "BV":
                binary.append(parts[2])
    ncol = len(col_index)
    c = np.zeros(ncol)
    eq_rows = [r for r in row_order if row_kind[r] == "E"]
    ub_rows = [r for r in row_order if row_kind[r] in ("L", "G")]
    eq_pos = {r: i for i, r in enumerate(eq_rows)}
    ub_pos = {r: i for i, r in enumerate(ub_rows)}
    e_r, e_c, e_v, u_r, u_c, u_v = [], [], [], [], [], []
    for rname, idx, val in entries:
        if rname == obj_row:
            c[idx] = val
        elif rname in eq_pos:
            e_r.append(eq_pos[rname]); e_c.append(idx); e_v.append(val)
        else:
            sign = -1.0 if row_kind[rname] == "G" else 1.0
            u_r.append(ub_pos[rname]); u_c.append(idx); u_v.append(sign * val)
    A_eq = sp.csr_matrix((e_v, (e_r, e_c)), shape=(len(eq_rows), ncol))
    A_ub = sp.csr_matrix((u_v, (u_r, u_c)), shape=(len(ub_rows), ncol))
    b_eq = np.array([rhs.get(r, 0.0) for r in eq_rows])
    b_ub = np.array([rhs.get(r, 0.0) * (-1.0 if row_kind[r] == "G" else 1.0) for r in ub_rows])
    cols = sorted(col_index, key=col_index.get)
    return MpsProblem(name, cols, c, eq_rows, A_eq, b_eq, ub_rows, A_ub, b_ub, binary)
