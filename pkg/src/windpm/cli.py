"""Command-line interface: estimate, plan, simulate, price-insurance, export.

Exit codes: 0 success, 1 infeasible model or solver limit reached, 2 invalid
configuration or input.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import logging
import os
import sys

import numpy as np

from . import config as cfgmod
from .costs import (DELTA_INSURANCE, END_OF_LIFE, FULL_CONTRACT, Estimates, McSettings, Variant,
                    build_cost_tensor, estimate, estimates_for)
from .model import group_turbines
from .planning import build_model, plan
from .revenue import ConfigurationError, DomainError
from .simulate import (CONSTANT_INTERVAL, OPTIMIZED_ROLLING, Scenario, SimulationError,
                       compute_metrics, load_script, replicate, run_policy, summarize,
                       tune_constant_intervals)
from .solver import SolverError, export_mps
from .stochastic import ParameterError, SeedPolicy

log = logging.getLogger("windpm")

EXIT_OK, EXIT_SOLVER, EXIT_CONFIG = 0, 1, 2


# ----------------------------------------------------------------------------
# config + flags


def _resolved(args) -> dict:
    if args.config:
        cfg = cfgmod.load(args.config)
    else:
        cfg = cfgmod.resolve({})
    v, sim = cfg["variant"], cfg["simulation"]
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.samples is not None:
        cfg["monte_carlo"]["samples"] = args.samples
        sim["planner_samples"] = args.samples
    if args.variant is not None:
        v["kind"] = args.variant
    if args.epsilon is not None:
        v["epsilon"] = args.epsilon
    if getattr(args, "delta", None) is not None and args.command != "price-insurance":
        v["delta"] = float(args.delta)
    if args.horizon is not None:
        if args.command == "simulate":
            sim["horizon"] = args.horizon
        else:
            v["end"] = args.horizon
    if getattr(args, "policy", None) is not None:
        sim["policy"] = args.policy
    if getattr(args, "replications", None) is not None:
        sim["replications"] = args.replications
    eol_window = v["kind"] == "end-of-life" or (v["kind"] == "delta-insurance" and v["base"] == END_OF_LIFE)
    if eol_window and args.horizon is None:
        v["end"] = cfg["life"]
    errs = cfgmod.schema_errors(cfg)
    if errs:
        raise ConfigurationError("invalid options:\n  " + "\n  ".join(errs))
    cfgmod._check_months(cfg)
    return cfg


def _out_dir(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _write(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    log.info("wrote %s", path)


def _num(x) -> str:
    return repr(float(x))


# ----------------------------------------------------------------------------
# estimates with an on-disk cache


def _cache_path(args, cfg, variant: Variant, reps, deltas) -> str | None:
    if args.no_cache:
        return None
    key = json.dumps({"cfg": cfgmod.digest(cfg), "start": variant.start, "end": variant.end,
                      "horizon": variant.horizon, "kind": variant.kind, "reps": list(reps),
                      "deltas": sorted(deltas)}, sort_keys=True)
    name = hashlib.sha256(key.encode()).hexdigest()[:16]
    root = args.cache or os.path.join(args.out, "cache")
    folder = os.path.join(root, f"{cfgmod.digest(cfg)}-{cfg['seed']}")
    os.makedirs(folder, exist_ok=True)
    return os.path.join(folder, f"estimates-{name}.npz")


def _estimates(args, cfg, sc, variant: Variant, classes, deltas=None) -> Estimates:
    ages = np.zeros((sc.farm.n_turbines, sc.farm.n_components))
    reps = classes.representatives
    if deltas is None:
        deltas = (0.0,) if variant.kind == END_OF_LIFE else (
            (variant.delta,) if variant.uses_eol_cost else ())
    path = _cache_path(args, cfg, variant, reps, deltas)
    if path and os.path.exists(path):
        log.info("reusing cached estimates %s", path)
        return Estimates.load(path)
    if variant.uses_eol_cost:
        est = estimate(sc.farm, ages, variant.start, variant.end, variant.horizon, sc.revenue,
                       sc.mc, turbines=reps, eol_deltas=deltas)
    else:
        est = estimates_for(variant, sc.farm, ages, sc.revenue, sc.mc, turbines=reps)
    if path:
        est.save(path)
    return est


# ----------------------------------------------------------------------------
# commands


def cmd_estimate(args) -> int:
    cfg = _resolved(args)
    sc = cfgmod.build(cfg)
    variant = cfgmod.variant_of(cfg)
    classes = group_turbines(np.zeros((sc.farm.n_turbines, sc.farm.n_components)))
    est = _estimates(args, cfg, sc, variant, classes)
    tensor = build_cost_tensor(variant, sc.farm, est)
    path = os.path.join(_out_dir(args), "tensor.csv")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        tensor.to_csv(fh)
    print(f"{variant.label}: window [{variant.start}, {variant.end}], "
          f"{len(est.turbines)} representative turbine(s), M={est.samples} -> {path}")
    return EXIT_OK


def _schedule_rows(sc, farm_schedule):
    rows = []
    for i, comps in enumerate(farm_schedule.plans):
        for j, months in enumerate(comps):
            for t in months:
                rows.append([i + 1, sc.farm.components[j].name, t])
    return rows


def cmd_plan(args) -> int:
    cfg = _resolved(args)
    sc = cfgmod.build(cfg)
    variant = cfgmod.variant_of(cfg)
    ages = np.zeros((sc.farm.n_turbines, sc.farm.n_components))
    classes = group_turbines(ages)
    est = _estimates(args, cfg, sc, variant, classes)
    result = plan(variant, sc.farm, ages, sc.revenue, sc.mc, sc.solver, est=est, classes=classes)
    out = _out_dir(args)
    _write(os.path.join(out, "schedule.csv"), ["turbine", "component", "month"],
           _schedule_rows(sc, result.farm_schedule))
    sol = result.solution
    stops = result.stops
    _write(os.path.join(out, "plan_summary.csv"),
           ["variant", "start", "end", "objective_k", "bound_k", "status", "nodes", "farm_stops"],
           [[variant.label, variant.start, variant.end, _num(sol.objective), _num(sol.bound),
             sol.status, sol.nodes, " ".join(str(t) for t in stops)]])
    if args.export_mps:
        export_mps(result.model, args.export_mps)
    print(f"{variant.label} [{variant.start}, {variant.end}]: objective {sol.objective:.1f} k$, "
          f"farm stops {list(stops)} ({sol.status})")
    for j, comp in enumerate(sc.farm.components):
        months = sorted({t for row in result.schedule.plans for t in row[j]})
        print(f"  {comp.name:<14} {months}")
    return EXIT_OK if sol.optimal else EXIT_SOLVER


def cmd_simulate(args) -> int:
    cfg = _resolved(args)
    sc = cfgmod.build(cfg)
    sim = cfg["simulation"]
    script = ()
    if args.script:
        try:
            with open(args.script, encoding="utf-8") as fh:
                script = load_script(fh.read(), sc.component_names)
        except OSError as exc:
            raise ConfigurationError(f"cannot read script {args.script}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"script {args.script} is not valid JSON: {exc}") from exc
    scenario = Scenario(sc.farm, sc.revenue, sim["horizon"], seed=sc.seed, script=script)
    planner = McSettings(sim["planner_samples"], SeedPolicy(sc.seed), sc.mc.farm_scope)
    intervals = sim["intervals"]
    if sim["policy"] == CONSTANT_INTERVAL and intervals is None:
        intervals = tune_constant_intervals(sc.farm, sc.revenue, sim["horizon"], planner,
                                            grid=sim["interval_grid"])
    policy = cfgmod.policy_of(cfg, intervals)
    out = _out_dir(args)
    reps = 1 if script else sim["replications"]
    if reps == 1:
        trace = run_policy(scenario, policy, planner, sc.solver)
        with open(os.path.join(out, "trace.csv"), "w", newline="", encoding="utf-8") as fh:
            trace.to_csv(fh, sc.component_names)
        metrics = [compute_metrics(trace, sc.farm)]
        if policy.kind == OPTIMIZED_ROLLING:
            _write(os.path.join(out, "plans.csv"),
                   ["time", "variant", "start", "end", "objective_k", "farm_stops"],
                   [[_num(p.time), p.variant, p.start, p.end, _num(p.objective),
                     " ".join(str(t) for t in sorted({t for row in p.schedule for ms in row
                                                      for t in ms}))]
                    for p in trace.plans])
    else:
        metrics = replicate(scenario, policy, reps, planner, sc.solver, threads=args.threads)
        _write(os.path.join(out, "replications.csv"),
               ["replication", "total_cost_k", "downtime_months", "availability_pct",
                "failures_per_turbine"],
               [[r, _num(m.total_cost), _num(m.downtime_per_turbine),
                 _num(100 * m.availability), _num(m.failures_per_turbine)]
                for r, m in enumerate(metrics)])
    mean = summarize(metrics)
    extra = "" if intervals is None or policy.kind != CONSTANT_INTERVAL else " ".join(map(str, intervals))
    _write(os.path.join(out, "metrics.csv"),
           ["policy", "total_cost_k", "downtime_months", "availability_pct",
            "failures_per_turbine", "replications", "intervals"],
           [[policy.label, _num(mean.total_cost), _num(mean.downtime_per_turbine),
             _num(100 * mean.availability), _num(mean.failures_per_turbine), reps, extra]])
    print(f"{policy.label}: {reps} replication(s), mean cost {mean.total_cost:.1f} k$, "
          f"downtime {mean.downtime_per_turbine:.2f} months/turbine, "
          f"availability {100 * mean.availability:.2f} %")
    return EXIT_OK


def _delta_list(args, cfg):
    if args.delta is None:
        deltas = cfg["insurance"]["deltas"]
    else:
        try:
            deltas = [float(x) for x in str(args.delta).split(",") if x.strip()]
        except ValueError as exc:
            raise ConfigurationError(f"--delta: {exc}") from exc
    if any(not 0.0 <= d <= 1.0 for d in deltas):
        raise ConfigurationError("insurance levels must lie in [0, 1]")
    return sorted(set([0.0, *deltas]))


def cmd_price_insurance(args) -> int:
    cfg = _resolved(args)
    sc = cfgmod.build(cfg)
    deltas = _delta_list(args, cfg)
    v = cfg["variant"]
    eol = v["kind"] == "end-of-life" or v["base"] == END_OF_LIFE
    base = END_OF_LIFE if eol else FULL_CONTRACT
    start = v["start"]
    end = cfg["life"] if eol else v["end"]
    ages = np.zeros((sc.farm.n_turbines, sc.farm.n_components))
    classes = group_turbines(ages)
    ref = Variant(DELTA_INSURANCE, start, end, cfg["life"], delta=0.0, base=base)
    est = _estimates(args, cfg, sc, ref, classes, deltas=tuple(deltas) if eol else ())
    rows, status = [], EXIT_OK
    f0 = None
    for d in deltas:
        variant = dataclasses.replace(ref, delta=d)
        result = plan(variant, sc.farm, ages, sc.revenue, sc.mc, sc.solver, est=est,
                      classes=classes)
        if not result.solution.optimal:
            status = EXIT_SOLVER
        f = result.objective
        f0 = f if d == 0.0 else f0
        rows.append([_num(d), _num(f), _num(f0 - f), len(result.stops),
                     " ".join(str(t) for t in result.stops)])
        print(f"delta={d:g}: F*={f:.1f} k$, price={f0 - f:.1f} k$, stops {list(result.stops)}")
    _write(os.path.join(_out_dir(args), "pricing.csv"),
           ["delta", "F_star_k", "price_k", "n_stops", "farm_stops"], rows)
    return status


def cmd_export(args) -> int:
    cfg = _resolved(args)
    sc = cfgmod.build(cfg)
    variant = cfgmod.variant_of(cfg)
    classes = group_turbines(np.zeros((sc.farm.n_turbines, sc.farm.n_components)))
    est = _estimates(args, cfg, sc, variant, classes)
    model = build_model(variant, sc.farm, est, sc.revenue, classes)
    path = args.export_mps or os.path.join(_out_dir(args), "model.mps")
    folder = os.path.dirname(path)
    if folder:
        os.makedirs(folder, exist_ok=True)
    export_mps(model, path)
    print(f"{variant.label}: {model.n_vars} columns, "
          f"{len(model.b_eq) + len(model.b_ub)} rows -> {path}")
    return EXIT_OK


COMMANDS = {
    "estimate": cmd_estimate,
    "plan": cmd_plan,
    "simulate": cmd_simulate,
    "price-insurance": cmd_price_insurance,
    "export": cmd_export,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON scenario config (defaults built in)")
    common.add_argument("--variant", choices=sorted(cfgmod.VARIANT_CHOICES))
    common.add_argument("--epsilon", type=float, help="availability tolerance in (0, 1]")
    common.add_argument("--horizon", type=int,
                        help="planning window end (simulate: simulated months)")
    common.add_argument("--samples", type=int, help="Monte Carlo replications M")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--out", default=".", metavar="DIR", help="output directory")
    common.add_argument("--cache", metavar="DIR", help="estimate cache (default OUT/cache)")
    common.add_argument("--no-cache", action="store_true", help="do not read or write the cache")
    common.add_argument("--threads", type=int, default=1,
                        help="worker processes for replications")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="windpm",
                                     description="Preventive maintenance planning for wind farms.")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("estimate", parents=[common], help="write the interval-cost tensor")
    p.add_argument("--delta", type=float)
    p = sub.add_parser("plan", parents=[common], help="optimal PM schedule")
    p.add_argument("--delta", type=float)
    p.add_argument("--export-mps", metavar="PATH")
    p = sub.add_parser("simulate", parents=[common], help="simulate a maintenance policy")
    p.add_argument("--policy", choices=["optimized-rolling", "pure-cm", "constant-interval"])
    p.add_argument("--script", metavar="PATH", help="JSON list of scripted failures")
    p.add_argument("--replications", type=int)
    p = sub.add_parser("price-insurance", parents=[common], help="F*(delta) and contract prices")
    p.add_argument("--delta", help="comma-separated insurance levels")
    p = sub.add_parser("export", parents=[common], help="write the integer program as MPS")
    p.add_argument("--delta", type=float)
    p.add_argument("--export-mps", metavar="PATH")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](args)
    except (ConfigurationError, ParameterError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
