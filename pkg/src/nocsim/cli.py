"""Command line front end.

Subcommands:
  validate   parse and check a scenario file
  map        compute the initial mapping and schedule, no fault timeline
  simulate   run the full event-driven simulation
  regions    dump the per-port unreachable-region tables after the
             scripted permanent faults
  sweep      run several seed variants concurrently and aggregate

Exit codes: 0 success, 1 validation error, 2 infeasible instance.
"""

import argparse
import concurrent.futures
import os
import sys

from .errors import InfeasibilityError, ValidationError
from .health import SystemHealthMap
from .mapsched import dump_mapping, evaluate_cost
from .reachability import build_region_tables
from .scenario import load_scenario
from .shmu import (
    CurrentMappingMemory,
    degrade_targets,
    map_and_deploy,
    MpmMemory,
    Msu,
)
from .simkernel import Kernel

COST_CHOICES = ("makespan", "traffic", "util", "schedule_length",
                "traffic_balance", "utilization_balance")


def _add_common(sub, out=True):
    sub.add_argument("--scenario", required=True, help="scenario JSON file")
    if out:
        sub.add_argument("--out", help="directory for output files")
    sub.add_argument("--seed", type=int, help="override the scenario seed")
    sub.add_argument("--heuristic", choices=("greedy", "ils", "sa"),
                     help="override the mapping heuristic")
    sub.add_argument("--cost", choices=COST_CHOICES,
                     help="override the cost function")
    sub.add_argument("--regions-budget", type=int, dest="budget",
                     help="override the rectangle budget per port")
    sub.add_argument("--verbose", "-v", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="nocsim",
        description="fault-aware NoC mapping and simulation",
    )
    subs = parser.add_subparsers(dest="command", required=True)
    _add_common(subs.add_parser("validate", help="check a scenario file"),
                out=False)
    _add_common(subs.add_parser("map", help="compute the initial deployment"))
    _add_common(subs.add_parser("simulate", help="run the fault timeline"))
    _add_common(subs.add_parser("regions",
                                help="dump unreachable-region tables"))
    sweep = subs.add_parser("sweep", help="run seed variants concurrently")
    _add_common(sweep)
    sweep.add_argument("--seeds", type=int, default=8,
                       help="number of consecutive seeds to run")
    sweep.add_argument("--jobs", type=int, default=0,
                       help="worker processes (0 = one per cpu)")
    return parser


def _load(args):
    return load_scenario(args.scenario, seed=args.seed,
                         heuristic=args.heuristic, cost=args.cost,
                         budget=args.budget)


def _write(out_dir, name, text):
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return path


def cmd_validate(args):
    script = _load(args)
    dims = "x".join(str(d) for d in script.ag.dims)
    print(f"ok: {len(script.tg)} tasks, {dims} mesh, "
          f"turn model {script.turn_model.name}, "
          f"{len(script.injections)} injections, "
          f"{len(script.aging)} aging updates")
    if args.verbose:
        for inj in script.injections:
            print(f"  injection t={inj.time} at "
                  f"{':'.join(str(p) for p in inj.location)} "
                  f"({inj.persistence})")
    return 0


def cmd_map(args):
    script = _load(args)
    shm = SystemHealthMap(script.ag)
    for update in script.aging:
        if update.time <= 0:
            shm.set_aging(update.tile, update.percent)
    msu = _msu(script)
    mapping, schedule, report = map_and_deploy(
        shm, msu, MpmMemory(script.mpm_capacity), CurrentMappingMemory())
    cost = evaluate_cost(schedule, script.cost)
    text = (dump_mapping(mapping) + "\n" + schedule.dump()
            + f"cost {script.cost} {cost}\n"
            + f"t_rl {report.t_rl}\n")
    if args.out:
        path = _write(args.out, "mapping.txt", text)
        print(f"wrote {path}")
    else:
        print(text, end="")
    return 0


def cmd_simulate(args):
    script = _load(args)
    kernel = Kernel(script)
    result = kernel.run()
    if args.out:
        files = {
            "metrics.txt": result.metrics.to_text(),
            "trace.txt": _lines(result.trace),
            "decisions.log": _lines(result.decisions),
            "mapping.txt": dump_mapping(result.cmm.mapping) + "\n"
                           + result.cmm.schedule.dump(),
            "mpm.txt": result.mpm.dump(),
            "shm.txt": result.shm.serialize(),
        }
        for name, text in files.items():
            _write(args.out, name, text)
        print(f"wrote {len(files)} files to {args.out}")
        if args.verbose:
            print(result.metrics.to_text(), end="")
    else:
        print(result.metrics.to_text(), end="")
        if args.verbose:
            print("# trace")
            print(_lines(result.trace), end="")
            print("# decisions")
            print(_lines(result.decisions), end="")
    return 0


def cmd_regions(args):
    script = _load(args)
    shm = SystemHealthMap(script.ag)
    for inj in script.injections:
        if inj.persistence == "permanent":
            for fault in degrade_targets(inj.location, script.ag):
                shm.apply_fault(fault)
    msu = _msu(script)
    rg = msu.build_rg(shm)
    tables = build_region_tables(rg, script.budget)
    text = tables.dump()
    if args.out:
        path = _write(args.out, "regions.txt", text)
        print(f"wrote {path}")
    else:
        print(text, end="")
    return 0


def _sweep_one(task):
    path, seed, heuristic, cost, budget = task
    script = load_scenario(path, seed=seed, heuristic=heuristic, cost=cost,
                           budget=budget)
    result = Kernel(script).run()
    m = result.metrics
    return (seed, m.makespan, m.remaps, m.flows_dropped, m.mpm_hits,
            m.mpm_misses, m.tasks_unfinished)


def cmd_sweep(args):
    base = _load(args)                       # validate once, fail fast
    start = args.seed if args.seed is not None else base.seed
    tasks = [(args.scenario, start + i, args.heuristic, args.cost, args.budget)
             for i in range(args.seeds)]
    jobs = args.jobs or min(len(tasks), os.cpu_count() or 1)
    if jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_one, tasks))
    else:
        rows = [_sweep_one(t) for t in tasks]
    rows.sort(key=lambda r: r[0])
    lines = ["seed makespan remaps flows_dropped mpm_hits mpm_misses "
             "tasks_unfinished"]
    for row in rows:
        lines.append(" ".join(str(v) for v in row))
    spans = [r[1] for r in rows]
    lines.append(f"aggregate makespan min={min(spans)} max={max(spans)} "
                 f"mean={sum(spans) / len(spans):.2f}")
    text = "\n".join(lines) + "\n"
    if args.out:
        path = _write(args.out, "sweep.txt", text)
        print(f"wrote {path}")
    else:
        print(text, end="")
    return 0


def _msu(script):
    return Msu(
        tg=script.tg,
        turn_model=script.turn_model,
        ctg=script.ctg,
        regions=script.regions,
        heuristic=script.heuristic,
        cost=script.cost,
        comm=script.comm,
        cost_model=script.cost_model,
        iterations=script.iterations,
        sa_params=script.sa_params,
        initial_policy=script.initial_policy,
        seed=script.seed,
    )


def _lines(items):
    return "\n".join(items) + ("\n" if items else "")


_COMMANDS = {
    "validate": cmd_validate,
    "map": cmd_map,
    "simulate": cmd_simulate,
    "regions": cmd_regions,
    "sweep": cmd_sweep,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except InfeasibilityError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
