"""Command line pipeline: gen -> solve -> simulate -> report.

gen writes a synthetic instance, solve turns an instance into a route plan,
simulate checks the plan box by box (with tail repair) and writes report
artifacts, and report tabulates one or more report files.  Every error exits
nonzero with a single line "ERROR:<code>: message" on stderr, where code is
one of usage, parse, validation, solver, io, internal.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import sys

import click
import numpy as np

from .anneal import ExternalSolverError, SolverConfig, SolverLookupError
from .model import (GeneratorConfig, ParseError, generate_instance, group_boxes,
                    load_instance, load_time_matrix_csv, overall_demand,
                    save_instance)
from .pubo_builder import PuboParams
from .simulate import correct_routes, per_truck_itineraries
from .truck_loop import (LoopConfig, TruckLoopError, load_plan, run_truck_loop,
                         save_plan)

EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_VALIDATION = 4
EXIT_SOLVER = 5
EXIT_IO = 6
EXIT_INTERNAL = 70

PROFILES = {
    "sa": {"tau": 15, "solver": "sa"},
    "external": {"tau": 5, "solver": "external"},
}


@click.group()
def cli():
    """Multi-truck routing via binary optimization, with box-level checking."""


@cli.command("gen")
@click.option("--seed", type=int, default=0, show_default=True, help="Generator seed.")
@click.option("--out", type=click.Path(dir_okay=False), default="instance.json",
              show_default=True, help="Instance JSON to write.")
@click.option("--n", type=int, default=23, show_default=True, help="Number of nodes.")
@click.option("--boxes", type=int, default=10_000, show_default=True,
              help="Number of boxes.")
@click.option("--paths", type=int, default=115, show_default=True,
              help="Distinct box paths (also distinct directed legs).")
@click.option("--rank3-fraction", type=float, default=0.25, show_default=True,
              help="Fraction of paths with three nodes.")
@click.option("--window-s", type=float, default=57_600.0, show_default=True,
              help="Driving window in seconds.")
@click.option("--asymmetric", is_flag=True, help="Draw an asymmetric time matrix.")
def cmd_gen(seed, out, n, boxes, paths, rank3_fraction, window_s, asymmetric):
    """Write a synthetic problem instance."""
    config = GeneratorConfig(n=n, num_boxes=boxes, num_paths=paths,
                             rank3_fraction=rank3_fraction, window_s=window_s,
                             symmetric_times=not asymmetric)
    instance = generate_instance(config, seed=seed)
    save_instance(instance, out)
    groups = group_boxes(instance.boxes)
    total = sum(b.volume for b in instance.boxes)
    click.echo(f"wrote {out}: n={instance.n} boxes={len(instance.boxes)} "
               f"paths={len(groups)} total_volume={total:.3f}")


@cli.command("solve")
@click.option("--instance", "instance_path", required=True,
              type=click.Path(dir_okay=False), help="Instance JSON to solve.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=".",
              show_default=True, help="Directory for plan.json and trucks.csv.")
@click.option("--profile", type=click.Choice(sorted(PROFILES)), default="sa",
              show_default=True, help="Horizon/solver bundle.")
@click.option("--seed", type=int, default=0, show_default=True, help="Root seed.")
@click.option("--solver", "solver_name", type=str, default=None,
              help="Solver name override (default from profile).")
@click.option("--tau", type=int, default=None, help="Steps per route (default from profile).")
@click.option("--delta-max", type=int, default=3, show_default=True,
              help="Longest lookahead for the demand reward.")
@click.option("--a-local", type=float, default=5000.0, show_default=True,
              help="One-node-per-step weight.")
@click.option("--a-demand", type=float, default=320.0, show_default=True,
              help="Demand reward weight.")
@click.option("--a-time", type=float, default=0.01, show_default=True,
              help="Drive time weight.")
@click.option("--a-nonredundant", type=float, default=1.0, show_default=True,
              help="Repeated transition penalty weight.")
@click.option("--cutoff", type=float, default=5e-4, show_default=True,
              help="Stop when the residual demand maximum falls below this.")
@click.option("--max-trucks", type=int, default=200, show_default=True,
              help="Hard cap on the number of trucks.")
@click.option("--sa-steps", type=int, default=10_000, show_default=True,
              help="Annealing steps per restart.")
@click.option("--sa-restarts", type=int, default=20, show_default=True,
              help="Annealing restarts per truck.")
@click.option("--time-csv", type=click.Path(dir_okay=False), default=None,
              help="Replace the instance time matrix with this CSV.")
def cmd_solve(instance_path, out_dir, profile, seed, solver_name, tau, delta_max,
              a_local, a_demand, a_time, a_nonredundant, cutoff, max_trucks,
              sa_steps, sa_restarts, time_csv):
    """Build a route plan for an instance."""
    instance = load_instance(instance_path)
    if time_csv is not None:
        time = load_time_matrix_csv(time_csv)
        if time.shape != (instance.n, instance.n):
            raise ValueError(f"time CSV shape {time.shape} != ({instance.n}, {instance.n})")
        instance.time = time
    bundle = PROFILES[profile]
    params = PuboParams(a_local=a_local, a_demand=a_demand, a_time=a_time,
                        a_nonredundant=a_nonredundant, delta_max=delta_max)
    config = LoopConfig(
        tau=bundle["tau"] if tau is None else tau,
        params=params,
        solver_name=bundle["solver"] if solver_name is None else solver_name,
        solver_config=SolverConfig(num_restarts=sa_restarts, seed=seed,
                                   default_num_steps=sa_steps),
        demand_cutoff=cutoff,
        max_trucks=max_trucks,
        window=instance.window,
        truck_capacity=instance.truck_capacity,
    )
    overall = overall_demand(instance.demand_tensors())
    os.makedirs(out_dir, exist_ok=True)
    plan_path = os.path.join(out_dir, "plan.json")
    csv_path = os.path.join(out_dir, "trucks.csv")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["truck", "estimated_demand", "residual_max"])
        plan = run_truck_loop(
            overall, instance.time, config,
            progress=lambda m, est, resid: writer.writerow([m, repr(est), repr(resid)]))
    save_plan(plan, plan_path)
    click.echo(f"wrote {plan_path} and {csv_path}: trucks={len(plan.routes)} "
               f"estimated_total={sum(plan.estimated):.4f} "
               f"residual_max={float(plan.residual.max()):.6f}")


@cli.command("simulate")
@click.option("--instance", "instance_path", required=True,
              type=click.Path(dir_okay=False), help="Instance JSON.")
@click.option("--plan", "plan_path", required=True,
              type=click.Path(dir_okay=False), help="Plan JSON from solve.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=".",
              show_default=True, help="Directory for report artifacts.")
@click.option("--rounds", type=int, default=5, show_default=True,
              help="Tail-repair rounds (0 disables repair).")
@click.option("--keep-trucks", type=int, default=None,
              help="Use only the first N planned trucks.")
def cmd_simulate(instance_path, plan_path, out_dir, rounds, keep_trucks):
    """Check a plan box by box and write report artifacts."""
    instance = load_instance(instance_path)
    plan = load_plan(plan_path)
    routes = plan.routes
    if keep_trucks is not None:
        if keep_trucks < 1:
            raise ValueError("--keep-trucks must be at least 1")
        routes = routes[:keep_trucks]
    corrected, report = correct_routes(instance, routes, rounds=rounds)
    os.makedirs(out_dir, exist_ok=True)

    report_path = os.path.join(out_dir, "report.json")
    with open(report_path, "w") as fh:
        json.dump({
            "satisfied_volume_fraction": report.satisfied_volume_fraction,
            "satisfied_box_fraction": report.satisfied_box_fraction,
            "num_trucks": len(corrected),
            "total_drive_time_s": sum(r.duration_s for r in corrected),
            "per_truck_carried_volume": report.per_truck_carried_volume,
            "violations": report.violations,
            "routes": [r.to_dict() for r in corrected],
        }, fh, indent=2)
        fh.write("\n")

    with open(os.path.join(out_dir, "corrected_routes.json"), "w") as fh:
        json.dump({"routes": [r.to_dict() for r in corrected]}, fh, indent=2)
        fh.write("\n")

    with open(os.path.join(out_dir, "events.jsonl"), "w") as fh:
        for event in report.event_log:
            fh.write(json.dumps(event) + "\n")

    with open(os.path.join(out_dir, "itineraries.json"), "w") as fh:
        json.dump(per_truck_itineraries(report.event_log), fh, indent=2)
        fh.write("\n")

    click.echo(f"wrote {report_path}: satisfied_volume={report.satisfied_volume_fraction:.4f} "
               f"satisfied_boxes={report.satisfied_box_fraction:.4f} "
               f"violations={len(report.violations)}")


def _route_edges(routes: list) -> set:
    edges = set()
    for route in routes:
        nodes = route["nodes"]
        for a, b in zip(nodes, nodes[1:]):
            if a != b:
                edges.add((a, b))
    return edges


@cli.command("report")
@click.argument("report_files", nargs=-1, required=True,
                type=click.Path(dir_okay=False))
@click.option("--edges-csv", type=click.Path(dir_okay=False), default=None,
              help="Also write the driven-leg list per run to this CSV.")
def cmd_report(report_files, edges_csv):
    """Tabulate one or more report.json files, best satisfied fraction first."""
    rows = []
    for path in report_files:
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path} is not valid JSON: {exc}") from exc
        for name in ("satisfied_volume_fraction", "num_trucks",
                     "total_drive_time_s", "routes"):
            if name not in data:
                raise ParseError(f"{path} missing field: {name}")
        rows.append((path, data["satisfied_volume_fraction"], data["num_trucks"],
                     data["total_drive_time_s"], sorted(_route_edges(data["routes"]))))
    rows.sort(key=lambda r: -r[1])
    header = f"{'run':<40} {'satisfied':>10} {'trucks':>7} {'drive_time_s':>14} {'edges':>6}"
    click.echo(header)
    for path, frac, trucks, drive, edges in rows:
        click.echo(f"{path:<40} {frac:>10.4f} {trucks:>7d} {drive:>14.1f} {len(edges):>6d}")
    if edges_csv is not None:
        with open(edges_csv, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["run", "from_node", "to_node"])
            for path, _, _, _, edges in rows:
                for a, b in edges:
                    writer.writerow([path, a, b])
        click.echo(f"wrote {edges_csv}")


def main(argv=None) -> int:
    """Entry point with machine-parsable error lines and exit codes."""
    logging.basicConfig(format="%(levelname)s %(name)s: %(message)s")
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.exceptions.Abort:
        return 130
    except click.UsageError as exc:
        return _fail("usage", exc.format_message(), EXIT_USAGE)
    except click.ClickException as exc:
        return _fail("usage", exc.format_message(), EXIT_USAGE)
    except ParseError as exc:
        return _fail("parse", str(exc), EXIT_PARSE)
    except (SolverLookupError, ExternalSolverError, TruckLoopError) as exc:
        return _fail("solver", str(exc), EXIT_SOLVER)
    except ValueError as exc:
        return _fail("validation", str(exc), EXIT_VALIDATION)
    except OSError as exc:
        return _fail("io", str(exc), EXIT_IO)
    except Exception as exc:  # noqa: BLE001 - last-resort mapping to exit code
        return _fail("internal", f"{type(exc).__name__}: {exc}", EXIT_INTERNAL)


def _fail(code: str, message: str, exit_code: int) -> int:
    message = " ".join(str(message).splitlines())
    click.echo(f"ERROR:{code}: {message}", err=True)
    return exit_code


if __name__ == "__main__":
    sys.exit(main())
