"""Command-line entry point."""

from __future__ import annotations

import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import click
import numpy as np

from . import __version__
from .evaluation import EXTRA_COLUMNS, REPORT_COLUMNS, Evaluator
from .lp import LPError
from .model import ScenarioError
from .pricing import amod_fare
from .units import miles_to_km

EXIT_OK, EXIT_INVALID, EXIT_SOLVER = 0, 2, 3


def _fail(code: int, message: str):
    click.echo(message, err=True)
    sys.exit(code)


def _load(path):
    from .scenario_io import load_scenario

    try:
        return load_scenario(path)
    except (ScenarioError, OSError, ValueError) as exc:
        _fail(EXIT_INVALID, f"invalid scenario {path}: {exc}")


def _report_text(report, header: dict) -> str:
    lines = [f"# {k}: {v}" for k, v in header.items()]
    row = report.row(None, None)
    lines.append(f"objective,{report.objective!r}")
    for col in REPORT_COLUMNS[2:] + EXTRA_COLUMNS:
        v = row[col]
        lines.append(f"{col},{'' if v is None else repr(float(v))}")
    for name, v in sorted(report.components.items()):
        lines.append(f"component.{name},{float(v)!r}")
    return "\n".join(lines) + "\n"


@click.group()
@click.version_option(__version__)
@click.option("-v", "--verbose", count=True, help="Repeat for more logging.")
def main(verbose):
    """Joint transit frequency, AMoD fleet and pricing design."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.argument("scenario", type=click.Path(dir_okay=False))
def validate(scenario):
    """Load and validate a scenario file."""
    from .scenario_io import load_scenario

    try:
        sc = load_scenario(scenario)
    except (ScenarioError, OSError, ValueError) as exc:
        _fail(EXIT_INVALID, str(exc))
    click.echo(f"{scenario}: ok ({len(sc.lines)} lines, {len(sc.stations)} stations, "
               f"{len(sc.commutes)} commutes, {len(sc.routes)} routes, T={sc.T})")


@main.command()
@click.argument("scenario", type=click.Path(dir_okay=False))
@click.option("--seed", type=int, default=None, help="Random-start seed (scenario default if omitted).")
@click.option("--starts", type=int, default=None, help="Number of random starts.")
@click.option("--out", type=click.Path(file_okay=False), default="solve_out", show_default=True)
@click.option("--jobs", type=int, default=None, help="Parallel starts (TCMUM_JOBS if omitted).")
def solve(scenario, seed, starts, out, jobs):
    """Multi-start optimization; writes design.csv, report.csv, profile.csv and trajectory.csv."""
    from .optimizer import OptimizerError, multi_start
    from .scenario_io import write_design
    from .sweep import emit_frequency_profile

    sc = _load(scenario)
    params = sc.algorithm
    params = replace(params, seed=params.seed if seed is None else seed,
                     starts=params.starts if starts is None else starts)
    try:
        result = multi_start(sc, params, jobs=jobs)
        _, report = Evaluator(sc).evaluate(result.best)
    except (OptimizerError, LPError, ScenarioError) as exc:
        _fail(EXIT_SOLVER, f"solver failure: {exc}")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    header = {"scenario": sc.name or Path(scenario).stem, "seed": params.seed, "starts": params.starts,
              "best_start": result.best_start}
    write_design(result.best, out / "design.csv", header)
    (out / "report.csv").write_text(_report_text(report, header))
    (out / "profile.csv").write_text(emit_frequency_profile(sc, result.best))
    rows = [f"# seed: {params.seed}", "start,iteration,approx_objective,true_objective,converged"]
    for k, traj in enumerate(result.trajectories):
        for i, (q, f) in enumerate(zip(traj.approx_objectives, traj.true_objectives), start=1):
            rows.append(f"{k},{i},{q!r},{f!r},{int(traj.converged)}")
    (out / "trajectory.csv").write_text("\n".join(rows) + "\n")
    n_conv = sum(t.converged for t in result.trajectories)
    click.echo(f"best objective {result.best_objective:.4f} from start {result.best_start}; "
               f"{n_conv}/{len(result.trajectories)} starts converged; wrote {out}")


@main.command()
@click.argument("scenario", type=click.Path(dir_okay=False))
@click.option("--design", "design_path", required=True, type=click.Path(dir_okay=False))
def evaluate(scenario, design_path):
    """Evaluate a design file and print the report."""
    from .scenario_io import read_design

    sc = _load(scenario)
    try:
        design = read_design(design_path, sc)
    except (ScenarioError, OSError) as exc:
        _fail(EXIT_INVALID, str(exc))
    try:
        _, report = Evaluator(sc).evaluate(design)
    except ScenarioError as exc:
        _fail(EXIT_INVALID, str(exc))
    except LPError as exc:
        _fail(EXIT_SOLVER, f"solver failure: {exc}")
    click.echo(_report_text(report, {"design": design_path}), nl=False)


@main.command()
@click.argument("spec", type=click.Path(dir_okay=False))
@click.option("--jobs", type=int, default=None, help="Parallel cells (TCMUM_JOBS if omitted).")
def sweep(spec, jobs):
    """Run a resumable sensitivity sweep described by a JSON spec."""
    from .optimizer import default_jobs
    from .sweep import SweepSpec, run_sweep

    try:
        sp = SweepSpec.load(spec)
        out = run_sweep(sp, default_jobs() if jobs is None else jobs)
    except (ScenarioError, OSError, ValueError) as exc:
        _fail(EXIT_INVALID, str(exc))
    click.echo(f"wrote {out}")


@main.command()
@click.argument("scenario", type=click.Path(dir_okay=False))
@click.option("--grid", "grid_path", required=True, type=click.Path(dir_okay=False),
              help='JSON with "x", "N" and "lambda" candidate lists.')
@click.option("--jobs", type=int, default=1, show_default=True)
def oracle(scenario, grid_path, jobs):
    """Exhaustive evaluation over a design grid."""
    from .oracles import OracleRefused, grid_oracle
    from .scenario_io import design_to_csv

    sc = _load(scenario)
    try:
        grid = json.loads(Path(grid_path).read_text())
        xs = [np.asarray(v, float) for v in grid["x"]]
        Ns = [np.asarray(v, float) for v in grid["N"]]
        lams = [float(v) for v in grid["lambda"]]
    except (OSError, KeyError, ValueError, TypeError) as exc:
        _fail(EXIT_INVALID, f"bad grid file {grid_path}: {exc}")
    try:
        res = grid_oracle(sc, xs, Ns, lams, jobs=jobs)
    except OracleRefused as exc:
        _fail(EXIT_INVALID, str(exc))
    except ValueError as exc:
        _fail(EXIT_INVALID, str(exc))
    except LPError as exc:
        _fail(EXIT_SOLVER, f"solver failure: {exc}")
    click.echo(design_to_csv(res.best, {"objective": repr(res.best_objective),
                                        "feasible_points": res.grid_size}), nl=False)


@main.command()
@click.option("--d", "miles", type=float, required=True, help="Trip distance in miles.")
@click.option("--t", "minutes", type=float, required=True, help="Trip duration in minutes.")
def fares(miles, minutes):
    """Undiscounted AMoD fare for one trip."""
    click.echo(f"{amod_fare(miles_to_km(miles), minutes):.2f}")


if __name__ == "__main__":
    main()
