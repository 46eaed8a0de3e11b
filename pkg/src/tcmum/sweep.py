"""Sensitivity sweeps over bus availability, fleet size and downtown share."""

from __future__ import annotations

import csv
import io
import itertools
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from .demand import DemandSeed, equivalent_fleet, generate_demand, with_demand
from .evaluation import EXTRA_COLUMNS, REPORT_COLUMNS, evaluate_design
from .model import Budgets, DesignPoint, Scenario, ScenarioError
from .scenario_io import load_scenario

log = logging.getLogger(__name__)

SWEEP_COLUMNS = REPORT_COLUMNS + EXTRA_COLUMNS + ("psi", "objective", "error")
FLEET_RULES = ("PCE", "CCE")


@dataclass(frozen=True)
class SweepSpec:
    base: str
    gammas: tuple
    psis: tuple
    fleet: object  # "PCE", "CCE" or a tuple of explicit fleet sizes
    output: str
    seed: int = 0
    starts: int | None = None
    total_demand: float | None = None

    def __post_init__(self):
        if not self.gammas or not self.psis:
            raise ValueError("gamma and psi lists must be nonempty")
        for name, vals in (("gamma", self.gammas), ("psi", self.psis)):
            bad = [v for v in vals if not 0 <= v <= 1]
            if bad:
                raise ValueError(f"{name} values must lie in [0, 1], got {bad}")
        if isinstance(self.fleet, str):
            if self.fleet.upper() not in FLEET_RULES:
                raise ValueError(f"fleet must be PCE, CCE or a list, got {self.fleet!r}")
        elif not self.fleet or any(v < 0 for v in self.fleet):
            raise ValueError("explicit fleet list must be nonempty and nonnegative")

    @classmethod
    def from_dict(cls, data: dict, base_dir: Path | None = None) -> "SweepSpec":
        def resolve(p):
            p = Path(p)
            return str(p if p.is_absolute() or base_dir is None else base_dir / p)

        fleet = data.get("fleet", "PCE")
        if not isinstance(fleet, str):
            fleet = tuple(float(v) for v in fleet)
        try:
            return cls(
                base=resolve(data["base"]),
                gammas=tuple(float(v) for v in data["gammas"]),
                psis=tuple(float(v) for v in data.get("psis", [0.8])),
                fleet=fleet,
                output=resolve(data["output"]),
                seed=int(data.get("seed", 0)),
                starts=None if data.get("starts") is None else int(data["starts"]),
                total_demand=None if data.get("total_demand") is None else float(data["total_demand"]),
            )
        except KeyError as exc:
            raise ValueError(f"sweep spec is missing {exc.args[0]!r}") from None

    @classmethod
    def load(cls, path) -> "SweepSpec":
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text()), path.parent)


@dataclass(frozen=True)
class SweepCell:
    gamma: float
    n_bar: float
    psi: float

    @property
    def key(self) -> tuple:
        return (_fmt(self.gamma), _fmt(self.n_bar), _fmt(self.psi))


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    return format(float(v), ".10g")


def sweep_cells(spec: SweepSpec, base: Scenario) -> list:
    """Cells in spec order: gamma outermost, then fleet, then psi."""
    cells = []
    hours = base.grid.horizon_hours
    for gamma in spec.gammas:
        if isinstance(spec.fleet, str):
            fleets = (float(equivalent_fleet(gamma, base.budgets.B_bus, hours, spec.fleet)),)
        else:
            fleets = spec.fleet
        for n_bar, psi in itertools.product(fleets, spec.psis):
            cells.append(SweepCell(gamma, float(n_bar), psi))
    return cells


def cell_scenario(base: Scenario, cell: SweepCell, seed: DemandSeed, rng_seed: int) -> Scenario:
    b = base.budgets
    budgets = Budgets(B_bus=cell.gamma * b.B_bus, B_rail=b.B_rail, lb_rail=b.lb_rail,
                      ub_rail=b.ub_rail, ub_bus=b.ub_bus, N_bar=cell.n_bar)
    sc = with_demand(base, generate_demand(seed, cell.psi, rng_seed))
    return sc.replace(budgets=budgets)


def _run_cell(args) -> dict:
    from .optimizer import multi_start

    base, cell, seed, spec = args
    row = {"gamma": cell.gamma, "n_bar": cell.n_bar, "psi": cell.psi}
    try:
        sc = cell_scenario(base, cell, seed, spec.seed)
        params = replace(sc.algorithm, seed=spec.seed,
                         starts=sc.algorithm.starts if spec.starts is None else spec.starts)
        result = multi_start(sc, params, jobs=1)
        _, report = evaluate_design(sc, result.best)
        row.update(report.row(cell.gamma, cell.n_bar))
        row["objective"] = report.objective
    except (ScenarioError, RuntimeError, ValueError, ArithmeticError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}".replace("\n", " ")
    return row


def _read_done(path: Path) -> set:
    if not path.exists():
        return set()
    lines = [ln for ln in path.read_text().splitlines() if ln and not ln.startswith("#")]
    return {(r["gamma"], r["n_bar"], r["psi"]) for r in csv.DictReader(lines)}


def _format_row(row: dict) -> list:
    return [_fmt(row.get(col)) for col in SWEEP_COLUMNS]


def run_sweep(spec: SweepSpec, jobs: int = 1) -> Path:
    """Run every missing cell and append its report row; returns the output path."""
    base = load_scenario(spec.base)
    seed = DemandSeed.from_scenario(base, spec.total_demand)
    out = Path(spec.output)
    done = _read_done(out)
    todo = [c for c in sweep_cells(spec, base) if c.key not in done]
    log.info("sweep: %d cells to run, %d already present", len(todo), len(done))
    if not out.exists() or out.stat().st_size == 0:
        out.parent.mkdir(parents=True, exist_ok=True)
        with out.open("w", newline="") as fh:
            fh.write(f"# seed: {spec.seed}\n")
            csv.writer(fh, lineterminator="\n").writerow(SWEEP_COLUMNS)
    if not todo:
        return out
    args = [(base, c, seed, spec) for c in todo]
    # rows arrive in spec order and only this process writes the file
    with out.open("a", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if jobs > 1 and len(todo) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                for row in pool.map(_run_cell, args):
                    writer.writerow(_format_row(row))
                    fh.flush()
        else:
            for a in args:
                writer.writerow(_format_row(_run_cell(a)))
                fh.flush()
    return out


def emit_frequency_profile(sc: Scenario, design: DesignPoint) -> str:
    """CSV of departures per line and interval with headways and a readable rate."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["line", "t", "x", "headway_min", "annotation"])
    x = np.asarray(design.x, float)
    for l, line in enumerate(sc.lines):
        for t in range(sc.T):
            v = float(x[t, l])
            if v > 0:
                headway = format(sc.delta_t / v, ".6g")
                rate = Fraction(v).limit_denominator(12)
                plural = "s" if rate.numerator != 1 else ""
                if abs(float(rate) - v) > 1e-6:
                    note = f"{v:.3g} departures per interval"
                elif rate.denominator == 1:
                    note = f"{rate.numerator} departure{plural} per interval"
                else:
                    note = f"{rate.numerator} departure{plural} per {rate.denominator} intervals"
            else:
                headway, note = "", "no departures"
            w.writerow([line.id, t, format(v, ".10g"), headway, note])
    return buf.getvalue()
