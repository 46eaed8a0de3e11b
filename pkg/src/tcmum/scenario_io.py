"""Scenario bundles, design files and demand CSVs."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, fields
from pathlib import Path

import numpy as np

from .choice import ChoiceModelSpec, UtilityParams
from .model import (Budgets, Commute, CommuteRoute, DesignPoint, Leg, Scenario, ScenarioError,
                    SharedTrip, StationRegion, TimeGrid, TransitLine, validate_scenario)
from .params import OptimizerParams
from .pricing import FareSchedule

REQUIRED_SECTIONS = ("grid", "lines", "stations", "commutes", "routes", "budgets", "fares", "choice")
_UTILITY_FIELDS = {f.name for f in fields(UtilityParams)}
_CHOICE_FIELDS = {f.name for f in fields(ChoiceModelSpec)}


class ScenarioParseError(ScenarioError):
    """The bundle text cannot be read as a scenario."""


def _build(cls, data: dict, path: str, **overrides):
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ScenarioParseError(f"{path}: unknown field(s) {sorted(unknown)}")
    try:
        return cls(**{**data, **overrides})
    except TypeError as exc:
        raise ScenarioParseError(f"{path}: {exc}") from None


def _tuple(v):
    return tuple(v) if v is not None else None


def scenario_from_dict(data: dict, base_dir: Path | None = None) -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioParseError("scenario document must be an object")
    missing = [s for s in REQUIRED_SECTIONS if s not in data]
    if missing:
        raise ScenarioParseError(f"missing section(s): {', '.join(missing)}")
    grid = _build(TimeGrid, data["grid"], "grid")
    lines = tuple(
        _build(TransitLine, ln, f"lines[{k}]", stops=tuple(ln.get("stops", ())),
               segment_times=tuple(float(v) for v in ln.get("segment_times", ())))
        for k, ln in enumerate(data["lines"]))
    stations = tuple(_build(StationRegion, st, f"stations[{k}]", xy=_tuple(st.get("xy")))
                     for k, st in enumerate(data["stations"]))
    csv_demand = {}
    if data.get("demand_csv"):
        p = Path(data["demand_csv"])
        if base_dir is not None and not p.is_absolute():
            p = base_dir / p
        csv_demand = read_demand_csv(p, grid.T)
    commutes = []
    for k, cm in enumerate(data["commutes"]):
        cm = dict(cm)
        if "demand" not in cm:
            if cm.get("id") not in csv_demand:
                raise ScenarioParseError(f"commutes[{k}].demand: missing and not in demand CSV")
            cm["demand"] = csv_demand[cm["id"]]
        commutes.append(_build(Commute, cm, f"commutes[{k}]", demand=tuple(float(v) for v in cm["demand"]),
                               origin=_tuple(cm.get("origin")), destination=_tuple(cm.get("destination"))))
    routes = []
    for k, r in enumerate(data["routes"]):
        legs = tuple(_build(Leg, lg, f"routes[{k}].legs[{i}]") for i, lg in enumerate(r.get("legs", ())))
        routes.append(_build(CommuteRoute, r, f"routes[{k}]", legs=legs))
    shared = tuple(
        _build(SharedTrip, p, f"shared_trips[{k}]", members=tuple(tuple(m) for m in p.get("members", ())))
        for k, p in enumerate(data.get("shared_trips", ())))
    choice = data["choice"]
    unknown = set(choice) - _UTILITY_FIELDS - _CHOICE_FIELDS
    if unknown:
        raise ScenarioParseError(f"choice: unknown field(s) {sorted(unknown)}")
    return Scenario(
        grid=grid,
        lines=lines,
        stations=stations,
        commutes=tuple(commutes),
        routes=tuple(routes),
        budgets=_build(Budgets, data["budgets"], "budgets"),
        fares=_build(FareSchedule, data["fares"], "fares"),
        utility=UtilityParams(**{k: v for k, v in choice.items() if k in _UTILITY_FIELDS}),
        choice=ChoiceModelSpec(**{k: v for k, v in choice.items() if k in _CHOICE_FIELDS}),
        algorithm=_build(OptimizerParams, data.get("algorithm", {}), "algorithm"),
        shared_trips=shared,
        name=data.get("name", ""),
    )


def scenario_to_dict(sc: Scenario) -> dict:
    def clean(d):
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in d.items()}

    out = {"name": sc.name, "grid": asdict(sc.grid)}
    out["lines"] = [clean(asdict(l)) for l in sc.lines]
    out["stations"] = [clean(asdict(s)) for s in sc.stations]
    out["commutes"] = [clean(asdict(c)) for c in sc.commutes]
    out["routes"] = [{"commute": r.commute, "id": r.id, "walk_min": r.walk_min, "mode_class": r.mode_class,
                      "legs": [asdict(lg) for lg in r.legs]} for r in sc.routes]
    out["budgets"] = asdict(sc.budgets)
    out["fares"] = asdict(sc.fares)
    out["choice"] = {**asdict(sc.utility), **asdict(sc.choice)}
    out["algorithm"] = asdict(sc.algorithm)
    out["shared_trips"] = [{"id": p.id, "station": p.station, "members": [list(m) for m in p.members]}
                           for p in sc.shared_trips]
    return out


def dumps_scenario(sc: Scenario) -> str:
    return json.dumps(scenario_to_dict(sc), indent=1) + "\n"


def dump_scenario(sc: Scenario, path) -> None:
    Path(path).write_text(dumps_scenario(sc))


def loads_scenario(text: str, base_dir: Path | None = None, validate: bool = True) -> Scenario:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    sc = scenario_from_dict(data, base_dir)
    if validate:
        rep = validate_scenario(sc)
        if not rep.ok:
            raise ScenarioError("invalid scenario:\n  " + "\n  ".join(rep.messages()))
    return sc


def load_scenario(path, validate: bool = True) -> Scenario:
    """Read and validate a scenario bundle."""
    path = Path(path)
    return loads_scenario(path.read_text(), path.parent, validate)


# ---------------------------------------------------------------------------
# demand CSV


def read_demand_csv(path, T: int) -> dict:
    """``commute_id,t,demand`` rows to per-commute vectors of length ``T``."""
    out: dict = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or set(reader.fieldnames) < {"commute_id", "t", "demand"}:
            raise ScenarioParseError(f"{path}: header must be commute_id,t,demand")
        for n, row in enumerate(reader, start=2):
            try:
                t = int(row["t"])
                v = float(row["demand"])
            except ValueError:
                raise ScenarioParseError(f"{path}:{n}: bad t or demand") from None
            if not 0 <= t < T:
                raise ScenarioParseError(f"{path}:{n}: interval {t} outside 0..{T - 1}")
            out.setdefault(row["commute_id"], [0.0] * T)[t] += v
    return out


def write_demand_csv(sc: Scenario, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["commute_id", "t", "demand"])
        for c in sc.commutes:
            for t, v in enumerate(c.demand):
                w.writerow([c.id, t, repr(float(v))])


# ---------------------------------------------------------------------------
# design files


def design_to_csv(design: DesignPoint, header: dict | None = None) -> str:
    """Design as ``kind,index,value`` rows; ``header`` entries become leading comments."""
    buf = io.StringIO()
    for k, v in (header or {}).items():
        buf.write(f"# {k}: {v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["kind", "index", "value"])
    x, N = np.asarray(design.x, float), np.asarray(design.N, float)
    for (t, l), v in np.ndenumerate(x):
        w.writerow(["x", f"{t}:{l}", repr(float(v))])
    for (t, s), v in np.ndenumerate(N):
        w.writerow(["N", f"{t}:{s}", repr(float(v))])
    w.writerow(["lam", "0", repr(float(design.lam))])
    return buf.getvalue()


def write_design(design: DesignPoint, path, header: dict | None = None) -> None:
    Path(path).write_text(design_to_csv(design, header))


def read_design(path, sc: Scenario) -> DesignPoint:
    design = sc.zero_design()
    lines = [ln for ln in Path(path).read_text().splitlines() if ln and not ln.startswith("#")]
    reader = csv.DictReader(lines)
    for n, row in enumerate(reader, start=2):
        kind = row["kind"]
        try:
            value = float(row["value"])
            if kind == "lam":
                design.lam = value
                continue
            t, j = (int(v) for v in row["index"].split(":"))
            target = {"x": design.x, "N": design.N}[kind]
            target[t, j] = value
        except (KeyError, ValueError, IndexError):
            raise ScenarioParseError(f"{path}: bad design row {n}: {row}") from None
    return design
