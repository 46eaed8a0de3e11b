"""Network, demand and route domain model; scenario validation and design feasibility."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

from .choice import ChoiceModelSpec, UtilityParams
from .params import OptimizerParams
from .pricing import FareSchedule
from .units import clock_to_minutes, mph_to_kmh

FEAS_TOL = 1e-9


class ScenarioError(ValueError):
    """Raised when a scenario or design cannot be used as given."""


@dataclass(frozen=True)
class TimeGrid:
    t_start: str
    t_end: str
    T: int
    delta_t: float  # minutes per interval

    @property
    def span_minutes(self) -> float:
        return clock_to_minutes(self.t_end) - clock_to_minutes(self.t_start)

    @property
    def horizon_hours(self) -> float:
        return self.T * self.delta_t / 60.0


@dataclass(frozen=True)
class TransitLine:
    id: str
    kind: str  # "rail" | "bus"
    stops: tuple
    segment_times: tuple
    capacity: float
    cost_per_departure: float = 1.0
    fare: Optional[float] = None

    @cached_property
    def position(self) -> dict:
        return {s: k for k, s in enumerate(self.stops)}

    def travel_min(self, board: str, alight: str) -> float:
        a, b = self.position[board], self.position[alight]
        return float(sum(self.segment_times[a:b]))


@dataclass(frozen=True)
class StationRegion:
    station_id: str
    area: float  # km^2
    shape_coeff: float
    xy: Optional[tuple] = None  # km, used by ride-sharing pairing

    @property
    def mean_local_trip_km(self) -> float:
        return self.shape_coeff * math.sqrt(self.area)

    def mean_local_trip_min(self, speed_kmh: float) -> float:
        return self.mean_local_trip_km / speed_kmh * 60.0


@dataclass(frozen=True)
class Commute:
    id: str
    kind: str  # "local" | "downtown"
    demand: tuple  # per-interval demand, length T
    origin: Optional[tuple] = None  # km
    destination: Optional[tuple] = None


@dataclass(frozen=True)
class Leg:
    mode: str  # "transit" | "amod"
    line: Optional[str] = None
    board: Optional[str] = None
    alight: Optional[str] = None
    station: Optional[str] = None
    distance_km: float = 0.0
    travel_min: float = 0.0
    shared_trip: Optional[str] = None
    xi: float = 1.0


@dataclass(frozen=True)
class CommuteRoute:
    commute: str
    id: str
    legs: tuple
    walk_min: float = 0.0
    mode_class: str = ""

    @property
    def key(self) -> tuple:
        return (self.commute, self.id)

    def derived_mode_class(self) -> str:
        modes = {leg.mode for leg in self.legs}
        if modes == {"transit"}:
            return "P"
        if modes == {"amod"}:
            return "A"
        return "PA"

    @property
    def is_shared(self) -> bool:
        return any(leg.shared_trip is not None for leg in self.legs)


@dataclass(frozen=True)
class SharedTrip:
    id: str
    station: str
    members: tuple  # ((commute, route, leg_index), ...)

    @property
    def n_parties(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class Budgets:
    B_bus: float
    B_rail: float
    lb_rail: float = 0.5
    ub_rail: float = 2.5
    ub_bus: float = 1.0
    N_bar: float = 0.0


@dataclass
class DesignPoint:
    """Decision vector: departures ``x`` (T x lines), fleet ``N`` (T x stations), discount ``lam``."""

    x: np.ndarray
    N: np.ndarray
    lam: float

    def copy(self) -> "DesignPoint":
        return DesignPoint(self.x.copy(), self.N.copy(), float(self.lam))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.x.ravel(), self.N.ravel(), [self.lam]])

    def __eq__(self, other):
        if not isinstance(other, DesignPoint):
            return NotImplemented
        return (np.array_equal(self.x, other.x) and np.array_equal(self.N, other.N)
                and self.lam == other.lam)


@dataclass(frozen=True)
class Scenario:
    grid: TimeGrid
    lines: tuple
    stations: tuple
    commutes: tuple
    routes: tuple
    budgets: Budgets
    fares: FareSchedule = field(default_factory=FareSchedule)
    utility: UtilityParams = field(default_factory=UtilityParams)
    choice: ChoiceModelSpec = field(default_factory=ChoiceModelSpec)
    algorithm: OptimizerParams = field(default_factory=OptimizerParams)
    shared_trips: tuple = ()
    name: str = ""

    @cached_property
    def line_index(self) -> dict:
        return {l.id: k for k, l in enumerate(self.lines)}

    @cached_property
    def line_by_id(self) -> dict:
        return {l.id: l for l in self.lines}

    @cached_property
    def station_index(self) -> dict:
        return {s.station_id: k for k, s in enumerate(self.stations)}

    @cached_property
    def station_by_id(self) -> dict:
        return {s.station_id: s for s in self.stations}

    @cached_property
    def commute_index(self) -> dict:
        return {c.id: k for k, c in enumerate(self.commutes)}

    @cached_property
    def routes_by_commute(self) -> dict:
        out = {c.id: [] for c in self.commutes}
        for r in self.routes:
            out.setdefault(r.commute, []).append(r)
        return {k: tuple(v) for k, v in out.items()}

    @cached_property
    def demand(self) -> np.ndarray:
        """Demand matrix, commutes x T."""
        if not self.commutes:
            return np.zeros((0, self.grid.T))
        return np.array([np.asarray(c.demand, dtype=float) for c in self.commutes])

    @property
    def T(self) -> int:
        return self.grid.T

    @property
    def delta_t(self) -> float:
        return self.grid.delta_t

    @cached_property
    def bus_mask(self) -> np.ndarray:
        return np.array([l.kind == "bus" for l in self.lines], dtype=bool)

    @cached_property
    def rail_mask(self) -> np.ndarray:
        return np.array([l.kind == "rail" for l in self.lines], dtype=bool)

    @cached_property
    def line_costs(self) -> np.ndarray:
        return np.array([l.cost_per_departure for l in self.lines], dtype=float)

    @property
    def amod_speed_kmh(self) -> float:
        return mph_to_kmh(self.utility.amod_speed)

    def availability_ratio(self, station: str) -> float:
        """Expected free fraction of an AMoD vehicle per interval near ``station``."""
        st = self.station_by_id[station]
        return self.delta_t / st.mean_local_trip_min(self.amod_speed_kmh)

    def amod_wait_min(self, station: str, n_vehicles: float) -> float:
        """Expected AMoD pickup wait (minutes) with ``n_vehicles`` in the region."""
        st = self.station_by_id[station]
        hours = st.shape_coeff / self.amod_speed_kmh * math.sqrt(st.area / n_vehicles)
        return hours * 60.0

    def leg_shift(self, leg: Leg) -> int:
        """Intervals between boarding a leg and being available for the next one."""
        return int(math.ceil(leg.travel_min / self.delta_t - 1e-9))

    def replace(self, **changes) -> "Scenario":
        from dataclasses import replace
        return replace(self, **changes)

    def zero_design(self, lam: Optional[float] = None) -> DesignPoint:
        return DesignPoint(np.zeros((self.T, len(self.lines))),
                           np.zeros((self.T, len(self.stations))),
                           self.fares.lambda_max if lam is None else lam)


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Issue:
    path: str
    message: str
    fatal: bool = True

    def __str__(self):
        return f"{self.path}: {self.message}"


@dataclass
class ValidationReport:
    issues: list = field(default_factory=list)

    def add(self, path: str, message: str, fatal: bool = True):
        self.issues.append(Issue(path, message, fatal))

    @property
    def ok(self) -> bool:
        return not self.issues

    def __len__(self):
        return len(self.issues)

    def __iter__(self):
        return iter(self.issues)

    def messages(self) -> list:
        return [str(i) for i in self.issues]


def _validate_grid(g: TimeGrid, rep: ValidationReport):
    if g.T < 1:
        rep.add("grid.T", "T must be >= 1")
    if not g.delta_t > 0:
        rep.add("grid.delta_t", "delta_t must be positive")
    try:
        span = g.span_minutes
    except (ValueError, AttributeError):
        rep.add("grid.t_start", "clock times must be HH:MM")
        return
    if g.T >= 1 and g.delta_t > 0 and abs(span - g.T * g.delta_t) > 1e-6:
        rep.add("grid", f"grid span {span:g} min != T*delta_t = {g.T * g.delta_t:g} min")


def _validate_leg(sc: Scenario, path: str, leg: Leg, rep: ValidationReport):
    if leg.distance_km < 0:
        rep.add(path + ".distance_km", "distance must be >= 0")
    if leg.travel_min < 0:
        rep.add(path + ".travel_min", "travel time must be >= 0")
    if not 0 < leg.xi <= 1:
        rep.add(path + ".xi", "vehicle discount must lie in (0, 1]")
    if leg.mode == "transit":
        line = sc.line_by_id.get(leg.line)
        if line is None:
            rep.add(path + ".line", f"unknown line {leg.line!r}")
            return
        for attr in ("board", "alight"):
            stop = getattr(leg, attr)
            if stop not in line.position:
                rep.add(f"{path}.{attr}", f"stop {stop!r} not on line {line.id!r}")
        if leg.board in line.position and leg.alight in line.position:
            if line.position[leg.board] >= line.position[leg.alight]:
                rep.add(path, f"alight stop {leg.alight!r} is not after board stop {leg.board!r}")
        if leg.shared_trip is not None:
            rep.add(path + ".shared_trip", "only AMoD legs can be shared")
    elif leg.mode == "amod":
        if leg.station not in sc.station_by_id:
            rep.add(path + ".station", f"unknown station {leg.station!r}")
    else:
        rep.add(path + ".mode", f"unknown leg mode {leg.mode!r}")


def _leg_ends(leg: Leg):
    if leg.mode == "transit":
        return leg.board, leg.alight
    return leg.station, leg.station


def validate_scenario(sc: Scenario) -> ValidationReport:
    """Check every scenario invariant; an empty report means the scenario is well formed."""
    rep = ValidationReport()
    _validate_grid(sc.grid, rep)
    T = sc.grid.T

    seen = set()
    for k, line in enumerate(sc.lines):
        p = f"lines[{k}]"
        if line.id in seen:
            rep.add(p + ".id", f"duplicate line id {line.id!r}")
        seen.add(line.id)
        if line.kind not in ("rail", "bus"):
            rep.add(p + ".kind", f"line kind must be rail or bus, got {line.kind!r}")
        if len(line.stops) < 2:
            rep.add(p + ".stops", "a line needs at least 2 stops")
        if len(line.segment_times) != max(len(line.stops) - 1, 0):
            rep.add(p + ".segment_times", "need one segment time per consecutive stop pair")
        if any(s < 0 for s in line.segment_times):
            rep.add(p + ".segment_times", "segment times must be >= 0")
        if len(set(line.stops)) != len(line.stops):
            rep.add(p + ".stops", "stops must be distinct")
        if not line.capacity > 0:
            rep.add(p + ".capacity", "capacity must be positive")
        if not line.cost_per_departure > 0:
            rep.add(p + ".cost_per_departure", "cost per departure must be positive")
        if line.fare is not None and line.fare < 0:
            rep.add(p + ".fare", "fare must be >= 0")

    seen = set()
    for k, st in enumerate(sc.stations):
        p = f"stations[{k}]"
        if st.station_id in seen:
            rep.add(p + ".station_id", f"duplicate station id {st.station_id!r}")
        seen.add(st.station_id)
        if not st.area > 0:
            rep.add(p + ".area", "area must be positive")
        if not st.shape_coeff > 0:
            rep.add(p + ".shape_coeff", "shape coefficient must be positive")

    seen = set()
    for k, c in enumerate(sc.commutes):
        p = f"commutes[{k}]"
        if c.id in seen:
            rep.add(p + ".id", f"duplicate commute id {c.id!r}")
        seen.add(c.id)
        if c.kind not in ("local", "downtown"):
            rep.add(p + ".kind", f"commute kind must be local or downtown, got {c.kind!r}")
        if len(c.demand) != T:
            rep.add(p + ".demand", f"demand length {len(c.demand)} != T = {T}")
        if any(not (d >= 0) for d in c.demand):
            rep.add(p + ".demand", "demand entries must be >= 0")

    route_keys = set()
    for k, r in enumerate(sc.routes):
        p = f"routes[{k}]"
        if r.commute not in sc.commute_index:
            rep.add(p + ".commute", f"unknown commute {r.commute!r}")
        if r.key in route_keys:
            rep.add(p + ".id", f"duplicate route id {r.id!r} for commute {r.commute!r}")
        route_keys.add(r.key)
        if not r.legs:
            rep.add(p + ".legs", "a route needs at least one leg")
            continue
        if r.walk_min < 0:
            rep.add(p + ".walk_min", "walking time must be >= 0")
        for i, leg in enumerate(r.legs):
            _validate_leg(sc, f"{p}.legs[{i}]", leg, rep)
        if r.mode_class and r.mode_class != r.derived_mode_class():
            rep.add(p + ".mode_class",
                    f"mode class {r.mode_class!r} inconsistent with legs ({r.derived_mode_class()})")
        for i in range(1, len(r.legs)):
            prev_end = _leg_ends(r.legs[i - 1])[1]
            start = _leg_ends(r.legs[i])[0]
            if prev_end != start and prev_end is not None and start is not None:
                rep.add(f"{p}.legs[{i}]", f"leg starts at {start!r} but previous leg ends at {prev_end!r}")
    for c in sc.commutes:
        if not sc.routes_by_commute.get(c.id):
            rep.add(f"commutes[{sc.commute_index[c.id]}]", f"commute {c.id!r} has no routes")

    b = sc.budgets
    if not 0 <= b.lb_rail <= b.ub_rail:
        rep.add("budgets", "need 0 <= lb_rail <= ub_rail")
    if b.ub_bus < 0:
        rep.add("budgets.ub_bus", "ub_bus must be >= 0")
    if b.N_bar < 0:
        rep.add("budgets.N_bar", "N_bar must be >= 0")
    if b.B_bus < 0 or b.B_rail < 0:
        rep.add("budgets", "departure budgets must be >= 0")
    if T >= 1 and sc.lines:
        min_rail = T * b.lb_rail * float(sum(l.cost_per_departure for l in sc.lines if l.kind == "rail"))
        if min_rail > b.B_rail + FEAS_TOL:
            rep.add("budgets.B_rail", f"rail budget {b.B_rail:g} below minimum service cost {min_rail:g}")

    f = sc.fares
    for name in ("transit_fare", "f_base", "f_book", "f_min", "pi_d", "pi_t"):
        if getattr(f, name) < 0:
            rep.add(f"fares.{name}", "fares must be >= 0")
    if not 0 <= f.transfer_discount <= 1:
        rep.add("fares.transfer_discount", "transfer discount must lie in [0, 1]")
    if not 0 <= f.lambda_min <= f.lambda_max:
        rep.add("fares", "need 0 <= lambda_min <= lambda_max")

    u = sc.utility
    for name in ("beta_time_transit", "beta_time_amod", "beta_money", "walk_speed", "amod_speed"):
        if not getattr(u, name) > 0:
            rep.add(f"choice.{name}", "must be positive")
    ch = sc.choice
    if ch.kind not in ("mnl", "nested"):
        rep.add("choice.kind", f"choice model must be mnl or nested, got {ch.kind!r}")
    for name in ("phi", "phi_P", "phi_A", "phi_PA"):
        if not getattr(ch, name) > 0:
            rep.add(f"choice.{name}", "nest parameters must be positive")
    if ch.kind == "nested":
        for name in ("phi_P", "phi_A", "phi_PA"):
            if ch.phi > getattr(ch, name) + 1e-12:
                rep.add(f"choice.{name}", f"nested logit needs phi <= {name}")

    routes = {r.key: r for r in sc.routes}
    for k, p in enumerate(sc.shared_trips):
        path = f"shared_trips[{k}]"
        if p.n_parties < 2:
            rep.add(path, "a shared trip needs at least 2 parties")
        commutes = set()
        for m, (cid, rid, i) in enumerate(p.members):
            r = routes.get((cid, rid))
            if r is None or not 0 <= i < len(r.legs):
                rep.add(f"{path}.members[{m}]", f"unknown route leg {(cid, rid, i)!r}")
                continue
            leg = r.legs[i]
            if leg.mode != "amod" or leg.station != p.station:
                rep.add(f"{path}.members[{m}]", "shared legs must be AMoD legs at the trip's station")
            if leg.shared_trip != p.id:
                rep.add(f"{path}.members[{m}]", "member leg does not reference the shared trip")
            if abs(leg.xi - 1.0 / max(p.n_parties, 1)) > 1e-9:
                rep.add(f"{path}.members[{m}]", "vehicle discount must equal 1/n_parties")
            commutes.add(cid)
        if len(commutes) != len({m[0] for m in p.members}) or len(commutes) < min(2, p.n_parties):
            rep.add(path, "shared trip parties must be distinct commutes")
    return rep


def require_valid(sc: Scenario) -> Scenario:
    rep = validate_scenario(sc)
    if not rep.ok:
        raise ScenarioError("invalid scenario:\n  " + "\n  ".join(rep.messages()))
    return sc


# ---------------------------------------------------------------------------
# design feasibility


@dataclass(frozen=True)
class Violation:
    constraint: str
    slack: float  # negative: amount by which the constraint is broken
    message: str

    def __str__(self):
        return self.message


def check_design_feasibility(d: DesignPoint, sc: Scenario, tol: float = FEAS_TOL) -> list:
    """List the constraints of the relaxed design set that ``d`` violates."""
    T, L, S = sc.T, len(sc.lines), len(sc.stations)
    x, N = np.asarray(d.x, dtype=float), np.asarray(d.N, dtype=float)
    if x.shape != (T, L) or N.shape != (T, S):
        raise ScenarioError(f"design dimensions x{x.shape}, N{N.shape} do not match "
                            f"scenario ({T}, {L}) and ({T}, {S})")
    b = sc.budgets
    out = []
    costs = sc.line_costs
    bus, rail = sc.bus_mask, sc.rail_mask

    used = float((x[:, bus] * costs[bus]).sum())
    if used > b.B_bus + tol:
        out.append(Violation("bus_budget", b.B_bus - used,
                             f"bus budget exceeded by {used - b.B_bus:g}"))
    used = float((x[:, rail] * costs[rail]).sum())
    if used > b.B_rail + tol:
        out.append(Violation("rail_budget", b.B_rail - used,
                             f"rail budget exceeded by {used - b.B_rail:g}"))
    for t in range(T):
        for k, line in enumerate(sc.lines):
            v = x[t, k]
            if line.kind == "rail":
                if v < b.lb_rail - tol:
                    out.append(Violation("rail_lower", v - b.lb_rail,
                                         f"rail {line.id} t={t}: {v:g} below minimum {b.lb_rail:g}"))
                if v > b.ub_rail + tol:
                    out.append(Violation("rail_upper", b.ub_rail - v,
                                         f"rail {line.id} t={t}: {v:g} above maximum {b.ub_rail:g}"))
            else:
                if v < -tol:
                    out.append(Violation("bus_nonneg", v, f"bus {line.id} t={t}: negative departures {v:g}"))
                if v > b.ub_bus + tol:
                    out.append(Violation("bus_upper", b.ub_bus - v,
                                         f"bus {line.id} t={t}: {v:g} above maximum {b.ub_bus:g}"))
        if S:
            if (N[t] < -tol).any():
                out.append(Violation("fleet_nonneg", float(N[t].min()), f"t={t}: negative fleet allocation"))
            tot = float(N[t].sum())
            if tot > b.N_bar + tol:
                out.append(Violation("fleet_size", b.N_bar - tot,
                                     f"t={t}: fleet {tot:g} exceeds N_bar {b.N_bar:g}"))
    f = sc.fares
    if d.lam < f.lambda_min - tol or d.lam > f.lambda_max + tol:
        out.append(Violation("discount", min(d.lam - f.lambda_min, f.lambda_max - d.lam),
                             f"discount {d.lam:g} outside [{f.lambda_min:g}, {f.lambda_max:g}]"))
    return out


def round_allocation(N) -> np.ndarray:
    """Integer fleet allocation obtained by rounding the relaxed one down."""
    return np.floor(np.asarray(N, dtype=float)).astype(int)
