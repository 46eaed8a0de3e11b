"""Synthetic instances: the shipped micro and desk-scale scenarios and the LP test family."""

from __future__ import annotations

import math

import numpy as np

from .choice import ChoiceModelSpec, UtilityParams
from .model import (Budgets, Commute, CommuteRoute, Leg, Scenario, StationRegion, TimeGrid,
                    TransitLine)
from .params import OptimizerParams
from .pricing import FareSchedule
from .units import mph_to_kmh


def _amod_leg(station: str, d_km: float, speed_mph: float = 20.0, **kw) -> Leg:
    return Leg(mode="amod", station=station, distance_km=round(d_km, 3),
               travel_min=round(d_km / mph_to_kmh(speed_mph) * 60.0, 3), **kw)


def _transit_leg(line: TransitLine, board: str, alight: str) -> Leg:
    return Leg(mode="transit", line=line.id, board=board, alight=alight,
               travel_min=line.travel_min(board, alight))


def micro_scenario() -> Scenario:
    """Two lines, one station, three commutes, four intervals."""
    grid = TimeGrid("07:00", "07:20", 4, 5.0)
    bus = TransitLine("B1", "bus", ("A", "B", "S"), (4.0, 4.0), 40.0)
    rail = TransitLine("R", "rail", ("S", "DT"), (10.0,), 300.0)
    station = StationRegion("S", 90.0, 0.667, (0.0, 0.0))
    commutes = (
        Commute("A-B", "local", (3.0, 4.0, 4.0, 2.0), (-3.0, 0.0), (-1.5, 0.0)),
        Commute("A-DT", "downtown", (5.0, 6.0, 6.0, 4.0), (-3.0, 0.0), (0.0, 12.0)),
        Commute("B-DT", "downtown", (4.0, 5.0, 5.0, 3.0), (-1.5, 0.0), (0.0, 12.0)),
    )
    routes = (
        CommuteRoute("A-B", "bus", (_transit_leg(bus, "A", "B"),), 4.0, "P"),
        CommuteRoute("A-B", "amod", (_amod_leg("S", 1.8),), 0.0, "A"),
        CommuteRoute("A-DT", "bus_rail", (_transit_leg(bus, "A", "S"), _transit_leg(rail, "S", "DT")), 5.0, "P"),
        CommuteRoute("A-DT", "amod_rail", (_amod_leg("S", 3.2), _transit_leg(rail, "S", "DT")), 2.0, "PA"),
        CommuteRoute("B-DT", "rail", (_transit_leg(rail, "S", "DT"),), 18.0, "P"),
        CommuteRoute("B-DT", "bus_rail", (_transit_leg(bus, "B", "S"), _transit_leg(rail, "S", "DT")), 4.0, "P"),
    )
    return Scenario(
        grid=grid, lines=(bus, rail), stations=(station,), commutes=commutes, routes=routes,
        budgets=Budgets(B_bus=3.0, B_rail=5.0, lb_rail=0.5, ub_rail=2.5, ub_bus=1.0, N_bar=10.0),
        fares=FareSchedule(), utility=UtilityParams(), choice=ChoiceModelSpec(),
        algorithm=OptimizerParams(starts=4), name="micro",
    )


def desk_scenario(seed: int = 7) -> Scenario:
    """Five bus lines, one rail line, one station, eight 5-minute intervals, 30 commutes."""
    rng = np.random.default_rng(seed)
    T = 8
    grid = TimeGrid("07:00", "07:40", T, 5.0)
    buses = (
        TransitLine("B1", "bus", ("N1", "N2", "S"), (5.0, 4.0), 40.0),
        TransitLine("B2", "bus", ("E1", "E2", "S"), (4.0, 5.0), 40.0),
        TransitLine("B3", "bus", ("W1", "W2", "S"), (6.0, 3.0), 40.0),
        TransitLine("B4", "bus", ("N2", "E2", "X1"), (4.0, 4.0), 40.0),
        TransitLine("B5", "bus", ("W2", "SO1", "SO2"), (5.0, 5.0), 40.0),
    )
    rail = TransitLine("R", "rail", ("S", "M1", "DT"), (7.0, 8.0), 400.0)
    station = StationRegion("S", 90.0, 0.667, (0.0, 0.0))
    xy = {"N1": (0.0, 5.0), "N2": (0.0, 2.6), "E1": (5.2, 0.0), "E2": (2.8, 0.0), "W1": (-5.5, 0.0),
          "W2": (-2.5, 0.0), "X1": (3.0, 3.0), "SO1": (-2.0, -2.5), "SO2": (-0.5, -4.5), "S": (0.0, 0.0)}
    shape = np.array([0.6, 0.9, 1.2, 1.3, 1.2, 1.0, 0.8, 0.6])

    commutes, routes = [], []

    def near(p):
        return tuple(round(v + rng.uniform(-0.4, 0.4), 3) for v in p)

    locals_ = [(b, i, j) for b in buses for i in range(3) for j in range(i + 1, 3)]
    for n in range(15):
        line, i, j = locals_[n % len(locals_)]
        a, b = line.stops[i], line.stops[j]
        cid = f"L{n + 1:02d}"
        o, d = near(xy[a]), near(xy[b])
        dist = math.dist(o, d) * 1.3 + 0.5
        demand = tuple(round(float(v), 1) for v in shape * rng.uniform(1.5, 3.5))
        commutes.append(Commute(cid, "local", demand, o, d))
        routes.append(CommuteRoute(cid, "bus", (_transit_leg(line, a, b),),
                                   round(float(rng.uniform(3, 8)), 1), "P"))
        routes.append(CommuteRoute(cid, "amod", (_amod_leg("S", dist),), 0.0, "A"))

    feeders = [(b, s) for b in buses[:3] for s in b.stops[:2]]
    for n in range(15):
        line, a = feeders[n % len(feeders)]
        cid = f"D{n + 1:02d}"
        o = near(xy[a])
        demand = tuple(round(float(v), 1) for v in shape * rng.uniform(2.5, 5.0))
        commutes.append(Commute(cid, "downtown", demand, o, (0.0, 15.0)))
        to_station = math.dist(o, xy["S"])
        rail_leg = _transit_leg(rail, "S", "DT")
        routes.append(CommuteRoute(cid, "rail", (rail_leg,), round(to_station / 4.83 * 60 * 0.5, 1), "P"))
        routes.append(CommuteRoute(cid, "bus_rail", (_transit_leg(line, a, "S"), rail_leg),
                                   round(float(rng.uniform(3, 7)), 1), "P"))
        routes.append(CommuteRoute(cid, "amod_rail", (_amod_leg("S", to_station * 1.3 + 0.3), rail_leg),
                                   round(float(rng.uniform(1, 3)), 1), "PA"))

    return Scenario(
        grid=grid, lines=buses + (rail,), stations=(station,), commutes=tuple(commutes),
        routes=tuple(routes),
        budgets=Budgets(B_bus=24.0, B_rail=10.0, lb_rail=0.5, ub_rail=2.5, ub_bus=1.0, N_bar=20.0),
        fares=FareSchedule(), utility=UtilityParams(), choice=ChoiceModelSpec(),
        algorithm=OptimizerParams(), name="desk",
    )


def unit_ratio_station(station_id: str = "S", speed_mph: float = 20.0, delta_t: float = 5.0) -> StationRegion:
    """Station whose availability ratio is one vehicle-trip per vehicle per interval."""
    km = delta_t / 60.0 * mph_to_kmh(speed_mph)
    return StationRegion(station_id, km * km, 1.0, (0.0, 0.0))


def lp_micro_instance(rng: np.random.Generator):
    """Small integral boarding instance and a design for it.

    Up to 3 two-stop lines of unit capacity, up to 4 intervals, up to 5
    commutes each with a single one-leg route (bus or AMoD), integral
    demand. Returns ``(scenario, design)``.
    """
    from .model import DesignPoint

    T = int(rng.integers(2, 5))
    n_lines = int(rng.integers(1, 4))
    lines = tuple(TransitLine(f"B{j + 1}", "bus", (f"a{j}", f"b{j}"), (0.0,), 1.0) for j in range(n_lines))
    station = unit_ratio_station()
    grid = TimeGrid("07:00", f"07:{5 * T:02d}", T, 5.0)
    n_com = int(rng.integers(2, 6))
    commutes, routes = [], []
    for c in range(n_com):
        total = int(rng.integers(1, 3))
        dem = np.zeros(T)
        for _ in range(total):
            dem[rng.integers(0, T)] += 1
        cid = f"c{c}"
        commutes.append(Commute(cid, "local", tuple(float(v) for v in dem)))
        if rng.random() < 0.25:
            routes.append(CommuteRoute(cid, "amod", (Leg("amod", station="S"),), 0.0, "A"))
        else:
            line = lines[int(rng.integers(n_lines))]
            routes.append(CommuteRoute(cid, "bus", (Leg("transit", line.id, line.stops[0], line.stops[1]),),
                                       float(rng.integers(0, 6)), "P"))
    x = rng.integers(0, 2, size=(T, n_lines)).astype(float)
    x[rng.random((T, n_lines)) < 0.2] = 2.0
    budget = float(x.sum())
    N = rng.integers(0, 3, size=(T, 1)).astype(float)
    sc = Scenario(
        grid=grid, lines=lines, stations=(station,), commutes=tuple(commutes), routes=tuple(routes),
        budgets=Budgets(B_bus=budget, B_rail=0.0, ub_bus=2.0, N_bar=2.0), name="lp-micro",
    )
    return sc, DesignPoint(x, N, 1.0)
