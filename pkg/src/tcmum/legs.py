"""Leg-set classification.

Routes are addressed as ``(c, k)``: commute index and position in that
commute's route list. Legs are ``(c, k, i)`` with ``i`` zero-based. Stop
keyed sets use ``(stop_id, line_index)``.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

from .model import Scenario, ScenarioError


@dataclass
class LegIndex:
    first_boarding: dict = field(default_factory=lambda: defaultdict(list))  # K(s,l): routes
    transfers: dict = field(default_factory=lambda: defaultdict(list))  # H(s,l): legs
    boardings: dict = field(default_factory=lambda: defaultdict(list))  # U(s,l): legs
    through: dict = field(default_factory=lambda: defaultdict(list))  # I(s,l): legs
    direct: dict = field(default_factory=lambda: defaultdict(list))  # Y(s): routes
    first_mile: dict = field(default_factory=lambda: defaultdict(list))  # M(s): routes
    last_mile: dict = field(default_factory=lambda: defaultdict(list))  # N(s): legs
    transit_legs: dict = field(default_factory=dict)  # A(c,k): leg indices
    amod_legs: dict = field(default_factory=dict)  # B(c,k): leg indices

    def amod_sets(self):
        """Every AMoD leg once: ``(station, leg key)``."""
        for s, routes in self.direct.items():
            for c, k in routes:
                yield s, (c, k, 0)
        for s, routes in self.first_mile.items():
            for c, k in routes:
                yield s, (c, k, 0)
        for s, legs in self.last_mile.items():
            for key in legs:
                yield s, key


def route_keys(sc: Scenario):
    """``(c, k, route)`` for every route, grouped by commute."""
    for c, com in enumerate(sc.commutes):
        for k, r in enumerate(sc.routes_by_commute.get(com.id, ())):
            yield c, k, r


def classify_legs(sc: Scenario) -> LegIndex:
    idx = LegIndex()
    for c, k, route in route_keys(sc):
        idx.transit_legs[(c, k)] = [i for i, leg in enumerate(route.legs) if leg.mode == "transit"]
        idx.amod_legs[(c, k)] = [i for i, leg in enumerate(route.legs) if leg.mode == "amod"]
        n = len(route.legs)
        for i, leg in enumerate(route.legs):
            if leg.mode == "transit":
                line = sc.line_by_id.get(leg.line)
                if line is None:
                    raise ScenarioError(f"route {route.id!r} of {route.commute!r}: unknown line {leg.line!r}")
                if leg.board not in line.position or leg.alight not in line.position:
                    bad = leg.board if leg.board not in line.position else leg.alight
                    raise ScenarioError(
                        f"route {route.id!r} of {route.commute!r}: stop {bad!r} not on line {line.id!r}")
                l = sc.line_index[leg.line]
                key = (leg.board, l)
                if i == 0:
                    idx.first_boarding[key].append((c, k))
                else:
                    idx.transfers[key].append((c, k, i))
                idx.boardings[key].append((c, k, i))
                pb, pa = line.position[leg.board], line.position[leg.alight]
                for stop in line.stops[pb:pa]:
                    idx.through[(stop, l)].append((c, k, i))
            else:
                if leg.station not in sc.station_by_id:
                    raise ScenarioError(
                        f"route {route.id!r} of {route.commute!r}: unknown station {leg.station!r}")
                if i > 0:
                    idx.last_mile[leg.station].append((c, k, i))
                elif n == 1:
                    idx.direct[leg.station].append((c, k))
                else:
                    idx.first_mile[leg.station].append((c, k))
    return idx
