"""Pairing of first-mile and last-mile AMoD legs into shared trips."""

from __future__ import annotations

import math
from dataclasses import replace

from .model import CommuteRoute, Scenario, SharedTrip
from .units import mph_to_kmh


def _pair_times(a, b, hub, speed_kms: float):
    """Best ``(wait, delay)`` in seconds over both service orders.

    ``wait`` is the pickup detour between the two parties; ``delay`` is the
    extra ride time of the party served first compared with riding alone.
    """
    gap = math.dist(a, b) / speed_kms
    best = None
    for first, second in ((a, b), (b, a)):
        alone = math.dist(first, hub) / speed_kms
        pooled = gap + math.dist(second, hub) / speed_kms
        cand = (gap, pooled - alone)
        if best is None or cand[1] < best[1]:
            best = cand
    return best


def _candidates(sc: Scenario, station: str):
    """AMoD legs at ``station`` feeding or leaving rail, with the commuter's far end."""
    out = []
    for r in sc.routes:
        if r.is_shared or len(r.legs) < 2:
            continue
        com = sc.commutes[sc.commute_index[r.commute]]
        for i, leg in enumerate(r.legs):
            if leg.mode != "amod" or leg.station != station:
                continue
            end = com.origin if i == 0 else com.destination
            if end is not None:
                out.append(("first" if i == 0 else "last", r, i, tuple(end)))
    return out


def generate_sharing_scenarios(sc: Scenario, station: str, delta_w: float, delta_d: float,
                               max_parties: int = 2):
    """Shared trips for every feasible pair of AMoD legs at ``station``.

    ``delta_w`` and ``delta_d`` are the maximum pickup wait and per-party
    delay in seconds, with straight-line distances at the AMoD speed. Each
    trip duplicates both member routes into variants whose shared leg has
    vehicle discount 1/2. Returns ``(trips, scenario with the variants)``.
    """
    if max_parties != 2:
        raise ValueError("only two-party sharing is supported")
    st = sc.station_by_id[station]
    if st.xy is None:
        return (), sc
    speed_kms = mph_to_kmh(sc.utility.amod_speed) / 3600.0
    cands = _candidates(sc, station)
    trips, extra = [], []
    counter = {}
    for n, (kind_a, ra, ia, ea) in enumerate(cands):
        for kind_b, rb, ib, eb in cands[n + 1:]:
            if kind_a != kind_b or ra.commute == rb.commute:
                continue
            wait, delay = _pair_times(ea, eb, st.xy, speed_kms)
            if wait > delta_w or delay > delta_d:
                continue
            pid = f"{station}:{kind_a}:{len(trips) + 1}"
            members = []
            for r, i in ((ra, ia), (rb, ib)):
                k = counter[r.key] = counter.get(r.key, 0) + 1
                legs = list(r.legs)
                legs[i] = replace(legs[i], shared_trip=pid, xi=0.5)
                variant = CommuteRoute(r.commute, f"{r.id}~{k}", tuple(legs), r.walk_min, r.mode_class)
                extra.append(variant)
                members.append((r.commute, variant.id, i))
            trips.append(SharedTrip(pid, station, tuple(members)))
    if not trips:
        return (), sc
    return tuple(trips), sc.replace(routes=sc.routes + tuple(extra), shared_trips=sc.shared_trips + tuple(trips))
