"""Brute-force references: design grid search and integral boarding enumeration."""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .evaluation import Evaluator, objective_breakdown
from .flows import BoardingFlows
from .legs import classify_legs
from .model import DesignPoint, Scenario, check_design_feasibility

GRID_LIMIT = 10_000
ENUM_LIMIT = 1_000_000


class OracleRefused(ValueError):
    """The requested search is larger than the oracle accepts."""


@dataclass
class OracleResult:
    best: DesignPoint
    best_objective: float
    grid_size: int
    objectives: list = field(default_factory=list)  # (grid index tuple, objective) per feasible point


def _eval_points(args):
    sc, points = args
    ev = Evaluator(sc)
    return [ev.objective(d) for d in points]


def grid_oracle(sc: Scenario, x_grid, N_grid, lambda_grid, jobs: int = 1,
                max_points: int = GRID_LIMIT) -> OracleResult:
    """Exhaustive true evaluation over the feasible part of a Cartesian design grid."""
    size = len(x_grid) * len(N_grid) * len(lambda_grid)
    if size > max_points:
        raise OracleRefused(f"grid has {size} points, limit is {max_points}")
    index, points = [], []
    for (i, x), (j, N), (k, lam) in itertools.product(enumerate(x_grid), enumerate(N_grid),
                                                     enumerate(lambda_grid)):
        d = DesignPoint(np.asarray(x, float), np.asarray(N, float), float(lam))
        if not check_design_feasibility(d, sc):
            index.append((i, j, k))
            points.append(d)
    if not points:
        raise ValueError("empty feasible grid")
    if jobs > 1:
        chunks = [points[n::jobs] for n in range(jobs)]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_eval_points, [(sc, c) for c in chunks]))
        values = [0.0] * len(points)
        for n, part in enumerate(parts):
            values[n::jobs] = part
    else:
        values = _eval_points((sc, points))
    best = int(np.argmin(values))
    return OracleResult(points[best], float(values[best]), len(points), list(zip(index, values)))


# ---------------------------------------------------------------------------
# integral boarding enumeration


def _schedules(T: int, avail: np.ndarray, cap_total: int):
    """Nonnegative integer vectors over ``T`` intervals, zero where unavailable, sum <= cap_total."""
    slots = [t for t in range(T) if avail[t]]

    def rec(pos, left):
        if pos == len(slots):
            yield ()
            return
        for v in range(left + 1):
            for rest in rec(pos + 1, left - v):
                yield (v,) + rest

    for vals in rec(0, cap_total):
        z = np.zeros(T, dtype=int)
        z[slots] = vals
        yield z


def enumerate_boarding_oracle(sc: Scenario, design: DesignPoint, theta=None,
                              max_space: int = ENUM_LIMIT):
    """Best integral boarding schedule by exhaustive search.

    Feasibility is checked constraint by constraint on each candidate and
    the objective is summed from the queue definitions, independently of
    the LP builders. Requires integral cumulative route demand.
    Returns ``(objective, BoardingFlows)``.
    """
    from .choice import ChoiceModel

    T, dt = sc.T, sc.delta_t
    idx = classify_legs(sc)
    theta = ChoiceModel(sc).theta(design) if theta is None else theta
    d = sc.demand
    x, N = np.asarray(design.x, float), np.asarray(design.N, float)
    routes = [(c, k, r) for c, com in enumerate(sc.commutes) for k, r in enumerate(sc.routes_by_commute[com.id])]
    legs = [(c, k, i) for c, k, r in routes for i in range(len(r.legs))]
    route_of = {(c, k): r for c, k, r in routes}

    cum_dem = {}
    for c, k, r in routes:
        cd = np.cumsum(d[c] * np.asarray(theta[c])[k])
        if not np.allclose(cd, np.round(cd), atol=1e-9):
            raise ValueError("enumeration needs integral cumulative route demand")
        cum_dem[(c, k)] = np.round(cd).astype(int)

    def available(c, k, i):
        leg = route_of[(c, k)].legs[i]
        if leg.mode == "transit":
            return x[:, sc.line_index[leg.line]] > 0
        return N[:, sc.station_index[leg.station]] > 0

    options = {}
    for c, k, i in legs:
        total = int(cum_dem[(c, k)][-1]) if T else 0
        opts = []
        for z in _schedules(T, available(c, k, i), total):
            if np.all(np.cumsum(z) <= cum_dem[(c, k)]):
                opts.append(z)
        options[(c, k, i)] = opts
    space = math.prod(len(v) for v in options.values())
    if space > max_space:
        raise OracleRefused(f"search space has {space} schedules, limit is {max_space}")

    # capacity and availability rows from the leg sets
    cap_rows = []
    for (stop, l), members in idx.through.items():
        if members:
            cap_rows.append((members, sc.lines[l].capacity * x[:, l]))
    fleet_rows = []
    shared = bool(sc.shared_trips)
    for s, members in _amod_members(idx).items():
        ratio = sc.availability_ratio(s)
        fleet_rows.append((members, ratio * N[:, sc.station_index[s]]))

    def xi(key):
        c, k, i = key
        return route_of[(c, k)].legs[i].xi if shared else 1.0

    def shift(c, k, i):
        return sc.leg_shift(route_of[(c, k)].legs[i])

    def feasible(z):
        for members, cap in cap_rows:
            if np.any(sum(z[m] for m in members) > cap + 1e-9):
                return False
        for members, cap in fleet_rows:
            if np.any(sum(xi(m) * z[m] for m in members) > cap + 1e-9):
                return False
        for c, k, i in legs:
            if i > 0:
                prev = np.cumsum(z[(c, k, i - 1)])
                sh = shift(c, k, i - 1)
                lagged = np.concatenate([np.zeros(sh, dtype=int), prev])[:T]
                if np.any(np.cumsum(z[(c, k, i)]) > lagged):
                    return False
        for p in sc.shared_trips:
            sums = {}
            for com, rid, i in p.members:
                c = sc.commute_index[com]
                k = next(n for n, r in enumerate(sc.routes_by_commute[com]) if r.id == rid)
                sums[c] = sums.get(c, 0) + z[(c, k, i)]
            vals = list(sums.values())
            if any(np.any(v != vals[0]) for v in vals[1:]):
                return False
        return True

    # the objective is affine in z: base value plus one contribution per leg schedule
    zero = {key: np.zeros(T) for key in legs}
    base = objective_breakdown(sc, BoardingFlows(zero), theta, design, idx)["total"]
    contrib = {}
    for key in legs:
        vals = []
        for z in options[key]:
            only = dict(zero)
            only[key] = z.astype(float)
            vals.append(objective_breakdown(sc, BoardingFlows(only), theta, design, idx)["total"] - base)
        contrib[key] = vals

    best, best_z = math.inf, None
    ranges = [range(len(options[key])) for key in legs]
    for pick in itertools.product(*ranges):
        obj = base + sum(contrib[key][n] for key, n in zip(legs, pick))
        if obj >= best - 1e-12:
            continue
        z = {key: options[key][n] for key, n in zip(legs, pick)}
        if feasible(z):
            best, best_z = obj, BoardingFlows({key: v.astype(float) for key, v in z.items()})
    if best_z is None:
        raise ValueError("no feasible integral boarding schedule")
    return best, best_z


def _amod_members(idx) -> dict:
    out = {}
    for s, key in idx.amod_sets():
        out.setdefault(s, []).append(key)
    return out
