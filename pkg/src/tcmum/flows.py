"""Boarding-flow linear programs.

Variables ``z[c,k,i,t]`` count commuters of commute ``c`` on route ``k``
boarding leg ``i`` on the service that starts in interval ``t``. A leg
boarded in ``t`` releases its riders for the next leg in interval
``t + shift`` with ``shift = ceil(travel_min / delta_t)``.

Excess waiting is accounted through cumulative sums. A rider counted in the
queue of interval ``tau`` contributes ``delta_t`` once per interval, so a
boarding in ``t`` removes ``delta_t * (T - t)`` and an arrival from the
previous leg in ``t + shift`` adds ``delta_t * (T - t - shift)``. Demand
arriving in ``t`` adds ``delta_t * (T - t)`` per commuter; because route
probabilities of a commute sum to one this term does not depend on the
probabilities and is carried as the objective constant.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .legs import LegIndex, classify_legs, route_keys
from .lp import LE, EQ, LinearProgram, LPSolution
from .model import DesignPoint, Scenario
from .params import OptimizerParams


@dataclass
class BoardingFlows:
    """Boardings per leg: ``z[(c, k, i)]`` is an array over intervals."""

    z: dict = field(default_factory=dict)

    def first_leg_total(self, c: int) -> float:
        return float(sum(v.sum() for (cc, _, i), v in self.z.items() if cc == c and i == 0))

    def route(self, c: int, k: int, i: int = 0) -> np.ndarray:
        return self.z[(c, k, i)]


class FlowModel:
    """Leg structure shared by the inner and per-iteration programs."""

    def __init__(self, sc: Scenario, idx: LegIndex | None = None):
        self.sc = sc
        self.idx = idx or classify_legs(sc)
        T, dt = sc.T, sc.delta_t
        self.routes = {}
        self.legs = []
        self.leg = {}
        self.shift = {}
        for c, k, route in route_keys(sc):
            self.routes[(c, k)] = route
            for i, leg in enumerate(route.legs):
                key = (c, k, i)
                self.legs.append(key)
                self.leg[key] = leg
                self.shift[key] = sc.leg_shift(leg)
        t = np.arange(T)
        self.base_cost = {}
        for key in self.legs:
            c, k, i = key
            route = self.routes[(c, k)]
            coef = -dt * (T - t).astype(float)
            if i == 0:
                coef = coef + route.walk_min
            if i + 1 < len(route.legs):
                coef = coef + dt * np.maximum(0, T - t - self.shift[key])
            self.base_cost[key] = coef
        # capacity rows: (line index, stop, legs)
        self.through = [(l, stop, legs) for (stop, l), legs in sorted(
            self.idx.through.items(), key=lambda kv: (kv[0][1], sc.lines[kv[0][1]].position[kv[0][0]]))
            if legs]
        self.amod = {}
        for s, key in self.idx.amod_sets():
            self.amod.setdefault(sc.station_index[s], []).append(key)
        for keys in self.amod.values():
            keys.sort()
        self.line_of = {key: sc.line_index[leg.line] for key, leg in self.leg.items() if leg.mode == "transit"}
        self.station_of = {key: sc.station_index[leg.station] for key, leg in self.leg.items()
                           if leg.mode == "amod"}
        demand = sc.demand
        self.arrival_weight = (T - t).astype(float) * dt
        self.demand = demand

    # -- design dependent pieces ----------------------------------------
    def available(self, key, design: DesignPoint) -> np.ndarray:
        if key in self.line_of:
            return np.asarray(design.x, float)[:, self.line_of[key]] > 0
        return np.asarray(design.N, float)[:, self.station_of[key]] > 0

    def wait_cost(self, key, design: DesignPoint) -> np.ndarray:
        """Expected wait per boarding (minutes); zero where the service is absent."""
        sc = self.sc
        if key in self.line_of:
            x = np.asarray(design.x, float)[:, self.line_of[key]]
            return np.where(x > 0, sc.delta_t / (2.0 * np.where(x > 0, x, 1.0)), 0.0)
        s = self.station_of[key]
        n = np.asarray(design.N, float)[:, s]
        scale = sc.amod_wait_min(sc.stations[s].station_id, 1.0)
        return np.where(n > 0, scale / np.sqrt(np.where(n > 0, n, 1.0)), 0.0)

    def cost(self, key, design: DesignPoint) -> np.ndarray:
        return self.base_cost[key] + self.wait_cost(key, design)

    def constant(self, theta) -> float:
        """Arrival term: every commuter waits from arrival unless boarded."""
        total = 0.0
        for c in range(len(self.sc.commutes)):
            s = np.asarray(theta[c]).sum(axis=0) if len(theta[c]) else np.zeros(self.sc.T)
            w = np.where(s > 0, s, 1.0)
            total += float(np.sum(self.arrival_weight * self.demand[c] * w))
        return total

    def xi(self, key, shared: bool) -> float:
        return self.leg[key].xi if shared else 1.0

    # -- program assembly -----------------------------------------------
    def _add_z(self, lp: LinearProgram, design: DesignPoint):
        cols = {}
        for key in self.legs:
            avail = self.available(key, design)
            cost = self.cost(key, design)
            c, k, i = key
            cols[key] = np.array([
                lp.add_var(f"z[{c},{k},{i},{t}]", 0.0, np.inf if avail[t] else 0.0,
                           cost[t] if avail[t] else 0.0)
                for t in range(self.sc.T)])
        return cols

    def _add_flow_rows(self, lp, zc, demand_rhs, shared, x_cols=None, n_cols=None, x_val=None, n_val=None):
        """Capacity, availability, cumulative demand, precedence and sharing rows.

        ``demand_rhs(c, k, tau)`` returns ``(rhs, [(col, coef), ...])`` for the
        cumulative demand row with extra left-hand terms.
        """
        sc, T = self.sc, self.sc.T
        for l, stop, legs in self.through:
            K = sc.lines[l].capacity
            for t in range(T):
                row = [(int(zc[key][t]), 1.0) for key in legs]
                if x_cols is not None:
                    lp.add_row(row + [(int(x_cols[t, l]), -K)], LE, 0.0, f"cap[{l},{stop},{t}]")
                else:
                    lp.add_row(row, LE, K * float(x_val[t, l]), f"cap[{l},{stop},{t}]")
        for s, keys in sorted(self.amod.items()):
            ratio = sc.availability_ratio(sc.stations[s].station_id)
            for t in range(T):
                row = [(int(zc[key][t]), self.xi(key, shared)) for key in keys]
                if n_cols is not None:
                    lp.add_row(row + [(int(n_cols[t, s]), -ratio)], LE, 0.0, f"avail[{s},{t}]")
                else:
                    lp.add_row(row, LE, ratio * float(n_val[t, s]), f"avail[{s},{t}]")
        for (c, k), route in self.routes.items():
            for tau in range(T):
                rhs, extra = demand_rhs(c, k, tau)
                row = [(int(zc[(c, k, 0)][t]), 1.0) for t in range(tau + 1)] + extra
                lp.add_row(row, LE, rhs, f"dem[{c},{k},{tau}]")
            for i in range(1, len(route.legs)):
                sh = self.shift[(c, k, i - 1)]
                for tau in range(T):
                    row = [(int(zc[(c, k, i)][t]), 1.0) for t in range(tau + 1)]
                    row += [(int(zc[(c, k, i - 1)][t]), -1.0) for t in range(tau + 1 - sh)]
                    lp.add_row(row, LE, 0.0, f"prec[{c},{k},{i},{tau}]")
        if shared:
            for trip in sc.shared_trips:
                groups = {}
                for com, rid, i in trip.members:
                    c = sc.commute_index[com]
                    k = next(n for n, r in enumerate(sc.routes_by_commute[com]) if r.id == rid)
                    groups.setdefault(c, []).append((c, k, i))
                members = [groups[c] for c in sorted(groups)]
                for a, b in zip(members, members[1:]):
                    for t in range(T):
                        row = [(int(zc[key][t]), 1.0) for key in a] + [(int(zc[key][t]), -1.0) for key in b]
                        lp.add_row(row, EQ, 0.0, f"share[{trip.id},{t}]")

    def flows(self, sol: LPSolution, zc) -> BoardingFlows:
        return BoardingFlows({key: np.maximum(sol.x[cols], 0.0) for key, cols in zc.items()})


def build_inner_lp(sc: Scenario, theta, design: DesignPoint, shared: bool | None = None,
                   model: FlowModel | None = None):
    """Boarding LP for a fixed design and fixed route probabilities.

    ``theta[c]`` is a routes x T array. Returns ``(lp, z_columns)``.
    """
    fm = model or FlowModel(sc)
    shared = bool(sc.shared_trips) if shared is None else shared
    lp = LinearProgram("inner")
    zc = fm._add_z(lp, design)
    lp.constant = fm.constant(theta)
    cum = [np.cumsum(fm.demand[c][None, :] * np.asarray(theta[c]), axis=1) for c in range(len(sc.commutes))]

    def demand_rhs(c, k, tau):
        return float(cum[c][k, tau]), []

    fm._add_flow_rows(lp, zc, demand_rhs, shared, x_val=np.asarray(design.x, float),
                      n_val=np.asarray(design.N, float))
    return lp, zc


@dataclass
class IterationColumns:
    z: dict
    x: np.ndarray  # T x lines
    N: np.ndarray  # T x stations
    lam: int

    def design(self, sol: LPSolution) -> DesignPoint:
        return DesignPoint(sol.x[self.x].astype(float), sol.x[self.N].astype(float), float(sol.x[self.lam]))


def trust_region_bounds(sc: Scenario, anchor: DesignPoint, params: OptimizerParams):
    """Per-variable boxes: trust region intersected with the feasible set."""
    b, f = sc.budgets, sc.fares
    x = np.asarray(anchor.x, float)
    rho = np.where(sc.rail_mask, params.rho_rail, params.rho_bus)[None, :]
    lo_kind = np.where(sc.rail_mask, b.lb_rail, 0.0)[None, :]
    hi_kind = np.where(sc.rail_mask, b.ub_rail, b.ub_bus)[None, :]
    x_lo = np.maximum(lo_kind, x - rho)
    x_hi = np.minimum(hi_kind, x + rho)
    # an anchor outside its box (within tolerance) keeps its own value reachable
    x_lo = np.minimum(x_lo, x)
    x_hi = np.maximum(x_hi, x)
    n = np.asarray(anchor.N, float)
    n_lo = np.minimum(np.maximum(0.0, n - params.eta), n)
    n_hi = np.maximum(np.minimum(b.N_bar, n + params.eta), n)
    lam = float(anchor.lam)
    l_lo = min(max(f.lambda_min, lam - params.sigma), lam)
    l_hi = max(min(f.lambda_max, lam + params.sigma), lam)
    return (x_lo, x_hi), (n_lo, n_hi), (l_lo, l_hi)


def build_iteration_lp(sc: Scenario, anchor: DesignPoint, theta_hat, params: OptimizerParams,
                       model: FlowModel | None = None, fixed_x: dict | None = None):
    """Trust-region LP around ``anchor`` with linearised probabilities.

    Wait coefficients are frozen at the anchor; ``theta_hat`` (an
    :class:`~tcmum.choice.AffineTheta` built at the same anchor) enters the
    cumulative demand rows. ``fixed_x`` pins selected ``(t, line)`` entries.
    Returns ``(lp, IterationColumns)``; the anchor with ``z = 0`` is
    feasible and is supplied as the starting point.
    """
    fm = model or FlowModel(sc)
    shared = bool(sc.shared_trips)
    T, L, S = sc.T, len(sc.lines), len(sc.stations)
    b = sc.budgets
    lp = LinearProgram("iteration")
    zc = fm._add_z(lp, anchor)
    lp.constant = fm.constant(theta_hat.theta0)
    (x_lo, x_hi), (n_lo, n_hi), (l_lo, l_hi) = trust_region_bounds(sc, anchor, params)
    x_cols = np.zeros((T, L), dtype=int)
    for t in range(T):
        for l in range(L):
            lo, hi = x_lo[t, l], x_hi[t, l]
            if fixed_x and (t, l) in fixed_x:
                lo = hi = fixed_x[(t, l)]
            x_cols[t, l] = lp.add_var(f"x[{t},{l}]", lo, hi)
    n_cols = np.zeros((T, S), dtype=int)
    for t in range(T):
        for s in range(S):
            n_cols[t, s] = lp.add_var(f"N[{t},{s}]", n_lo[t, s], n_hi[t, s])
    lam_col = lp.add_var("lam", l_lo, l_hi)

    def col(key):
        if key[0] == "x":
            return int(x_cols[key[2], key[1]])
        if key[0] == "N":
            return int(n_cols[key[2], key[1]])
        return lam_col

    # cumulative affine demand: sum_{t<=tau} d_t * theta_hat_t
    cache = {}

    def demand_rhs(c, k, tau):
        if (c, k) not in cache:
            rows = []
            const, terms = 0.0, {}
            for t in range(T):
                d = float(fm.demand[c][t])
                if d != 0.0:
                    c0, coefs = theta_hat.terms(c, k, t)
                    const += d * c0
                    for key, g in coefs:
                        j = col(key)
                        terms[j] = terms.get(j, 0.0) - d * g
                rows.append((const, dict(terms)))
            cache[(c, k)] = rows
        const, terms = cache[(c, k)][tau]
        return const, list(terms.items())

    fm._add_flow_rows(lp, zc, demand_rhs, shared, x_cols=x_cols, n_cols=n_cols)

    bus = np.flatnonzero(sc.bus_mask)
    rail = np.flatnonzero(sc.rail_mask)
    costs = sc.line_costs
    if len(bus):
        lp.add_row([(int(x_cols[t, l]), costs[l]) for t in range(T) for l in bus], LE, b.B_bus, "budget_bus")
    if len(rail):
        lp.add_row([(int(x_cols[t, l]), costs[l]) for t in range(T) for l in rail], LE, b.B_rail, "budget_rail")
    if S:
        for t in range(T):
            lp.add_row([(int(n_cols[t, s]), 1.0) for s in range(S)], LE, b.N_bar, f"fleet[{t}]")

    start = np.zeros(lp.n_vars)
    start[x_cols] = np.asarray(anchor.x, float)
    if fixed_x:
        for (t, l), v in fixed_x.items():
            start[x_cols[t, l]] = v
    start[n_cols] = np.asarray(anchor.N, float)
    start[lam_col] = float(anchor.lam)
    lp.start = start
    return lp, IterationColumns(zc, x_cols, n_cols, lam_col)
