"""True evaluation of a design: probabilities, boarding flows and report metrics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .choice import ChoiceModel
from .flows import BoardingFlows, FlowModel, build_inner_lp
from .legs import LegIndex
from .lp import LPError, solve_lp
from .model import DesignPoint, Scenario, ScenarioError, check_design_feasibility

REPORT_COLUMNS = (
    "gamma", "n_bar", "avg_disutility", "avg_walking", "avg_waiting", "avg_utility",
    "line_utilization", "amod_utilization", "lambda_star", "amod_local", "bus_local",
    "unserved_local", "amod_rail_dt", "bus_rail_dt", "rail_dt", "unserved_dt",
)
EXTRA_COLUMNS = ("avg_excess_waiting",)

MODE_LABELS = ("amod", "bus", "rail", "amod_rail", "bus_rail", "amod_bus", "amod_bus_rail")


def mode_label(route, lines_by_id) -> str:
    kinds = set()
    for leg in route.legs:
        kinds.add("amod" if leg.mode == "amod" else lines_by_id[leg.line].kind)
    return "_".join(k for k in ("amod", "bus", "rail") if k in kinds)


@dataclass
class EvaluationReport:
    objective: float
    components: dict
    avg_disutility: float
    avg_walking: float
    avg_waiting: float
    avg_excess_waiting: float
    avg_utility: float
    line_utilization: float
    amod_utilization: float | None
    lambda_star: float
    shares: dict = field(default_factory=dict)  # kind -> label -> fraction
    unserved: dict = field(default_factory=dict)  # kind -> fraction
    total_demand: float = 0.0

    def share(self, kind: str, label: str) -> float:
        return self.shares.get(kind, {}).get(label, 0.0)

    def row(self, gamma=None, n_bar=None) -> dict:
        """Report row in table column order, shares and fractions in percent."""
        def pct(v):
            return None if v is None else 100.0 * v
        return {
            "gamma": gamma,
            "n_bar": n_bar,
            "avg_disutility": self.avg_disutility,
            "avg_walking": self.avg_walking,
            "avg_waiting": self.avg_waiting,
            "avg_utility": self.avg_utility,
            "line_utilization": pct(self.line_utilization),
            "amod_utilization": pct(self.amod_utilization),
            "lambda_star": self.lambda_star,
            "amod_local": pct(self.share("local", "amod")),
            "bus_local": pct(self.share("local", "bus")),
            "unserved_local": pct(self.unserved.get("local", 0.0)),
            "amod_rail_dt": pct(self.share("downtown", "amod_rail")),
            "bus_rail_dt": pct(self.share("downtown", "bus_rail")),
            "rail_dt": pct(self.share("downtown", "rail")),
            "unserved_dt": pct(self.unserved.get("downtown", 0.0)),
            "avg_excess_waiting": self.avg_excess_waiting,
        }


def _cum_shifted(v: np.ndarray, shift: int) -> np.ndarray:
    """``out[tau] = sum_{t <= tau - shift} v[t]``."""
    c = np.cumsum(v)
    out = np.zeros_like(c)
    if shift < len(v):
        out[shift:] = c[:len(v) - shift]
    return out


def objective_breakdown(sc: Scenario, flows: BoardingFlows, theta, design: DesignPoint,
                        idx: LegIndex | None = None) -> dict:
    """Objective components summed directly from the queue definitions.

    Returns minutes for ``transit_expected_wait``, ``transit_excess_wait``,
    ``walk``, ``amod_expected_wait``, ``amod_excess_wait`` and
    ``stranded_wait`` (demand in intervals where no route is available),
    plus their ``total``.
    """
    from .legs import classify_legs

    idx = idx or classify_legs(sc)
    T, dt = sc.T, sc.delta_t
    x, N = np.asarray(design.x, float), np.asarray(design.N, float)
    d = sc.demand
    z = flows.z
    routes = {(c, k): r for c, com in enumerate(sc.commutes)
              for k, r in enumerate(sc.routes_by_commute.get(com.id, ()))}

    def shift(c, k, i):
        return sc.leg_shift(routes[(c, k)].legs[i])

    def arrivals(c, k):
        return d[c] * np.asarray(theta[c])[k]

    exp_transit = exp_amod = walk = 0.0
    for (c, k, i), zz in z.items():
        leg = routes[(c, k)].legs[i]
        if i == 0:
            walk += float(zz.sum()) * routes[(c, k)].walk_min
        if leg.mode == "transit":
            xl = x[:, sc.line_index[leg.line]]
            exp_transit += float(np.sum(np.where(xl > 0, zz * dt / (2 * np.where(xl > 0, xl, 1.0)), 0.0)))
        else:
            ns = N[:, sc.station_index[leg.station]]
            w = np.array([sc.amod_wait_min(leg.station, n) if n > 0 else 0.0 for n in ns])
            exp_amod += float(np.sum(zz * w))

    exc_transit = 0.0
    stops = set(idx.first_boarding) | set(idx.transfers) | set(idx.boardings)
    for key in stops:
        ad = sum((np.cumsum(arrivals(c, k)) for c, k in idx.first_boarding.get(key, ())), np.zeros(T))
        xd = sum((_cum_shifted(z[(c, k, i - 1)], shift(c, k, i - 1)) for c, k, i in idx.transfers.get(key, ())),
                 np.zeros(T))
        bd = sum((np.cumsum(z[leg]) for leg in idx.boardings.get(key, ())), np.zeros(T))
        exc_transit += float(np.sum(ad + xd - bd)) * dt

    exc_amod = 0.0
    for s in set(idx.direct) | set(idx.first_mile) | set(idx.last_mile):
        w = np.zeros(T)
        for c, k in list(idx.direct.get(s, ())) + list(idx.first_mile.get(s, ())):
            w += np.cumsum(arrivals(c, k) - z[(c, k, 0)])
        for c, k, i in idx.last_mile.get(s, ()):
            w += _cum_shifted(z[(c, k, i - 1)], shift(c, k, i - 1)) - np.cumsum(z[(c, k, i)])
        exc_amod += float(np.sum(w)) * dt

    stranded = 0.0
    for c in range(len(sc.commutes)):
        th = np.asarray(theta[c])
        none = th.sum(axis=0) <= 0 if th.size else np.ones(T, dtype=bool)
        stranded += float(np.sum(np.where(none, dt * (T - np.arange(T)) * d[c], 0.0)))

    out = {
        "transit_expected_wait": exp_transit,
        "transit_excess_wait": exc_transit,
        "walk": walk,
        "amod_expected_wait": exp_amod,
        "amod_excess_wait": exc_amod,
        "stranded_wait": stranded,
    }
    out["total"] = sum(out.values())
    return out


class Evaluator:
    """Reusable evaluation context for one scenario."""

    def __init__(self, sc: Scenario, backend=None):
        self.sc = sc
        self.backend = backend
        self.choice = ChoiceModel(sc)
        self.flow = FlowModel(sc)
        self.labels = [[mode_label(r, sc.line_by_id) for r in rs] for rs in self.choice.commute_routes]

    def theta(self, design: DesignPoint) -> list:
        return self.choice.theta(design)

    def solve_flows(self, design: DesignPoint, theta=None):
        theta = self.theta(design) if theta is None else theta
        lp, zc = build_inner_lp(self.sc, theta, design, model=self.flow)
        sol = solve_lp(lp, self.backend)
        if not sol.optimal:
            raise LPError(f"inner boarding problem is {sol.status}")
        return self.flow.flows(sol, zc), sol.objective, theta

    def objective(self, design: DesignPoint) -> float:
        """True objective: boarding LP optimum under the design's own probabilities."""
        return self.solve_flows(design)[1]

    def evaluate(self, design: DesignPoint, check: bool = True):
        sc = self.sc
        if check:
            viol = check_design_feasibility(design, sc)
            if viol:
                raise ScenarioError("infeasible design:\n  " + "\n  ".join(map(str, viol)))
        flows, obj, theta = self.solve_flows(design)
        comp = objective_breakdown(sc, flows, theta, design, self.flow.idx)
        d = sc.demand
        D = float(d.sum())

        def per(v):
            return v / D if D > 0 else 0.0

        utility = 0.0
        shares, unserved = {}, {}
        kind_demand = {}
        for c, com in enumerate(sc.commutes):
            th = theta[c]
            if D > 0 and len(th):
                u = self.choice.utilities(c, design)
                utility += float(np.sum(np.where(th > 0, d[c] * th * np.where(np.isfinite(u), u, 0.0), 0.0)))
            kind_demand[com.kind] = kind_demand.get(com.kind, 0.0) + float(d[c].sum())
            sh = shares.setdefault(com.kind, {})
            for k, label in enumerate(self.labels[c]):
                sh[label] = sh.get(label, 0.0) + float(np.sum(d[c] * th[k]))
            boarded = flows.first_leg_total(c)
            unserved[com.kind] = unserved.get(com.kind, 0.0) + max(float(d[c].sum()) - boarded, 0.0)
        for kind, tot in kind_demand.items():
            shares[kind] = {lab: (v / tot if tot > 0 else 0.0) for lab, v in shares[kind].items()}
            unserved[kind] = unserved[kind] / tot if tot > 0 else 0.0

        x = np.asarray(design.x, float)
        bus = sc.bus_mask
        line_util = float(np.mean(x[:, bus].sum(axis=0) > 0.5)) if bus.any() else 0.0
        capacity = sum(sc.availability_ratio(st.station_id) * float(np.sum(design.N[:, s]))
                       for s, st in enumerate(sc.stations))
        used = 0.0
        for s, keys in self.flow.amod.items():
            for key in keys:
                used += self.flow.xi(key, bool(sc.shared_trips)) * float(flows.z[key].sum())
        amod_util = used / capacity if capacity > 0 else None

        report = EvaluationReport(
            objective=obj,
            components=comp,
            avg_disutility=per(obj),
            avg_walking=per(comp["walk"]),
            avg_waiting=per(comp["transit_expected_wait"] + comp["amod_expected_wait"]),
            avg_excess_waiting=per(comp["transit_excess_wait"] + comp["amod_excess_wait"]
                                   + comp["stranded_wait"]),
            avg_utility=per(utility),
            line_utilization=line_util,
            amod_utilization=amod_util,
            lambda_star=float(design.lam),
            shares=shares,
            unserved=unserved,
            total_demand=D,
        )
        return flows, report


def evaluate_design(sc: Scenario, design: DesignPoint, backend=None, evaluator: Evaluator | None = None):
    """``(BoardingFlows, EvaluationReport)`` for a feasible design."""
    ev = evaluator or Evaluator(sc, backend)
    return ev.evaluate(design)
