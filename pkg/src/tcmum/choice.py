"""Route utilities, logit choice probabilities and their design gradients.

Utilities are in dollars. A route whose transit line has no departures or
whose AMoD region has no vehicles in an interval is unavailable there: its
utility is ``-inf`` and it is dropped from the choice set before
normalisation. As a departure rate or fleet size shrinks to zero the
utility tends to ``-inf`` and the probability and all its derivatives tend
to zero, so the linearisation uses that one-sided limit (zero) for
unavailable routes; :func:`choice_gradient` can be asked to refuse such
points instead.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .pricing import amod_fare_total, route_price

if TYPE_CHECKING:  # pragma: no cover
    from .model import DesignPoint, Scenario

NESTS = ("P", "A", "PA")


class NoAvailableRoute(ValueError):
    pass


class BoundaryError(ValueError):
    """The choice probabilities are not differentiable at the requested design."""


@dataclass(frozen=True)
class UtilityParams:
    beta_time_transit: float = 21.1  # dollars per hour
    beta_time_amod: float = 16.3  # dollars per hour
    beta_money: float = 1.0
    walk_speed: float = 3.0  # mph
    amod_speed: float = 20.0  # mph

    @property
    def transit_per_min(self) -> float:
        return self.beta_time_transit / 60.0

    @property
    def amod_per_min(self) -> float:
        return self.beta_time_amod / 60.0


@dataclass(frozen=True)
class ChoiceModelSpec:
    kind: str = "mnl"  # "mnl" | "nested"
    phi: float = 1.0
    phi_P: float = 1.0
    phi_A: float = 1.0
    phi_PA: float = 1.0

    def nest_scale(self, nest: str) -> float:
        return {"P": self.phi_P, "A": self.phi_A, "PA": self.phi_PA}[nest]


# ---------------------------------------------------------------------------
# probabilities on utility arrays


def choice_probs_mnl(utilities) -> np.ndarray:
    """Multinomial logit probabilities.

    ``utilities`` has routes on axis 0 and optionally further axes (e.g. time);
    ``-inf`` marks an unavailable route.
    """
    u = np.asarray(utilities, dtype=float)
    top = u.max(axis=0)
    if not np.isfinite(top).all():
        raise NoAvailableRoute("no available route for commute")
    e = np.exp(u - top)  # exp(-inf) = 0 drops unavailable routes
    return e / e.sum(axis=0)


def _nested_parts(u, classes, spec: ChoiceModelSpec):
    """Within-nest probabilities, nest probabilities and route probabilities."""
    u = np.asarray(u, dtype=float)
    classes = np.asarray(classes)
    within = np.empty_like(u)
    nest_prob = np.empty_like(u)
    rows_of, upper = [], []
    for m in NESTS:
        rows = classes == m
        if not rows.any():
            continue
        phim = spec.nest_scale(m)
        scaled = phim * u[rows]
        top = scaled.max(axis=0)
        nonempty = np.isfinite(top)
        top = np.where(nonempty, top, 0.0)
        e = np.exp(scaled - top)
        tot = e.sum(axis=0)
        safe = np.where(nonempty, tot, 1.0)
        within[rows] = e / safe
        rows_of.append(rows)
        upper.append(np.where(nonempty, (np.log(safe) + top) * (spec.phi / phim), -np.inf))
    upper = np.array(upper)
    top = upper.max(axis=0)
    if not np.isfinite(top).all():
        raise NoAvailableRoute("all nests empty: no available route for commute")
    e = np.exp(upper - top)
    pn = e / e.sum(axis=0)
    for rows, p in zip(rows_of, pn):
        nest_prob[rows] = p
    return within, nest_prob, within * nest_prob


def choice_probs_nested(utilities, classes, spec: ChoiceModelSpec) -> np.ndarray:
    """Two-level nested logit over mode nests P, A and PA.

    ``classes[r]`` is the nest of route ``r``. Within a nest the choice is a
    logit at scale ``phi_m``; nests are chosen by a logit at scale ``phi``
    over the logsums ``I_m = ln(sum exp(phi_m * u)) / phi_m``.
    """
    return _nested_parts(utilities, classes, spec)[2]


def choice_probs(utilities, classes, spec: ChoiceModelSpec) -> np.ndarray:
    if spec.kind == "nested":
        return choice_probs_nested(utilities, classes, spec)
    return choice_probs_mnl(utilities)


def _prob_jacobian_apply(u, classes, spec, du):
    """Directional derivatives of probabilities.

    ``du`` has shape ``u.shape + (V,)``: derivative of each utility with
    respect to V variables. Returns d theta with the same shape.
    """
    classes = np.asarray(classes)
    if spec.kind != "nested":
        theta = choice_probs_mnl(u)
        mean = np.einsum("r...,r...v->...v", theta, du)
        return theta[..., None] * (du - mean[None]), theta
    within, _, theta = _nested_parts(u, classes, spec)
    mean = np.einsum("r...,r...v->...v", theta, du)
    out = np.zeros_like(du)
    for m in NESTS:
        rows = classes == m
        if not rows.any():
            continue
        phim = spec.nest_scale(m)
        nest_mean = np.einsum("r...,r...v->...v", within[rows], du[rows])
        out[rows] = theta[rows][..., None] * (
            phim * du[rows] + (spec.phi - phim) * nest_mean[None] - spec.phi * mean[None])
    return out, theta


# ---------------------------------------------------------------------------
# utilities of scenario routes


@dataclass(frozen=True)
class RouteTerms:
    """Design-independent pieces of a route's utility."""

    lines: tuple  # line index per transit leg
    stations: tuple  # station index per AMoD leg
    fixed_price: float  # price at zero discount
    amod_fare: float  # price slope in the discount
    transit_min: float  # in-vehicle transit minutes plus walking
    amod_min: float  # in-vehicle AMoD minutes
    nest: str


def route_terms(sc: "Scenario", route) -> RouteTerms:
    lines = tuple(sc.line_index[leg.line] for leg in route.legs if leg.mode == "transit")
    stations = tuple(sc.station_index[leg.station] for leg in route.legs if leg.mode == "amod")
    transit_min = sum(leg.travel_min for leg in route.legs if leg.mode == "transit") + route.walk_min
    amod_min = sum(leg.travel_min for leg in route.legs if leg.mode == "amod")
    return RouteTerms(
        lines=lines,
        stations=stations,
        fixed_price=route_price(route, 0.0, sc.fares, sc.line_by_id),
        amod_fare=amod_fare_total(route, sc.fares),
        transit_min=transit_min,
        amod_min=amod_min,
        nest=route.mode_class or route.derived_mode_class(),
    )


def _wait_scale(sc: "Scenario") -> np.ndarray:
    """Per-station constant c with AMoD wait = c / sqrt(N) minutes."""
    v = sc.amod_speed_kmh
    return np.array([st.shape_coeff / v * np.sqrt(st.area) * 60.0 for st in sc.stations])


def route_utility(route, t: int, design: "DesignPoint", sc: "Scenario") -> float:
    """Systematic utility of ``route`` for departures in interval ``t``; ``-inf`` if unavailable."""
    u = sc.utility
    wait_transit = 0.0
    for leg in route.legs:
        if leg.mode == "transit":
            x = design.x[t, sc.line_index[leg.line]]
            if not x > 0:
                return -np.inf
            wait_transit += sc.delta_t / (2.0 * x)
    wait_amod = 0.0
    for leg in route.legs:
        if leg.mode == "amod":
            n = design.N[t, sc.station_index[leg.station]]
            if not n > 0:
                return -np.inf
            wait_amod += sc.amod_wait_min(leg.station, n)
    terms = route_terms(sc, route)
    price = terms.fixed_price + design.lam * terms.amod_fare
    return (-u.beta_money * price
            - u.transit_per_min * (wait_transit + terms.transit_min)
            - u.amod_per_min * (wait_amod + terms.amod_min))


class ChoiceModel:
    """Vectorised utilities, probabilities and gradients for one scenario."""

    def __init__(self, sc: "Scenario"):
        self.sc = sc
        self.commute_routes = [sc.routes_by_commute[c.id] for c in sc.commutes]
        self.terms = [[route_terms(sc, r) for r in rs] for rs in self.commute_routes]
        self.classes = [np.array([t.nest for t in ts]) for ts in self.terms]
        self.wait_scale = _wait_scale(sc)
        # variables each commute's probabilities depend on
        self.var_lines = [sorted({l for t in ts for l in t.lines}) for ts in self.terms]
        self.var_stations = [sorted({s for t in ts for s in t.stations}) for ts in self.terms]
        # per commute: design-free utility, discount slope, line and station use counts
        u = sc.utility
        self.static = [np.array([-u.beta_money * t.fixed_price - u.transit_per_min * t.transit_min
                                 - u.amod_per_min * t.amod_min for t in ts]) for ts in self.terms]
        self.fare_slope = [np.array([t.amod_fare for t in ts]) for ts in self.terms]
        self.line_use, self.station_use = [], []
        for ts in self.terms:
            inc_l = np.zeros((len(ts), len(sc.lines)))
            inc_s = np.zeros((len(ts), len(sc.stations)))
            for k, t in enumerate(ts):
                np.add.at(inc_l[k], list(t.lines), 1.0)
                np.add.at(inc_s[k], list(t.stations), 1.0)
            self.line_use.append(inc_l)
            self.station_use.append(inc_s)

    def utilities(self, c: int, design: "DesignPoint") -> np.ndarray:
        """Utility array (routes x T) for commute ``c``."""
        sc, u = self.sc, self.sc.utility
        x, N = np.asarray(design.x, float), np.asarray(design.N, float)
        inc_l, inc_s = self.line_use[c], self.station_use[c]
        out = (self.static[c] - u.beta_money * design.lam * self.fare_slope[c])[:, None]
        out = np.repeat(out, sc.T, axis=1)
        blocked = np.zeros(out.shape, dtype=bool)
        if inc_l.any():
            pos = x > 0
            inv = np.where(pos, 1.0 / np.where(pos, x, 1.0), 0.0)
            out -= u.transit_per_min * sc.delta_t / 2.0 * (inc_l @ inv.T)
            blocked |= (inc_l @ (~pos).T) > 0
        if inc_s.any():
            pos = N > 0
            wait = np.where(pos, self.wait_scale / np.sqrt(np.where(pos, N, 1.0)), 0.0)
            out -= u.amod_per_min * (inc_s @ wait.T)
            blocked |= (inc_s @ (~pos).T) > 0
        return np.where(blocked, -np.inf, out)

    def probabilities(self, c: int, design: "DesignPoint") -> np.ndarray:
        """Route probabilities (routes x T); all zero in intervals with no available route."""
        u = self.utilities(c, design)
        cols = np.isfinite(u).any(axis=0)
        if cols.all():
            return choice_probs(u, self.classes[c], self.sc.choice)
        out = np.zeros_like(u)
        if cols.any():
            out[:, cols] = choice_probs(u[:, cols], self.classes[c], self.sc.choice)
        return out

    def theta(self, design: "DesignPoint") -> list:
        """Route probabilities for every commute, each routes x T."""
        return [self.probabilities(c, design) for c in range(len(self.terms))]

    def utility_derivatives(self, c: int, design: "DesignPoint"):
        """d utility / d (x of var_lines, N of var_stations, lambda); shape routes x T x V."""
        sc, u = self.sc, self.sc.utility
        lines, stations = self.var_lines[c], self.var_stations[c]
        V = len(lines) + len(stations) + 1
        du = np.zeros((len(self.terms[c]), sc.T, V))
        x, N = np.asarray(design.x, float), np.asarray(design.N, float)
        for k, tr in enumerate(self.terms[c]):
            for l in tr.lines:
                xl = x[:, l]
                safe = np.where(xl > 0, xl, 1.0)
                du[k, :, lines.index(l)] += u.transit_per_min * sc.delta_t / (2.0 * safe ** 2)
            for s in tr.stations:
                ns = N[:, s]
                safe = np.where(ns > 0, ns, 1.0)
                du[k, :, len(lines) + stations.index(s)] += (
                    u.amod_per_min * 0.5 * self.wait_scale[s] * safe ** -1.5)
            du[k, :, -1] = -u.beta_money * tr.amod_fare
        return du

    def gradient(self, c: int, design: "DesignPoint", strict: bool = False):
        """Probabilities and their gradient for commute ``c``.

        Returns ``(theta, grad)`` with ``grad`` of shape routes x T x V, the
        variable axis ordered as ``var_lines[c]``, ``var_stations[c]``, lambda.
        Entry ``[r, t, v]`` is the derivative with respect to the interval-``t``
        copy of variable ``v`` (lambda is shared by all intervals).
        """
        u = self.utilities(c, design)
        if strict and not np.isfinite(u).all():
            r, t = np.argwhere(~np.isfinite(u))[0]
            raise BoundaryError(
                f"nondifferentiable at boundary: route {self.commute_routes[c][r].id!r} "
                f"of commute {self.sc.commutes[c].id!r} unavailable at t={t}")
        du = self.utility_derivatives(c, design)
        du = np.where(np.isfinite(u)[..., None], du, 0.0)
        cols = np.isfinite(u).any(axis=0)
        theta = np.zeros_like(u)
        grad = np.zeros_like(du)
        if cols.any():
            grad[:, cols], theta[:, cols] = _prob_jacobian_apply(
                u[:, cols], self.classes[c], self.sc.choice, du[:, cols])
        return theta, grad


def choice_gradient(design: "DesignPoint", sc: "Scenario", commute, t: int,
                    strict: bool = True, model: ChoiceModel | None = None) -> dict:
    """Gradient of commute ``commute``'s route probabilities at interval ``t``.

    Returns a mapping from variable key (``("x", line_idx, t)``,
    ``("N", station_idx, t)`` or ``("lam",)``) to an array over the
    commute's routes. With ``strict`` a design on the availability boundary
    raises :class:`BoundaryError`.
    """
    model = model or ChoiceModel(sc)
    c = commute if isinstance(commute, int) else sc.commute_index[commute]
    if strict:
        u = model.utilities(c, design)[:, t]
        if not np.isfinite(u).all():
            raise BoundaryError(f"nondifferentiable at boundary: commute {sc.commutes[c].id!r}, t={t}")
    _, grad = model.gradient(c, design)
    out = {}
    for j, l in enumerate(model.var_lines[c]):
        out[("x", l, t)] = grad[:, t, j]
    off = len(model.var_lines[c])
    for j, s in enumerate(model.var_stations[c]):
        out[("N", s, t)] = grad[:, t, off + j]
    out[("lam",)] = grad[:, t, -1]
    return out


# ---------------------------------------------------------------------------
# first-order approximation


class AffineTheta:
    """First-order model of route probabilities around an anchor design.

    ``theta0[c]`` (routes x T) holds probabilities at the anchor and
    ``grad[c]`` (routes x T x V_c) their derivatives, with the variable
    axis described by ``var_lines[c]`` / ``var_stations[c]`` / lambda.
    """

    def __init__(self, model: ChoiceModel, anchor: "DesignPoint", theta0, grad):
        self.model = model
        self.anchor = anchor
        self.theta0 = theta0
        self.grad = grad

    def displacement(self, c: int, design: "DesignPoint") -> np.ndarray:
        """Design change seen by commute ``c``: T x V."""
        m = self.model
        lines, stations = m.var_lines[c], m.var_stations[c]
        dx = np.asarray(design.x, float)[:, lines] - np.asarray(self.anchor.x, float)[:, lines]
        dN = np.asarray(design.N, float)[:, stations] - np.asarray(self.anchor.N, float)[:, stations]
        dl = np.full((dx.shape[0], 1), float(design.lam) - float(self.anchor.lam))
        return np.hstack([dx, dN, dl])

    def evaluate(self, design: "DesignPoint") -> list:
        return [self.theta0[c] + np.einsum("rtv,tv->rt", self.grad[c], self.displacement(c, design))
                for c in range(len(self.theta0))]

    def terms(self, c: int, r: int, t: int):
        """``(constant, [(variable key, coefficient), ...])`` for one probability."""
        m = self.model
        g = self.grad[c][r, t]
        coefs = []
        const = float(self.theta0[c][r, t])
        for j, l in enumerate(m.var_lines[c]):
            if g[j] != 0.0:
                coefs.append((("x", l, t), float(g[j])))
                const -= g[j] * float(self.anchor.x[t, l])
        off = len(m.var_lines[c])
        for j, s in enumerate(m.var_stations[c]):
            if g[off + j] != 0.0:
                coefs.append((("N", s, t), float(g[off + j])))
                const -= g[off + j] * float(self.anchor.N[t, s])
        if g[-1] != 0.0:
            coefs.append((("lam",), float(g[-1])))
            const -= g[-1] * float(self.anchor.lam)
        return const, coefs


def linearize_theta(sc: "Scenario", anchor: "DesignPoint", model: ChoiceModel | None = None,
                    strict: bool = False) -> AffineTheta:
    """Affine approximation of the route probabilities around ``anchor``."""
    model = model or ChoiceModel(sc)
    theta0, grads = [], []
    for c in range(len(sc.commutes)):
        th, g = model.gradient(c, anchor, strict=strict)
        theta0.append(th)
        grads.append(g)
    return AffineTheta(model, anchor, theta0, grads)
