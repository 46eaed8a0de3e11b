"""Successive-LP design optimizer with trust regions and random multi-start."""

from __future__ import annotations

import itertools
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .choice import linearize_theta
from .evaluation import Evaluator
from .flows import build_iteration_lp, trust_region_bounds
from .lp import LPError, solve_lp
from .model import DesignPoint, Scenario, check_design_feasibility
from .params import OptimizerParams

log = logging.getLogger(__name__)

INT_TOL = 1e-7


class OptimizerError(RuntimeError):
    pass


@dataclass
class Trajectory:
    start: DesignPoint
    designs: list = field(default_factory=list)
    approx_objectives: list = field(default_factory=list)  # trust-region LP optimum per iteration
    true_objectives: list = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self) -> int:
        return len(self.designs)

    @property
    def final(self) -> DesignPoint:
        return self.designs[-1] if self.designs else self.start

    @property
    def final_objective(self) -> float:
        return self.true_objectives[-1] if self.true_objectives else float("nan")


@dataclass
class MultiStartResult:
    best: DesignPoint
    best_objective: float
    best_start: int
    trajectories: list


def _project(sc: Scenario, d: DesignPoint, bounds) -> DesignPoint:
    """Clip LP round-off so the design lies exactly in its box and budgets."""
    (x_lo, x_hi), (n_lo, n_hi), (l_lo, l_hi) = bounds
    b = sc.budgets
    x = np.clip(d.x, x_lo, x_hi)
    bus, rail = sc.bus_mask, sc.rail_mask
    x[:, bus] = np.round(x[:, bus])
    costs = sc.line_costs
    used = float((x[:, rail] * costs[rail]).sum())
    if used > b.B_rail:
        base = x_lo[:, rail]
        extra = float(((x[:, rail] - base) * costs[rail]).sum())
        room = b.B_rail - float((base * costs[rail]).sum())
        if extra > 0:
            x[:, rail] = base + (x[:, rail] - base) * max(room, 0.0) / extra
    N = np.clip(d.N, n_lo, n_hi)
    for t in range(N.shape[0]):
        tot = N[t].sum()
        if tot > b.N_bar:
            N[t] *= b.N_bar / tot
    lam = float(min(max(d.lam, l_lo), l_hi))
    return DesignPoint(x, N, lam)


class DesignOptimizer:
    """Algorithm state shared across iterations and starts for one scenario."""

    def __init__(self, sc: Scenario, params: OptimizerParams | None = None, backend=None):
        self.sc = sc
        self.params = params or sc.algorithm
        self.backend = backend
        self.evaluator = Evaluator(sc, backend)
        self.lp_solves = 0

    # -- one trust-region step ------------------------------------------
    def _solve(self, anchor, theta_hat, params, fixed_x=None):
        lp, cols = build_iteration_lp(self.sc, anchor, theta_hat, params, self.evaluator.flow, fixed_x)
        self.lp_solves += 1
        sol = solve_lp(lp, self.backend)
        return sol, cols

    def first_order_step(self, anchor: DesignPoint, params: OptimizerParams | None = None):
        """Trust-region LP step from ``anchor``: ``(design, approximate objective)``."""
        params = params or self.params
        sc = self.sc
        theta_hat = linearize_theta(sc, anchor, self.evaluator.choice)
        sol, cols = self._solve(anchor, theta_hat, params)
        if not sol.optimal:
            raise OptimizerError(f"trust-region LP is {sol.status} at a feasible anchor")
        design = cols.design(sol)
        bus = np.flatnonzero(sc.bus_mask)
        xb = design.x[:, bus]
        frac = [(t, bus[j]) for t, j in zip(*np.nonzero(np.abs(xb - np.round(xb)) > INT_TOL))]
        objective = sol.objective
        if frac:
            design, objective = self._integral_bus(anchor, theta_hat, params, design, frac)
        return _project(sc, design, trust_region_bounds(sc, anchor, params)), objective

    def _integral_bus(self, anchor, theta_hat, params, relaxed, frac):
        sc = self.sc
        bus = np.flatnonzero(sc.bus_mask)
        base = {(t, l): float(np.round(relaxed.x[t, l])) for t in range(sc.T) for l in bus}
        candidates = []
        if len(frac) <= params.bus_enum_limit:
            for choice in itertools.product((0, 1), repeat=len(frac)):
                fixed = dict(base)
                for (t, l), up in zip(frac, choice):
                    v = relaxed.x[t, l]
                    fixed[(t, l)] = float(np.ceil(v) if up else np.floor(v))
                candidates.append(fixed)
        else:
            fixed = {k: v for k, v in base.items()}
            used = sum(fixed[k] * sc.line_costs[k[1]] for k in fixed)
            # undo the roundings that gained the most until the budget holds
            order = sorted(frac, key=lambda k: relaxed.x[k] - np.floor(relaxed.x[k]))
            for k in order:
                if used <= sc.budgets.B_bus + 1e-9:
                    break
                if fixed[k] > relaxed.x[k]:
                    fixed[k] -= 1.0
                    used -= sc.line_costs[k[1]]
            candidates.append(fixed)
        best = None
        for fixed in candidates:
            sol, cols = self._solve(anchor, theta_hat, params, fixed)
            if sol.optimal and (best is None or sol.objective < best[0].objective - 1e-9):
                best = (sol, cols)
        if best is None:
            # the anchor's own bus schedule is always feasible
            fixed = {(t, l): float(anchor.x[t, l]) for t in range(sc.T) for l in bus}
            sol, cols = self._solve(anchor, theta_hat, params, fixed)
            if sol.optimal:
                best = (sol, cols)
        if best is None:
            raise OptimizerError("no integral bus schedule is feasible in the trust region")
        sol, cols = best
        return cols.design(sol), sol.objective

    # -- Algorithm 1 -----------------------------------------------------
    def optimize(self, start: DesignPoint, params: OptimizerParams | None = None) -> Trajectory:
        params = params or self.params
        viol = check_design_feasibility(start, self.sc)
        if viol:
            raise OptimizerError("infeasible start:\n  " + "\n  ".join(map(str, viol)))
        traj = Trajectory(start.copy())
        design = start
        q_prev = 0.0
        for i in range(1, params.max_iter + 1):
            try:
                design, q = self.first_order_step(design, params)
            except (LPError, OptimizerError) as exc:
                raise OptimizerError(f"iteration {i}: {exc}") from exc
            traj.designs.append(design)
            traj.approx_objectives.append(q)
            traj.true_objectives.append(self.evaluator.objective(design))
            log.debug("iteration %d: approx %.4f true %.4f", i, q, traj.true_objectives[-1])
            if abs(q - q_prev) <= params.epsilon:
                traj.converged = True
                break
            q_prev = q
        return traj


# ---------------------------------------------------------------------------
# random starts


def random_start(sc: Scenario, rng: np.random.Generator) -> DesignPoint:
    """Feasible random design: uniform entries rescaled into the budgets."""
    b, f = sc.budgets, sc.fares
    T, L, S = sc.T, len(sc.lines), len(sc.stations)
    costs = sc.line_costs
    x = np.zeros((T, L))
    bus = np.flatnonzero(sc.bus_mask)
    rail = np.flatnonzero(sc.rail_mask)
    if len(bus):
        x[:, bus] = rng.integers(0, int(np.floor(b.ub_bus)) + 1, size=(T, len(bus)))
        used = float((x[:, bus] * costs[bus]).sum())
        while used > b.B_bus + 1e-9:
            on = np.argwhere(x[:, bus] > 0)
            t, j = on[rng.integers(len(on))]
            x[t, bus[j]] -= 1.0
            used -= costs[bus[j]]
    if len(rail):
        x[:, rail] = rng.uniform(b.lb_rail, b.ub_rail, size=(T, len(rail)))
        base = b.lb_rail * float(costs[rail].sum()) * T
        extra = float(((x[:, rail] - b.lb_rail) * costs[rail]).sum())
        room = b.B_rail - base
        if extra > room:
            x[:, rail] = b.lb_rail + (x[:, rail] - b.lb_rail) * max(room, 0.0) / extra
    N = np.zeros((T, S))
    if S:
        N = rng.dirichlet(np.ones(S), size=T) * rng.uniform(0, b.N_bar, size=(T, 1))
    lam = float(rng.uniform(f.lambda_min, f.lambda_max))
    return DesignPoint(x, N, lam)


def random_starts(sc: Scenario, n: int, seed: int) -> list:
    children = np.random.SeedSequence(seed).spawn(n)
    return [random_start(sc, np.random.default_rng(s)) for s in children]


def _run_start(args):
    sc, params, backend, start = args
    return DesignOptimizer(sc, params, backend).optimize(start)


def default_jobs() -> int:
    try:
        return max(1, int(os.environ.get("TCMUM_JOBS", "1")))
    except ValueError:
        return 1


def multi_start(sc: Scenario, params: OptimizerParams | None = None, backend=None,
                starts: list | None = None, jobs: int | None = None) -> MultiStartResult:
    """Run the optimizer from several random starts and keep the best true objective."""
    params = params or sc.algorithm
    starts = starts if starts is not None else random_starts(sc, params.starts, params.seed)
    jobs = default_jobs() if jobs is None else jobs
    if jobs > 1 and len(starts) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            trajs = list(pool.map(_run_start, [(sc, params, backend, s) for s in starts]))
    else:
        opt = DesignOptimizer(sc, params, backend)
        trajs = [opt.optimize(s) for s in starts]
    best_k = int(np.argmin([t.final_objective for t in trajs]))
    best = trajs[best_k]
    return MultiStartResult(best.final, best.final_objective, best_k, trajs)
