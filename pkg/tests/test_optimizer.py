import math
from dataclasses import replace

import numpy as np
import pytest

from tcmum.model import Budgets, Commute, CommuteRoute, Leg, Scenario, TimeGrid, TransitLine, check_design_feasibility
from tcmum.optimizer import DesignOptimizer, OptimizerError, multi_start, random_start, random_starts
from tcmum.params import OptimizerParams


def rail_only():
    # capacity binds, so extra departures cut queueing delay
    rail = TransitLine("R", "rail", ("S", "DT"), (10.0,), 10.0)
    return Scenario(
        grid=TimeGrid("07:00", "07:15", 3, 5.0), lines=(rail,), stations=(),
        commutes=(Commute("c", "downtown", (20.0, 30.0, 10.0)),),
        routes=(CommuteRoute("c", "rail", (Leg("transit", "R", "S", "DT", travel_min=10.0),), 0.0, "P"),),
        budgets=Budgets(B_bus=0.0, B_rail=7.5, N_bar=0.0), name="rail-only")


def micro_start(micro):
    return random_starts(micro, 1, 5)[0]


def test_random_starts_feasible(desk):
    rng = np.random.default_rng(0)
    for _ in range(50):
        assert check_design_feasibility(random_start(desk, rng), desk) == []


def test_random_starts_seeded(desk):
    a, b = random_starts(desk, 3, 11), random_starts(desk, 3, 11)
    assert all(x == y for x, y in zip(a, b))
    assert not a[0] == a[1]


def test_zero_trust_region_keeps_anchor(micro):
    opt = DesignOptimizer(micro)
    start = micro_start(micro)
    step, _ = opt.first_order_step(start, OptimizerParams(rho_rail=0, rho_bus=0, eta=0, sigma=0))
    assert step == start


def test_step_moves_to_trust_region_edge():
    sc = rail_only()
    d = sc.zero_design()
    d.x[:] = 1.0
    step, _ = DesignOptimizer(sc).first_order_step(d)
    np.testing.assert_allclose(step.x, 1.1)


def test_step_respects_bus_budget(micro):
    opt = DesignOptimizer(micro)
    d = micro.zero_design()
    d.x[:, micro.rail_mask] = 1.0
    d.x[:3, micro.bus_mask] = 1.0
    d.N[:] = 5.0
    b = micro.line_index["B1"]
    assert d.x[:, b].sum() == micro.budgets.B_bus
    step, _ = opt.first_order_step(d)
    assert step.x[:, b].sum() <= micro.budgets.B_bus
    assert np.array_equal(step.x[:, b], np.round(step.x[:, b]))


def test_infinite_threshold_single_iteration(micro):
    traj = DesignOptimizer(micro).optimize(micro_start(micro), replace(micro.algorithm, epsilon=math.inf))
    assert traj.iterations == 1 and traj.converged


def test_stationary_start_confirms_quickly(micro):
    opt = DesignOptimizer(micro)
    first = opt.optimize(micro_start(micro))
    assert first.converged
    again = opt.optimize(first.final)
    assert again.converged and again.iterations <= 2


def test_iterates_feasible(micro):
    opt = DesignOptimizer(micro)
    for start in random_starts(micro, 4, 2):
        traj = opt.optimize(start)
        assert all(check_design_feasibility(d, micro) == [] for d in traj.designs)
        assert len(traj.true_objectives) == traj.iterations


def test_infeasible_start_rejected(micro):
    d = micro.zero_design()
    with pytest.raises(OptimizerError, match="infeasible start"):
        DesignOptimizer(micro).optimize(d)


def test_single_start_matches_optimize(micro):
    start = micro_start(micro)
    res = multi_start(micro, starts=[start], jobs=1)
    traj = DesignOptimizer(micro).optimize(start)
    assert res.best == traj.final
    assert res.best_objective == traj.final_objective


def test_multi_start_deterministic_and_minimal(micro):
    a = multi_start(micro, jobs=1)
    b = multi_start(micro, jobs=1)
    assert a.best == b.best
    assert a.best_objective == min(t.final_objective for t in a.trajectories)


def test_parallel_matches_serial(micro):
    a = multi_start(micro, jobs=1)
    b = multi_start(micro, jobs=2)
    assert a.best == b.best and a.best_start == b.best_start
