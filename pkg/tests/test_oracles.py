import numpy as np
import pytest

from tcmum.choice import ChoiceModel
from tcmum.evaluation import Evaluator, objective_breakdown
from tcmum.flows import build_inner_lp
from tcmum.lp import solve_lp
from tcmum.oracles import OracleRefused, _schedules, enumerate_boarding_oracle, grid_oracle
from tcmum.synthetic import lp_micro_instance
from test_flows import one_route
from test_optimizer import rail_only


def test_schedule_count():
    assert len(list(_schedules(2, np.array([True, True]), 1))) == 3


def test_full_vehicle_forces_later_boarding():
    sc = one_route(T=2, capacity=1.0, demand=[2.0, 0.0])
    d = sc.zero_design()
    d.x[:] = 1.0
    obj, flows = enumerate_boarding_oracle(sc, d)
    np.testing.assert_array_equal(flows.z[(0, 0, 0)], [1.0, 1.0])
    comp = objective_breakdown(sc, flows, ChoiceModel(sc).theta(d), d)
    assert comp["transit_excess_wait"] == pytest.approx(5.0)
    assert obj == pytest.approx(5.0 + 2 * 2.5)


def test_lp_matches_enumeration_sample():
    rng = np.random.default_rng(123)
    for _ in range(5):
        sc, d = lp_micro_instance(rng)
        theta = ChoiceModel(sc).theta(d)
        lp, _ = build_inner_lp(sc, theta, d)
        assert solve_lp(lp).objective == pytest.approx(enumerate_boarding_oracle(sc, d, theta)[0], abs=1e-7)


def test_enumeration_needs_integral_demand():
    sc = one_route(T=2, demand=[0.5, 0.0])
    d = sc.zero_design()
    d.x[:] = 1.0
    with pytest.raises(ValueError, match="integral"):
        enumerate_boarding_oracle(sc, d)


def test_grid_single_feasible_point(micro):
    good = micro.zero_design()
    good.x[:, micro.rail_mask] = 1.0
    bad = good.x.copy()
    bad[:, micro.bus_mask] = 1.0
    res = grid_oracle(micro, [bad, good.x], [good.N], [1.0])
    assert res.grid_size == 1
    assert res.best == good


def test_grid_monotone_toy_picks_most_departures():
    sc = rail_only()
    levels = [0.5, 1.0, 1.5, 2.0, 2.5]
    xs = [np.full((3, 1), v) for v in levels]
    res = grid_oracle(sc, xs, [np.zeros((3, 0))], [1.0])
    values = [v for _, v in sorted(res.objectives)]
    assert all(a > b for a, b in zip(values, values[1:]))
    assert res.best.x[0, 0] == 2.5


def test_grid_refuses_oversized(micro):
    x = micro.zero_design().x
    with pytest.raises(OracleRefused):
        grid_oracle(micro, [x] * 200, [micro.zero_design().N] * 60, [1.0])


def test_grid_empty(micro):
    with pytest.raises(ValueError, match="empty feasible grid"):
        grid_oracle(micro, [micro.zero_design().x], [micro.zero_design().N], [1.0])


def test_grid_contains_optimizer_result(micro):
    from tcmum.optimizer import multi_start

    res = multi_start(micro, jobs=1)
    grid = grid_oracle(micro, [res.best.x], [res.best.N, np.zeros_like(res.best.N)], [res.best.lam, 1.0])
    assert grid.best_objective <= Evaluator(micro).objective(res.best) + 1e-9
