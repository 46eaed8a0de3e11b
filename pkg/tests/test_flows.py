import numpy as np
import pytest

from tcmum.choice import ChoiceModel, linearize_theta
from tcmum.evaluation import Evaluator, objective_breakdown
from tcmum.flows import FlowModel, build_inner_lp, build_iteration_lp, trust_region_bounds
from tcmum.lp import solve_lp
from tcmum.model import Budgets, Commute, CommuteRoute, DesignPoint, Leg, Scenario, TimeGrid, TransitLine
from tcmum.params import OptimizerParams
from tcmum.sharing import generate_sharing_scenarios
from tcmum.synthetic import unit_ratio_station


def one_route(T=2, capacity=10.0, demand=None, with_station=False):
    line = TransitLine("B", "bus", ("a", "b"), (0.0,), capacity)
    return Scenario(
        grid=TimeGrid("07:00", f"07:{5 * T:02d}", T, 5.0), lines=(line,),
        stations=(unit_ratio_station(),) if with_station else (),
        commutes=(Commute("c", "local", tuple(demand or [1.0] * T)),),
        routes=(CommuteRoute("c", "bus", (Leg("transit", "B", "a", "b"),), 0.0, "P"),),
        budgets=Budgets(B_bus=float(T), B_rail=0.0, N_bar=5.0), name="one")


def test_inner_lp_counts():
    sc = one_route()
    d = DesignPoint(np.ones((2, 1)), np.zeros((2, 0)), 1.0)
    lp, _ = build_inner_lp(sc, ChoiceModel(sc).theta(d), d)
    assert lp.n_vars == 2
    assert lp.n_rows == 4
    assert sum(n.startswith("cap") for n in lp.row_names) == 2
    assert sum(n.startswith("dem") for n in lp.row_names) == 2


def test_iteration_lp_counts():
    sc = one_route(with_station=True)
    d = DesignPoint(np.ones((2, 1)), np.ones((2, 1)), 1.0)
    lp, cols = build_iteration_lp(sc, d, linearize_theta(sc, d), OptimizerParams())
    assert lp.n_vars == 2 + 2 + 2 + 1
    assert cols.x.shape == (2, 1) and cols.N.shape == (2, 1)


def test_zero_trust_region_reproduces_inner_objective(micro):
    rng = np.random.default_rng(0)
    d = micro.zero_design(lam=0.6)
    d.x[:, micro.rail_mask] = 1.2
    d.x[:2, micro.bus_mask] = 1.0
    d.N[:] = rng.uniform(1, 9, size=d.N.shape)
    params = OptimizerParams(rho_rail=0.0, rho_bus=0.0, eta=0.0, sigma=0.0)
    lp, cols = build_iteration_lp(micro, d, linearize_theta(micro, d), params)
    sol = solve_lp(lp)
    assert sol.objective == pytest.approx(Evaluator(micro).objective(d), rel=1e-9)
    assert cols.design(sol) == d


def test_trust_region_respects_rail_cap(micro):
    d = micro.zero_design()
    d.x[:, micro.rail_mask] = 2.5
    (_, x_hi), _, _ = trust_region_bounds(micro, d, OptimizerParams())
    assert np.all(x_hi[:, micro.rail_mask] == 2.5)


def test_inner_objective_matches_breakdown(desk):
    ev = Evaluator(desk)
    d = desk.zero_design(lam=0.7)
    d.x[:, desk.rail_mask] = 1.25
    d.x[::2, desk.bus_mask] = 1.0
    d.N[:] = 8.0
    flows, obj, theta = ev.solve_flows(d)
    assert objective_breakdown(desk, flows, theta, d)["total"] == pytest.approx(obj, rel=1e-9)


def test_unavailable_service_cannot_board():
    sc = one_route()
    d = DesignPoint(np.array([[0.0], [1.0]]), np.zeros((2, 0)), 1.0)
    lp, zc = build_inner_lp(sc, ChoiceModel(sc).theta(d), d)
    sol = solve_lp(lp)
    assert sol.x[zc[(0, 0, 0)][0]] == 0.0


def test_shared_legs_use_half_a_vehicle(micro):
    sc = micro.replace(commutes=micro.commutes + (
        Commute("C-DT", "downtown", (1.0, 1.0, 1.0, 1.0), (-3.0, 0.2), (0.0, 12.0)),),
        routes=micro.routes + (
            CommuteRoute("C-DT", "amod_rail", (Leg("amod", station="S", distance_km=3.2, travel_min=6.0),
                                               Leg("transit", "R", "S", "DT", travel_min=10.0)), 2.0, "PA"),))
    trips, shared = generate_sharing_scenarios(sc, "S", 60.0, 60.0)
    assert len(trips) == 1
    fm = FlowModel(shared)
    d = shared.zero_design()
    d.x[:, shared.rail_mask] = 1.0
    d.N[:] = 1.0
    lp, zc = build_inner_lp(shared, ChoiceModel(shared).theta(d), d, model=fm)
    A = lp.matrix().toarray()
    members = []
    for com, rid, i in trips[0].members:
        c = shared.commute_index[com]
        k = [r.id for r in shared.routes_by_commute[com]].index(rid)
        members.append(zc[(c, k, i)][0])
    row = lp.row_names.index("avail[0,0]")
    assert A[row, members[0]] + A[row, members[1]] == pytest.approx(1.0)
    assert sum(n.startswith("share[") for n in lp.row_names) == shared.T
