import numpy as np
import pytest

from tcmum.choice import ChoiceModel
from tcmum.evaluation import REPORT_COLUMNS, Evaluator, evaluate_design, mode_label, objective_breakdown
from tcmum.flows import BoardingFlows
from tcmum.model import Commute, ScenarioError
from test_flows import one_route


def baseline(sc):
    d = sc.zero_design()
    d.x[:, sc.rail_mask] = 1.0
    d.x[:2, sc.bus_mask] = 1.0
    return d


def test_no_fleet_means_no_amod_share(micro):
    _, rep = evaluate_design(micro, baseline(micro))
    row = rep.row(1.0, 0.0)
    assert row["amod_local"] == 0.0
    assert row["amod_rail_dt"] == 0.0
    assert rep.amod_utilization is None


def test_report_row_order(micro):
    _, rep = evaluate_design(micro, baseline(micro))
    assert tuple(rep.row())[: len(REPORT_COLUMNS)] == REPORT_COLUMNS


def test_zero_demand():
    sc = one_route(demand=[0.0, 0.0])
    d = sc.zero_design()
    d.x[:] = 1.0
    _, rep = evaluate_design(sc, d)
    assert rep.avg_disutility == rep.avg_waiting == rep.avg_walking == rep.avg_excess_waiting == 0.0
    assert rep.unserved == {"local": 0.0}


def test_single_route_half_headway():
    sc = one_route(T=3, capacity=100.0, demand=[2.0, 1.0, 3.0])
    d = sc.zero_design()
    d.x[:] = 1.0
    _, rep = evaluate_design(sc, d)
    assert rep.avg_excess_waiting == pytest.approx(0.0, abs=1e-12)
    assert rep.avg_waiting == pytest.approx(2.5)
    assert rep.share("local", "bus") == pytest.approx(1.0)


def test_capacity_shortfall_creates_excess_wait():
    sc = one_route(T=3, capacity=1.0, demand=[2.0, 0.0, 0.0])
    d = sc.zero_design()
    d.x[:] = 1.0
    _, rep = evaluate_design(sc, d)
    # the second commuter boards one interval later
    assert rep.components["transit_excess_wait"] == pytest.approx(5.0)


def test_unboarded_demand_waits_whole_horizon():
    sc = one_route(T=3, demand=[2.0, 1.0, 3.0])
    d = sc.zero_design()
    d.x[:] = 1.0
    th = ChoiceModel(sc).theta(d)
    comp = objective_breakdown(sc, BoardingFlows({(0, 0, 0): np.zeros(3)}), th, d)
    assert comp["transit_excess_wait"] == pytest.approx(5.0 * (2 * 3 + 1 * 2 + 3 * 1))
    assert comp["total"] == comp["transit_excess_wait"]


def test_walk_component_linear_and_design_free(micro):
    ev = Evaluator(micro)
    d = baseline(micro)
    flows, _, theta = ev.solve_flows(d)
    walk = objective_breakdown(micro, flows, theta, d)["walk"]
    d2 = d.copy()
    d2.N[:] = 5.0
    d2.x[:, micro.rail_mask] = 2.0
    assert objective_breakdown(micro, flows, theta, d2)["walk"] == pytest.approx(walk)
    doubled = BoardingFlows({k: 2 * v for k, v in flows.z.items()})
    assert objective_breakdown(micro, doubled, theta, d)["walk"] == pytest.approx(2 * walk)


def test_stranded_demand_counts_as_waiting(micro):
    d = micro.zero_design()
    d.x[:, micro.rail_mask] = 1.0
    _, rep = evaluate_design(micro, d)
    assert rep.components["stranded_wait"] > 0
    assert rep.unserved["local"] == pytest.approx(1.0)


def test_infeasible_design_rejected(micro):
    d = baseline(micro)
    d.x[:, micro.bus_mask] = 1.0
    with pytest.raises(ScenarioError):
        evaluate_design(micro, d)


def test_mode_labels(micro):
    labels = {r.id: mode_label(r, micro.line_by_id) for r in micro.routes}
    assert labels == {"bus": "bus", "amod": "amod", "bus_rail": "bus_rail", "amod_rail": "amod_rail",
                      "rail": "rail"}


def test_shares_sum_to_one_when_served(desk):
    d = desk.zero_design(lam=0.5)
    d.x[:, desk.rail_mask] = 1.25
    d.x[:4, desk.bus_mask] = 1.0
    d.N[:] = 10.0
    _, rep = evaluate_design(desk, d)
    for kind in ("local", "downtown"):
        assert sum(rep.shares[kind].values()) == pytest.approx(1.0)
