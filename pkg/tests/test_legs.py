import pytest

from tcmum.legs import classify_legs
from tcmum.model import Commute, CommuteRoute, Leg, ScenarioError, TransitLine


def keys(sc, commute, route_id):
    c = sc.commute_index[commute]
    k = [r.id for r in sc.routes_by_commute[commute]].index(route_id)
    return c, k


def test_direct_amod_only_in_direct_set(micro):
    idx = classify_legs(micro)
    ck = keys(micro, "A-B", "amod")
    assert ck in idx.direct["S"]
    assert ck not in idx.first_mile["S"]
    assert all(key[:2] != ck for key in idx.last_mile["S"])


def test_amod_to_rail(micro):
    idx = classify_legs(micro)
    c, k = keys(micro, "A-DT", "amod_rail")
    r = micro.line_index["R"]
    assert (c, k) in idx.first_mile["S"]
    assert (c, k, 1) in idx.boardings[("S", r)]


def test_occupancy_on_three_stop_line(micro):
    idx = classify_legs(micro)
    b = micro.line_index["B1"]
    c, k = keys(micro, "A-DT", "bus_rail")
    leg = (c, k, 0)  # boards A, alights S on A-B-S
    assert leg in idx.through[("A", b)]
    assert leg in idx.through[("B", b)]
    assert leg not in idx.through[("S", b)]


def test_first_boarding_and_transfer(micro):
    idx = classify_legs(micro)
    b, r = micro.line_index["B1"], micro.line_index["R"]
    c, k = keys(micro, "B-DT", "bus_rail")
    assert (c, k) in idx.first_boarding[("B", b)]
    assert (c, k, 1) in idx.transfers[("S", r)]
    assert idx.transit_legs[(c, k)] == [0, 1]
    assert idx.amod_legs[(c, k)] == []


def test_unknown_line_raises(micro):
    bad = CommuteRoute("A-B", "ghost", (Leg("transit", "L99", "A", "B"),), 0.0, "P")
    with pytest.raises(ScenarioError):
        classify_legs(micro.replace(routes=micro.routes + (bad,)))
