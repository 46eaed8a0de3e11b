import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tcmum.lp import EQ, GE, LE, HighsBackend, LinearProgram, SimplexSolver, get_backend, max_violation, solve_lp
from tcmum.lp.mps import write_mps


def test_bound_driven_optimum():
    lp = LinearProgram()
    j = lp.add_var("x", cost=1.0)
    lp.add_row({j: 1.0}, GE, 1.0)
    sol = solve_lp(lp)
    assert sol.optimal
    assert sol.objective == pytest.approx(1.0)
    assert sol.value("x") == pytest.approx(1.0)


def test_infeasible_pair():
    lp = LinearProgram()
    j = lp.add_var("x")
    lp.add_row({j: 1.0}, LE, 0.0)
    lp.add_row({j: 1.0}, GE, 1.0)
    assert solve_lp(lp).status == "infeasible"


def test_unbounded():
    lp = LinearProgram()
    j = lp.add_var("x", lb=-np.inf, cost=-1.0)
    k = lp.add_var("y")
    lp.add_row({j: 1.0, k: -1.0}, LE, 3.0)
    assert solve_lp(lp).status == "unbounded"


def test_transportation_2x2():
    lp = LinearProgram()
    cost = [[1, 2], [2, 1]]
    v = {(i, j): lp.add_var(f"f{i}{j}", cost=cost[i][j]) for i in range(2) for j in range(2)}
    for i in range(2):
        lp.add_row({v[i, 0]: 1, v[i, 1]: 1}, LE, 1.0)
    for j in range(2):
        lp.add_row({v[0, j]: 1, v[1, j]: 1}, EQ, 1.0)
    sol = solve_lp(lp)
    assert sol.objective == pytest.approx(2.0, abs=1e-9)
    assert max_violation(lp, sol.x) <= 1e-9


def test_constant_is_added():
    lp = LinearProgram()
    lp.add_var("x", lb=2.0, ub=3.0, cost=1.0)
    lp.constant = 10.0
    assert solve_lp(lp).objective == pytest.approx(12.0)


def test_fixed_columns_and_empty_rows():
    lp = LinearProgram()
    a = lp.add_var("a", lb=1.5, ub=1.5, cost=2.0)
    b = lp.add_var("b", ub=4.0, cost=-1.0)
    lp.add_row({a: 1.0, b: 1.0}, LE, 4.0)
    lp.add_row({}, LE, 1.0)
    sol = solve_lp(lp)
    assert sol.objective == pytest.approx(3.0 - 2.5)


def test_duplicate_variable_rejected():
    lp = LinearProgram()
    lp.add_var("x")
    with pytest.raises(ValueError):
        lp.add_var("x")


def test_degenerate_cycling_example():
    # Beale's example cycles under textbook Dantzig pricing without anti-cycling
    lp = LinearProgram()
    c = [-0.75, 150, -0.02, 6]
    x = [lp.add_var(f"x{i}", cost=v) for i, v in enumerate(c)]
    lp.add_row(dict(zip(x, [0.25, -60, -0.04, 9])), LE, 0.0)
    lp.add_row(dict(zip(x, [0.5, -90, -0.02, 3])), LE, 0.0)
    lp.add_row({x[2]: 1.0}, LE, 1.0)
    sol = solve_lp(lp)
    assert sol.objective == pytest.approx(-0.05)


def test_backend_lookup():
    assert isinstance(get_backend("simplex"), SimplexSolver)
    with pytest.raises(ValueError):
        get_backend("cplex")


def test_mps_export(tmp_path):
    lp = LinearProgram("t")
    a = lp.add_var("a", ub=2.0, cost=1.0)
    lp.add_row({a: 1.0}, GE, 1.0)
    p = tmp_path / "t.mps"
    write_mps(lp, p)
    text = p.read_text()
    assert "ROWS" in text and "COLUMNS" in text and text.rstrip().endswith("ENDATA")


@st.composite
def random_lp(draw):
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    m, n = int(rng.integers(1, 7)), int(rng.integers(1, 7))
    lp = LinearProgram()
    for j in range(n):
        lo = float(rng.choice([0.0, -1.0, -np.inf]))
        hi = float(rng.choice([2.0, 5.0, np.inf]))
        lp.add_var(f"v{j}", lb=lo, ub=hi, cost=float(rng.normal()))
    for _ in range(m):
        coefs = {j: float(rng.normal()) for j in range(n) if rng.random() < 0.7}
        lp.add_row(coefs, str(rng.choice([LE, GE, EQ], p=[0.45, 0.45, 0.1])), float(rng.normal() * 3))
    return lp


@settings(max_examples=150, deadline=None)
@given(random_lp())
def test_simplex_agrees_with_highs(lp):
    ours = solve_lp(lp)
    ref = HighsBackend().solve(lp)
    assert ours.status == ref.status
    if ours.optimal:
        assert ours.objective == pytest.approx(ref.objective, rel=1e-7, abs=1e-7)
        assert max_violation(lp, ours.x) <= 1e-7
