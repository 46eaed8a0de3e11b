"""Acceptance criteria, one test per criterion, each reporting a PASS/FAIL line."""

import math
import time
from dataclasses import replace
from importlib import resources

import numpy as np
import pytest
from click.testing import CliRunner

from conftest import ACCEPTANCE_LINES
from tcmum.choice import ChoiceModel, ChoiceModelSpec, choice_probs_mnl
from tcmum.cli import main
from tcmum.demand import equivalent_fleet
from tcmum.evaluation import Evaluator, evaluate_design
from tcmum.flows import build_inner_lp
from tcmum.lp import solve_lp
from tcmum.model import check_design_feasibility, round_allocation
from tcmum.optimizer import default_jobs, multi_start, random_starts
from tcmum.oracles import enumerate_boarding_oracle, grid_oracle
from tcmum.pricing import amod_fare
from tcmum.synthetic import lp_micro_instance
from tcmum.units import miles_to_km

DESK_FILE = str(resources.files("tcmum") / "scenarios" / "desk.scn")
ITERATES = []  # (label, scenario, design) from every optimizer run in this module


def record(n, title, ok, detail):
    line = f"criterion {n:02d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def interior_design(sc, rng):
    d = sc.zero_design()
    d.x[:, sc.bus_mask] = rng.uniform(0.2, 1.0, size=(sc.T, int(sc.bus_mask.sum())))
    d.x[:, sc.rail_mask] = rng.uniform(0.5, 2.5, size=(sc.T, int(sc.rail_mask.sum())))
    d.N[:] = rng.uniform(1.0, 20.0, size=d.N.shape)
    d.lam = float(rng.uniform(0.1, 1.0))
    return d


def test_criterion_01_choice_suite(desk):
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    models = [ChoiceModel(desk), ChoiceModel(desk.replace(choice=ChoiceModelSpec("nested", 0.5, 1.0, 0.8, 1.2)))]
    feasible = random_starts(desk, 500, 101)
    worst_sum = 0.0
    in_range = True
    for n in range(1000):
        d = feasible[n] if n < 500 else interior_design(desk, rng)
        for th in models[n % 2].theta(d):
            worst_sum = max(worst_sum, float(np.abs(th.sum(axis=0) - 1.0).max()))
            in_range &= bool(np.all(th >= -1e-12) and np.all(th <= 1 + 1e-12))

    worst_nest = 0.0
    for phi in (1.0, 0.6, 1.7):
        equal = desk.replace(choice=ChoiceModelSpec("nested", phi, phi, phi, phi))
        nested = ChoiceModel(equal)
        for _ in range(50):
            d = interior_design(desk, rng)
            for c in range(len(desk.commutes)):
                mnl = choice_probs_mnl(phi * nested.utilities(c, d))
                worst_nest = max(worst_nest, float(np.abs(nested.probabilities(c, d) - mnl).max()))

    hand = choice_probs_mnl([0.0, math.log(3)])
    hand_err = float(np.abs(hand - [0.25, 0.75]).max())
    elapsed = time.perf_counter() - t0
    ok = worst_sum <= 1e-12 and in_range and worst_nest <= 1e-9 and hand_err <= 1e-12 and elapsed < 5
    record(1, "choice suite", ok,
           f"max|sum-1|={worst_sum:.1e}, in [0,1]={in_range}, nested-vs-MNL={worst_nest:.1e}, "
           f"(0,ln3) err={hand_err:.1e}, {elapsed:.2f}s")


def test_criterion_02_gradients(desk):
    t0 = time.perf_counter()
    rng = np.random.default_rng(202)
    specs = [ChoiceModelSpec(), ChoiceModelSpec("nested", 0.5, 1.0, 0.8, 1.2)]
    worst_rel, worst_sum = 0.0, 0.0
    for n in range(100):
        sc = desk.replace(choice=specs[n % 2])
        m = ChoiceModel(sc)
        d = interior_design(sc, rng)
        for c in range(len(sc.commutes)):
            _, g = m.gradient(c, d)
            worst_sum = max(worst_sum, float(np.abs(g.sum(axis=0)).max()))
            nl, ns = len(m.var_lines[c]), len(m.var_stations[c])
            for v in range(g.shape[2]):
                # each interval's probabilities depend only on that interval's copy
                def moved(sign):
                    e = d.copy()
                    if v < nl:
                        col = e.x[:, m.var_lines[c][v]]
                    elif v < nl + ns:
                        col = e.N[:, m.var_stations[c][v - nl]]
                    else:
                        h = 1e-4 * max(1.0, e.lam)
                        e.lam += sign * h
                        return m.probabilities(c, e), h
                    h = 1e-4 * np.maximum(1.0, col)
                    col += sign * h
                    return m.probabilities(c, e), h

                (up, h), (down, _) = moved(1), moved(-1)
                fd = (up - down) / (2 * h)
                err = np.abs(g[:, :, v] - fd).max(axis=0)
                scale = np.maximum(np.maximum(np.abs(fd).max(axis=0), np.abs(g[:, :, v]).max(axis=0)), 1e-6)
                worst_rel = max(worst_rel, float((err / scale).max()))
    elapsed = time.perf_counter() - t0
    ok = worst_rel <= 1e-4 and worst_sum <= 1e-8 and elapsed < 30
    record(2, "gradients", ok, f"max rel err={worst_rel:.1e}, max|sum grad|={worst_sum:.1e}, {elapsed:.2f}s")


def test_criterion_03_lp_exactness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(303)
    worst, n = 0.0, 0
    for _ in range(30):
        sc, d = lp_micro_instance(rng)
        assert len(sc.lines) <= 3 and sc.T <= 4 and len(sc.commutes) <= 5
        theta = ChoiceModel(sc).theta(d)
        lp, _ = build_inner_lp(sc, theta, d)
        sol = solve_lp(lp)
        ref, _ = enumerate_boarding_oracle(sc, d, theta)
        worst = max(worst, abs(sol.objective - ref))
        n += 1
    elapsed = time.perf_counter() - t0
    ok = n >= 20 and worst <= 1e-7 and elapsed < 60
    record(3, "LP exactness", ok, f"{n} instances, max|LP-enum|={worst:.1e}, {elapsed:.2f}s")


def test_criterion_04_fares():
    a = amod_fare(miles_to_km(2.0), 10.0)
    b = amod_fare(miles_to_km(0.5), 2.0)
    ok = round(a, 2) == 8.42 and round(b, 2) == 4.98
    record(4, "fares", ok, f"(2 mi, 10 min)={a:.4f}, (0.5 mi, 2 min)={b:.4f}")


def test_criterion_05_availability_ratio(micro):
    st = micro.stations[0]
    assert (micro.delta_t, st.area, st.shape_coeff, micro.utility.amod_speed) == (5.0, 90.0, 0.667, 20.0)
    ratio = micro.availability_ratio(st.station_id)
    record(5, "availability ratio", abs(ratio - 0.424) <= 1e-3, f"{ratio:.5f}")


@pytest.fixture(scope="module")
def desk_run(desk):
    t0 = time.perf_counter()
    res = multi_start(desk, jobs=default_jobs())
    elapsed = time.perf_counter() - t0
    for k, traj in enumerate(res.trajectories):
        ITERATES.extend((f"desk start {k}", desk, d) for d in traj.designs)
    return res, elapsed


def test_criterion_06_convergence(desk, desk_run):
    res, elapsed = desk_run
    params = desk.algorithm
    assert (params.epsilon, params.max_iter, len(res.trajectories)) == (0.1, 15, 15)
    conv = [t for t in res.trajectories if t.converged and t.iterations <= 15]
    its = sorted(t.iterations for t in res.trajectories)
    ok = len(conv) >= 12 and elapsed < 300
    record(6, "convergence", ok, f"{len(conv)}/15 converged, iterations {its}, {elapsed:.1f}s")


def snap(sc, d):
    """Nearest point on the 0.1 rail grid, integral fleet and 0.1 discount grid, kept feasible."""
    x = d.x.copy()
    rail = sc.rail_mask
    b = sc.budgets
    x[:, rail] = np.clip(np.round(x[:, rail] * 10) / 10, b.lb_rail, b.ub_rail)
    if (x[:, rail] * sc.line_costs[rail]).sum() > b.B_rail + 1e-9:
        x[:, rail] = np.clip(np.floor(d.x[:, rail] * 10 + 1e-9) / 10, b.lb_rail, b.ub_rail)
    x[:, sc.bus_mask] = np.round(x[:, sc.bus_mask])
    N = round_allocation(d.N).astype(float)
    f = sc.fares
    lam = float(np.clip(round(d.lam * 10) / 10, f.lambda_min, f.lambda_max))
    return x, N, lam


def _unique(arrays):
    out = []
    for a in arrays:
        if not any(np.array_equal(a, b) for b in out):
            out.append(a)
    return out


def test_criterion_07_oracle_gap(desk, desk_run):
    res, ms_elapsed = desk_run
    t0 = time.perf_counter()
    best_traj = res.trajectories[res.best_start]
    candidates = [t.final for t in res.trajectories] + best_traj.designs
    snapped = [snap(desk, d) for d in candidates]
    xs = _unique([s[0] for s in snapped])
    Ns = _unique([s[1] for s in snapped])
    lam_best = snap(desk, res.best)[2]
    lams = sorted({s[2] for s in snapped}
                  | {min(lam_best + 0.1, 1.0), max(round(lam_best - 0.1, 10), desk.fares.lambda_min)})
    grid = grid_oracle(desk, xs, Ns, lams, jobs=default_jobs())
    elapsed = ms_elapsed + time.perf_counter() - t0
    gap = (res.best_objective - grid.best_objective) / grid.best_objective
    ok = gap <= 0.05 and elapsed < 900
    record(7, "oracle gap", ok,
           f"multi-start {res.best_objective:.2f} vs grid min {grid.best_objective:.2f} "
           f"over {grid.grid_size} points ({len(xs)}x{len(Ns)}x{len(lams)}), gap {100 * gap:+.2f}%, "
           f"{elapsed:.1f}s")


def test_criterion_08_protocol(desk):
    d = desk.zero_design()
    d.x[:, desk.rail_mask] = desk.budgets.B_rail / desk.T
    per_t = int(desk.budgets.B_bus // desk.T)
    bus = np.flatnonzero(desk.bus_mask)
    for t in range(desk.T):
        d.x[t, bus[(np.arange(per_t) + t) % len(bus)]] = 1.0
    assert d.x[:, bus].sum() == desk.budgets.B_bus and not d.N.any()
    _, rep = evaluate_design(desk.replace(budgets=replace(desk.budgets, N_bar=0.0)), d)
    local, down = rep.share("local", "amod"), rep.share("downtown", "amod_rail")
    pce, cce = equivalent_fleet(0.8, rule="PCE"), equivalent_fleet(0.8, rule="CCE")
    ok = local == 0.0 and down == 0.0 and pce == 82 and cce == 164
    record(8, "protocol", ok, f"AMoD share local={100 * local:g}% downtown={100 * down:g}%, "
                              f"PCE(0.8)={pce}, CCE(0.8)={cce}")


def _solve_twice(tmp_path):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        r = CliRunner().invoke(main, ["solve", DESK_FILE, "--seed", "7", "--starts", "2", "--out", str(out),
                                      "--jobs", "1"])
        assert r.exit_code == 0, r.output
        outs.append(out)
    return outs


def test_criterion_10_determinism(tmp_path, desk):
    from tcmum.scenario_io import read_design

    a, b = _solve_twice(tmp_path)
    files = ("design.csv", "report.csv", "profile.csv", "trajectory.csv")
    same = [(a / f).read_bytes() == (b / f).read_bytes() for f in files]
    seed_logged = "# seed: 7" in (a / "design.csv").read_text()
    ITERATES.append(("cli solve", desk, read_design(a / "design.csv", desk)))
    ok = all(same) and seed_logged
    record(10, "determinism", ok, f"byte-identical {dict(zip(files, same))}, seed in header={seed_logged}")


def test_criterion_09_feasibility(micro, desk_run):
    res = multi_start(micro, jobs=1)
    for k, traj in enumerate(res.trajectories):
        ITERATES.extend((f"micro start {k}", micro, d) for d in traj.designs)
    bad = [(label, v) for label, sc, d in ITERATES for v in check_design_feasibility(d, sc)]
    ok = len(ITERATES) > 0 and not bad
    record(9, "feasibility", ok, f"{len(ITERATES)} iterates checked, {len(bad)} violations"
                                 + (f", first: {bad[0][0]}: {bad[0][1]}" if bad else ""))
