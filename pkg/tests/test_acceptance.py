"""End-to-end acceptance checks, one reported line per criterion."""

import itertools
import subprocess
import sys
import time

import numpy as np
import pytest

from hflopt.hfl_sim import edge_aggregate, global_aggregate, make_tasks, run_fedavg, run_hfl
from hflopt.scenario import Assignment, generate_scenario, geo_initial_assignment
from hflopt.sroa import LN2, SolverConfig, derive_coefficients, required_power, shannon_throughput, sroa
from hflopt.tsia import tsia
from oracles import single_user_grid, two_user_oracle

CFG = SolverConfig()
DEADLINE_SLACK = 1e-6  # relative; the solvers only ever err on the safe side of the deadline


def test_criterion_1_throughput_and_power_shapes(criterion):
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    violations = 0
    for _ in range(1000):
        G = 10 ** rng.uniform(2, 12)
        x = G * np.logspace(-3, 3, 100)
        h = shannon_throughput(x, G)
        violations += int(np.sum(np.diff(h) <= 0)) + int(np.sum(h >= G / LN2))
        xi = 10 ** rng.uniform(2, 8)
        z = xi * np.logspace(-1.5, 3, 100)
        # x 2^(xi/x) - x, i.e. the power needed at unit noise-to-gain ratio
        y = required_power(z, xi, 1.0, 1.0)
        violations += int(np.sum(np.diff(y) >= 0))
    elapsed = time.perf_counter() - start
    passed = violations == 0 and elapsed < 5.0
    criterion(1, passed, f"{violations} violations in 1000 draws, {elapsed:.2f} s")
    assert passed


def test_criterion_2_oracle_equivalence(criterion):
    start = time.perf_counter()
    gaps1 = []
    for seed in range(20):
        sc = generate_scenario(1000 + seed, 1, 1)
        r = sroa(sc, Assignment(((0,),)), CFG)
        grid = single_user_grid(sc, 200)
        gaps1.append(r.objective / grid - 1)
    gaps2 = []
    for seed in range(10):
        sc = generate_scenario(2000 + seed, 2, 1)
        r = sroa(sc, Assignment(((0, 1),)), CFG)
        gaps2.append(r.objective / two_user_oracle(sc) - 1)
    elapsed = time.perf_counter() - start
    passed = max(gaps1) <= 0.01 and max(gaps2) <= 0.02 and elapsed < 600
    criterion(2, passed, f"N=1 worst gap {max(gaps1):+.4%}, N=2 worst gap {max(gaps2):+.4%}, {elapsed:.0f} s")
    assert passed


def test_criterion_3_feasibility(criterion):
    bad = []
    worst_residual = -np.inf
    for seed in range(100):
        sc = generate_scenario(3000 + seed, 50, 5)
        psi = geo_initial_assignment(sc)
        r = sroa(sc, psi, CFG)
        if not r.feasible:
            bad.append((seed, "infeasible"))
            continue
        a = r.allocation
        c = derive_coefficients(sc, psi, CFG)
        residual = float(np.max(c.user_delay(a.b, a.f, a.p) / r.t_star - 1))
        worst_residual = max(worst_residual, residual)
        if a.b.sum() > sc.params.total_bandwidth * (1 + 1e-6):
            bad.append((seed, "bandwidth"))
        if np.any(a.b <= 0) or np.any(a.f <= 0) or np.any(a.f > sc.f_max) \
                or np.any(a.p <= 0) or np.any(a.p > sc.p_max):
            bad.append((seed, "bounds"))
        if residual > DEADLINE_SLACK:
            bad.append((seed, "deadline"))
    passed = not bad
    criterion(3, passed, f"{len(bad)} violations over 100 scenarios, worst deadline residual {worst_residual:.2e}")
    assert passed, bad


@pytest.fixture(scope="module")
def tsia_runs():
    runs = []
    for seed in range(10):
        sc = generate_scenario(4000 + seed, 50, 5, {"importance_weight": 1.0})
        geo = sroa(sc, geo_initial_assignment(sc), CFG)
        runs.append((geo, tsia(sc, CFG)))
    return runs


def test_criterion_4_tsia_dominance(criterion, tsia_runs):
    never_worse = all(t.objective <= g.objective for g, t in tsia_runs)
    strict = sum(t.objective < g.objective for g, t in tsia_runs)
    gains = [1 - t.objective / g.objective for g, t in tsia_runs]
    passed = never_worse and strict >= 8
    criterion(4, passed, f"never worse: {never_worse}, strict improvement in {strict}/10, "
                         f"gains {min(gains):.2%}..{max(gains):.2%}")
    assert passed


def test_criterion_5_tsia_convergence(criterion, tsia_runs):
    runs = [t for _, t in tsia_runs[:5]]
    counts = [n for t in runs for n in t.stage_iterations]
    by_repeat = all(t.converged_by == ["pattern-repeat", "pattern-repeat"] for t in runs)
    passed = by_repeat and max(counts) <= 200
    criterion(5, passed, f"moves per stage {counts}, total per run "
                         f"{[sum(t.stage_iterations) for t in runs]}, all by pattern-repeat: {by_repeat}")
    assert passed


def test_criterion_6_tsia_gap(criterion):
    start = time.perf_counter()
    gaps = []
    for seed in range(5):
        sc = generate_scenario(5000 + seed, 6, 2)
        best = min(
            sroa(sc, Assignment.from_labels(labels, 2), CFG).objective
            for labels in itertools.product(range(2), repeat=6)
        )
        gaps.append(tsia(sc, CFG).objective / best - 1)
    elapsed = time.perf_counter() - start
    passed = max(gaps) <= 0.05 and elapsed < 300
    criterion(6, passed, f"gaps to enumeration {[f'{g:.3%}' for g in gaps]}, {elapsed:.0f} s")
    assert passed


def test_criterion_7_hfl_equivalence(criterion):
    samples = [40, 55, 30, 70, 45, 60, 35, 50]
    tasks = make_tasks(6000, samples, dim=8, lr=0.005)
    psi = Assignment(((0, 4, 7), (1, 2), (3, 5, 6)))
    h = run_hfl(tasks, psi, 80, 1, 5)
    f = run_fedavg(tasks, 80, 5)
    traj = float(np.max(np.abs(h.losses - f.losses) / np.abs(f.losses)))
    rng = np.random.default_rng(6001)
    flat = 0.0
    for _ in range(100):
        n, m = int(rng.integers(2, 30)), int(rng.integers(1, 6))
        ws = rng.normal(size=(n, 10))
        sizes = rng.integers(1, 500, n)
        groups = [list(g) for g in Assignment.from_labels(rng.integers(0, m, n), m).groups if g]
        nested = global_aggregate([edge_aggregate(ws[g], sizes[g]) for g in groups],
                                  [sizes[g].sum() for g in groups])
        ref = sizes @ ws / sizes.sum()
        flat = max(flat, float(np.max(np.abs(nested - ref))))
    passed = traj <= 1e-10 and flat <= 1e-12
    criterion(7, passed, f"K=1 trajectory rel. diff {traj:.1e}, flattening max abs diff {flat:.1e}")
    assert passed


def _cli(args, cwd):
    return subprocess.run([sys.executable, "-m", "hflopt", *args], cwd=cwd, capture_output=True, text=True)


def test_criterion_8_cli_determinism(criterion, tmp_path):
    commands = {
        "generate": ["generate", "--seed", "1", "--users", "12", "--edges", "3"],
        "sroa": ["sroa", "--scenario", "SC"],
        "tsia": ["tsia", "--scenario", "SC"],
        "sweep": ["sweep", "--scenario", "SC", "--lambda", "0.1", "--lambda", "10", "--jobs", "2"],
        "hfl-sim": ["hfl-sim", "--seed", "1", "--global-iters", "5", "--reference"],
    }
    sc_file = tmp_path / "input" / "scenario.json"
    assert _cli(commands["generate"] + ["--out", str(sc_file)], tmp_path).returncode == 0
    mismatched = []
    for name, argv in commands.items():
        argv = [str(sc_file) if a == "SC" else a for a in argv]
        outputs = []
        for rep in ("a", "b"):
            d = tmp_path / name / rep
            proc = _cli(argv + ["--out-dir", str(d)], tmp_path)
            assert proc.returncode == 0, proc.stderr
            outputs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())})
        if not outputs[0] or outputs[0] != outputs[1]:
            mismatched.append(name)
    passed = not mismatched
    criterion(8, passed, f"{len(commands) - len(mismatched)}/{len(commands)} commands byte-identical"
                         + (f", differing: {mismatched}" if mismatched else ""))
    assert passed


def test_criterion_9_lambda_sweep(criterion):
    sc = generate_scenario(9000, 20, 3)
    psi = geo_initial_assignment(sc)
    lams = np.logspace(-3, 3, 13)
    reports = [sroa(sc.with_params(importance_weight=float(lam)), psi, CFG).report for lam in lams]
    t = np.array([r.t_sum for r in reports])
    e = np.array([r.e_sum for r in reports])
    tol = CFG.eps2
    t_bad = int(np.sum(np.diff(t) > tol * t[:-1]))
    e_bad = int(np.sum(np.diff(e) < -tol * e[:-1]))
    passed = t_bad == 0 and e_bad == 0
    criterion(9, passed, f"T_sum {t[0]:.4g}->{t[-1]:.4g} s, E_sum {e[0]:.4g}->{e[-1]:.4g} J, "
                         f"{t_bad + e_bad} violations beyond relative {tol:g}")
    assert passed
