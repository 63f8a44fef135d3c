"""Acceptance criteria; each test appends one PASS/FAIL line to the terminal summary."""
import math
import random
import subprocess
import sys
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, exhaustive_joint_optimum, random_toy_graph
from sat2c.allocator import (
    AmplifierParams,
    Infeasible,
    Task,
    dinkelbach_power,
    link_energy,
    rf_energy_power_domain,
    solve_power_allocation,
    time_from_power,
)
from sat2c.cli import derived_values, main
from sat2c.linkbudget import LinkCoefficient
from sat2c.policies import Policy, monte_carlo, savings_vs_fixed, sweep
from sat2c.routing import greedy_deconflicted_routes, shortest_prop_path

LN2 = math.log(2.0)
B = 500e6


def record(number, title, ok, detail):
    ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] {number}. {title}: {detail}")
    assert ok, detail


@pytest.fixture(scope="module")
def mc100(scenario):
    start = time.perf_counter()
    mc = monte_carlo(scenario, 100, scenario.seed)
    return mc, time.perf_counter() - start


# --- 1 -----------------------------------------------------------------------------

def test_criterion_1_link_budget_fidelity(scenario):
    start = time.perf_counter()
    proc = subprocess.run([sys.executable, "-m", "sat2c", "validate"], capture_output=True, text=True)
    elapsed = time.perf_counter() - start
    v = derived_values(scenario)
    checks = {
        "downlink Tx gain": (v["downlink_tx_gain_db"], 32.13),
        "downlink Rx gain": (v["downlink_rx_gain_db"], 34.20),
        "ISL gain": (v["isl_tx_gain_db"], 34.41),
        "downlink noise": (v["downlink_noise_dbw"], -119.32),
        "ISL noise": (v["isl_noise_dbw"], -114.99),
    }
    worst = max(abs(got - want) for got, want in checks.values())
    ok = proc.returncode == 0 and worst <= 0.05 and elapsed < 1.0
    record(1, "link-budget fidelity", ok,
           f"max deviation {worst:.4f} dB (tol 0.05), validate exit {proc.returncode}, {elapsed:.2f} s")


# --- 2 -----------------------------------------------------------------------------

def _phi(bits, h2, ts, amp):
    with np.errstate(over="ignore"):
        p = np.expm1(bits / (B * ts) * LN2) / h2
    return (amp.p_fix_w + amp.mu * p) * ts


def _grid_single(bits, h2, budget, amp):
    t_min = time_from_power(bits, B, amp.p_out_max_w, h2)
    return float(np.min(_phi(bits, h2, np.geomspace(t_min, budget, 10_000), amp)))


def _grid_pair(bits, h2a, h2b, budget, amp):
    ta = time_from_power(bits, B, amp.p_out_max_w, h2a)
    tb = time_from_power(bits, B, amp.p_out_max_w, h2b)
    t1 = np.geomspace(ta, budget - tb, 10_000)
    t2 = np.geomspace(tb, budget - ta, 10_000)
    prefix = np.minimum.accumulate(_phi(bits, h2b, t2, amp))
    idx = np.searchsorted(t2, budget - t1, side="right") - 1
    ok = idx >= 0
    return float(np.min(_phi(bits, h2a, t1[ok], amp) + prefix[idx[ok]]))


def _random_instance(rng, n_links):
    amp = AmplifierParams(p_fix_w=rng.choice([0.0, 0.01, 1.0, 5.0]), load_coefficient=0.5105088062083414,
                          drain_efficiency=0.65, p_out_max_w=10.0)
    h2s = [10 ** rng.uniform(-2.0, 4.0) for _ in range(n_links)]
    bits = 10 ** rng.uniform(5.0, 6.7)
    t_min = sum(time_from_power(bits, B, amp.p_out_max_w, h) for h in h2s)
    budget = t_min * 10 ** rng.uniform(0.005, 4.0)  # from nearly binding to far from binding
    return amp, h2s, bits, budget


def test_criterion_2_solver_optimality():
    rng = random.Random(20240)
    start = time.perf_counter()
    worst, failures, n = -math.inf, 0, 0
    for n_links, count in ((1, 100), (2, 50)):
        for _ in range(count):
            amp, h2s, bits, budget = _random_instance(rng, n_links)
            links = [LinkCoefficient(h, 0.0, 0.0, B) for h in h2s]
            try:
                profile = solve_power_allocation(links, bits, budget, amp)
            except Infeasible:
                failures += 1
                continue
            energy = rf_energy_power_domain(links, profile, amp)
            oracle = (_grid_single(bits, h2s[0], budget, amp) if n_links == 1
                      else _grid_pair(bits, *h2s, budget, amp))
            gap = energy / oracle - 1.0
            worst = max(worst, gap)
            failures += gap > 0.005
            n += 1
    elapsed = time.perf_counter() - start
    record(2, "solver optimality", failures == 0 and elapsed < 30.0,
           f"{n}/150 instances solved, worst (solver/grid - 1) = {worst:+.2e} (tol +5e-3), {elapsed:.1f} s")


# --- 3 -----------------------------------------------------------------------------

def test_criterion_3_phi_structure():
    bits, h2 = 1.2e6, 4.0
    lk = LinkCoefficient(h2, 0.0, 0.0, B)
    results = []
    for p_fix in (0.0, 0.01, 5.0):
        amp = AmplifierParams(p_fix, 0.5105088062083414, 0.65, 10.0)
        t_min = time_from_power(bits, B, amp.p_out_max_w, h2)
        if p_fix > 0:
            t_star = time_from_power(bits, B, dinkelbach_power(p_fix, amp.mu, h2, amp.p_out_max_w), h2)
            t_max = 10.0 * t_star
        else:
            t_max = 1e4 * t_min
        ts = np.geomspace(t_min, t_max, 1000)
        slopes = np.diff([link_energy(t, bits, lk, amp) for t in ts])
        signs = np.sign(slopes[slopes != 0])
        changes = int(np.count_nonzero(np.diff(signs)))
        if p_fix == 0:
            results.append((p_fix, bool(np.all(slopes <= 0)), "non-increasing"))
        else:
            results.append((p_fix, changes == 1 and signs[0] < 0 < signs[-1], f"{changes} sign change(s)"))
    record(3, "per-link energy structure", all(ok for _, ok, _ in results),
           ", ".join(f"P_fix={p}: {d}" for p, _, d in results))


# --- 4 -----------------------------------------------------------------------------

def test_criterion_4_policy_dominance(mc100):
    mc, elapsed = mc100
    violations, compared = 0, 0
    for run in mc.runs:
        for other in (Policy.ALWAYS_CLOUD, Policy.ALWAYS_EDGE, Policy.MAX_POWER):
            for mine, theirs in zip(run[Policy.SAT2C].outcomes, run[other].outcomes):
                if not theirs.report.feasible:
                    continue
                compared += 1
                if not (mine.report.feasible
                        and mine.report.e_bit_total <= theirs.report.e_bit_total * (1 + 1e-9)):
                    violations += 1
    s = savings_vs_fixed(mc)
    ok = violations == 0 and s["mean"] > 0 and elapsed < 300.0
    record(4, "policy dominance", ok,
           f"{violations} violations in {compared} task comparisons over {len(mc.runs)} runs; savings vs best "
           f"fixed: mean {100 * s['mean']:.3f}%, max per run {100 * s['max_instance']:.2f}%; "
           f"vs MaxPower {100 * s['mean_vs_max_power']:.1f}%; {elapsed:.1f} s")


# --- 5, 6 --------------------------------------------------------------------------

def _non_decreasing(xs):
    return all(b >= a for a, b in zip(xs, xs[1:]))


def test_criterion_5_fcpu_trend(scenario):
    start = time.perf_counter()
    rows = sweep(scenario, "fCpu", [1e8, 2.5e8, 5e8, 1e9, 2e9], runs=50, base_seed=scenario.seed)
    elapsed = time.perf_counter() - start
    offload = [r.offload_percent for r in rows]
    cloud = [r.mean_energy[Policy.ALWAYS_CLOUD] for r in rows]
    edge = [r.mean_energy[Policy.ALWAYS_EDGE] for r in rows]
    spread = (max(cloud) - min(cloud)) / min(cloud)
    ok = _non_decreasing(offload) and spread < 1e-3 and _non_decreasing(edge) and elapsed < 600.0
    record(5, "fCpu trend", ok,
           f"offload % {[round(x, 1) for x in offload]}, AlwaysCloud spread {spread:.1e}, "
           f"AlwaysEdge {['%.3g' % e for e in edge]}, {elapsed:.1f} s")


def test_criterion_6_rho_trend(scenario):
    start = time.perf_counter()
    rows = sweep(scenario, "rho", [1.0, 2.0, 4.0, 8.0], runs=50, base_seed=scenario.seed)
    elapsed = time.perf_counter() - start
    edge = [r.mean_energy[Policy.ALWAYS_EDGE] for r in rows]
    ok = _non_decreasing(edge[::-1]) and rows[0].offload_percent == 100.0 and elapsed < 600.0
    record(6, "rho trend", ok,
           f"AlwaysEdge {['%.3g' % e for e in edge]}, offload at rho=1 {rows[0].offload_percent}%, "
           f"{elapsed:.1f} s")


# --- 7 -----------------------------------------------------------------------------

def test_criterion_7_routing_quality():
    rng = random.Random(2024)
    start = time.perf_counter()
    worst, bound_failures, path_mismatches, partial, no_assignment = 0.0, 0, 0, 0, 0
    for _ in range(200):
        graph = random_toy_graph(rng)
        origins = rng.sample(range(graph.n_satellites), rng.randint(1, 3))
        tasks = [Task(o, 1.2e6, 10.0, 4.0) for o in origins]
        plan = greedy_deconflicted_routes(graph, tasks)
        optimum = exhaustive_joint_optimum(graph, origins)
        if len(origins) == 1 and plan.complete:
            if plan.paths[0] != shortest_prop_path(graph, origins[0]):
                path_mismatches += 1
            if plan.objective != pytest.approx(optimum, rel=1e-12):
                path_mismatches += 1
        if math.isinf(optimum):
            no_assignment += 1
            continue
        if not plan.complete:
            partial += 1  # greedy stopped with an unroutable task (partial plan: no objective)
            continue
        ratio = plan.objective / optimum
        worst = max(worst, ratio)
        bound_failures += ratio > 2.0 + 1e-12
    elapsed = time.perf_counter() - start
    ok = bound_failures == 0 and path_mismatches == 0 and elapsed < 60.0
    record(7, "routing quality", ok,
           f"worst greedy/optimum {worst:.3f} (bound 2), single-task mismatches {path_mismatches}, "
           f"partial greedy plans {partial}, instances without a joint assignment {no_assignment}, "
           f"{elapsed:.1f} s")


# --- 8 -----------------------------------------------------------------------------

def test_criterion_8_latency(mc100):
    mc, elapsed = mc100
    worst_slack = math.inf
    for run in mc.runs:
        for result in run.values():
            for o in result.outcomes:
                if o.report.feasible:
                    worst_slack = min(worst_slack, o.task.deadline_s - o.report.latency_s)
    ratios = [run[Policy.STORE_AND_FORWARD].mean_latency_s / run[Policy.SAT2C].mean_latency_s
              for run in mc.runs]
    share = sum(r >= 10.0 for r in ratios) / len(ratios)
    ok = worst_slack >= -1e-9 and share >= 0.9 and elapsed < 300.0
    record(8, "latency compliance", ok,
           f"min deadline slack {worst_slack:.3g} s; store-and-forward >= 10x Sat2C in {100 * share:.0f}% of "
           f"runs (median ratio {float(np.median(ratios)):.0f}x)")


# --- 9 -----------------------------------------------------------------------------

def test_criterion_9_determinism(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    codes = [main(["montecarlo", "--out", str(out)]) for out in (a, b)]
    files = sorted(p.name for p in a.glob("*.csv"))
    same = [((a / f).read_bytes() == (b / f).read_bytes()) for f in files]
    ok = codes == [0, 0] and len(files) == 2 and all(same)
    record(9, "determinism", ok, f"{sum(same)}/{len(files)} CSV files byte-identical ({', '.join(files)})")
