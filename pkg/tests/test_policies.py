import math

import pytest

from sat2c.allocator import Task
from sat2c.linkbudget import channel_coefficient, data_rate
from sat2c.orbital import (
    EARTH_ROTATION_RAD_S,
    build_walker_star,
    elevation_deg,
    geodetic_to_ecef,
    load_ground_stations,
    orbit_position,
    orbital_period_s,
)
from sat2c.policies import (
    ALL_POLICIES,
    Policy,
    Timeout,
    aggregate,
    build_network,
    first_contact,
    monte_carlo,
    run_policy,
    savings_vs_fixed,
    store_and_forward_latency,
    sweep,
    tasks_for_seed,
)


def contact_oracle(sat, stations, mask, step, limit):
    """Scalar re-implementation: step the orbit and the Earth until some station sees the satellite."""
    rate = 360.0 / orbital_period_s(sat.radius_km - 6371.0)
    for k in range(int(limit / step) + 1):
        t = k * step
        pos = orbit_position(sat.radius_km, sat.raan_deg, sat.anomaly_deg + rate * t)
        for g in stations:
            gpos = geodetic_to_ecef(g.latitude_deg, g.longitude_deg + math.degrees(EARTH_ROTATION_RAD_S * t))
            if elevation_deg(gpos, pos) > mask:
                return t
    return None


def test_orbital_period_600km():
    assert orbital_period_s(600.0) == pytest.approx(5792.0, abs=2.0)


def test_store_and_forward_immediate_contact(scenario):
    (sat,) = build_walker_star(1, 1, 600.0)
    gs = load_ground_stations([("G", 0.0, 0.0)])
    rf = scenario.rf_downlink
    link = channel_coefficient(600.0, rf)
    downlink_only = 1.2e6 / data_rate(rf.max_tx_power_w, link.h_squared, rf.bandwidth_hz) + link.prop_delay_s
    assert store_and_forward_latency(sat, 1.2e6, gs, rf) == pytest.approx(downlink_only, rel=1e-9)


@pytest.mark.parametrize("anomaly_index", [0, 3, 7, 12])
def test_store_and_forward_polar_station_within_one_period(anomaly_index):
    sat = build_walker_star(1, 20, 600.0)[anomaly_index]
    pole = load_ground_stations([("P", 90.0, 0.0)])
    wait, _ = first_contact(sat, pole)
    assert wait <= orbital_period_s(600.0)
    assert wait == contact_oracle(sat, pole, 10.0, 1.0, orbital_period_s(600.0))


def test_first_contact_matches_scalar_oracle(scenario):
    sats = build_walker_star(7, 20, 600.0)
    stations = load_ground_stations(scenario.gs_catalog[:4])
    for sat in sats[::23]:
        wait, _ = first_contact(sat, stations)
        assert wait == contact_oracle(sat, stations, 10.0, 1.0, 86_400.0)


def test_store_and_forward_timeouts(scenario):
    (sat,) = build_walker_star(1, 1, 600.0)
    with pytest.raises(Timeout):
        store_and_forward_latency(sat, 1.2e6, [], scenario.rf_downlink)
    far = load_ground_stations([("G", 0.0, 180.0)])
    with pytest.raises(Timeout):
        first_contact(sat, far, horizon_s=60.0)


@pytest.fixture(scope="module")
def mc20(scenario):
    return monte_carlo(scenario, 20, 1)


def test_per_instance_dominance(mc20):
    for run in mc20.runs:
        sat2c = run[Policy.SAT2C].outcomes
        for other in (Policy.ALWAYS_CLOUD, Policy.ALWAYS_EDGE, Policy.MAX_POWER):
            for mine, theirs in zip(sat2c, run[other].outcomes):
                assert mine.path == theirs.path
                if theirs.report.feasible:
                    assert mine.report.feasible
                    assert mine.report.e_bit_total <= theirs.report.e_bit_total * (1 + 1e-9)


def test_feasible_reports_meet_deadline(mc20):
    for run in mc20.runs:
        for result in run.values():
            for o in result.outcomes:
                if o.report.feasible:
                    assert o.report.latency_s <= o.task.deadline_s + 1e-9


def test_single_run_aggregate_is_identity(scenario):
    mc = monte_carlo(scenario, 1, 5)
    graph = build_network(scenario)
    tasks = tasks_for_seed(graph, scenario, 5)
    for p in ALL_POLICIES:
        direct = run_policy(graph, tasks, p, scenario)
        stats = mc.stats[p]
        assert stats.mean_energy_per_bit == direct.mean_energy_per_bit
        assert stats.mean_latency_s == direct.mean_latency_s
        assert stats.offload_percent == direct.offload_percent
        assert aggregate([direct]) == stats


def test_monte_carlo_deterministic(scenario):
    a = monte_carlo(scenario, 3, 9, [Policy.SAT2C, Policy.ALWAYS_EDGE])
    b = monte_carlo(scenario, 3, 9, [Policy.SAT2C, Policy.ALWAYS_EDGE])
    assert a.stats == b.stats


def test_savings_keys(mc20):
    s = savings_vs_fixed(mc20)
    assert s["mean"] >= 0.0
    assert math.isfinite(s["max_instance"])
    assert 0.0 < s["mean_vs_max_power"] < 1.0


def test_sweep_fcpu_keeps_cloud_constant(scenario):
    rows = sweep(scenario, "fCpu", [1e8, 5e8, 2e9], runs=5, base_seed=1)
    cloud = [r.mean_energy[Policy.ALWAYS_CLOUD] for r in rows]
    assert max(cloud) == pytest.approx(min(cloud), rel=1e-12)
    edge = [r.mean_energy[Policy.ALWAYS_EDGE] for r in rows]
    assert edge == sorted(edge)


def test_sweep_rho_one_is_all_cloud(scenario):
    (row,) = sweep(scenario, "rho", [1.0], runs=5, base_seed=1)
    assert row.offload_percent == 100.0


def test_sweep_rejects_bad_input(scenario):
    with pytest.raises(ValueError):
        sweep(scenario, "bandwidth", [1.0], 1, 1)
    with pytest.raises(ValueError):
        sweep(scenario, "rho", [], 1, 1)


def test_store_and_forward_counts_delivered_tasks(scenario):
    graph = build_network(scenario)
    tasks = [Task(o, 1.2e6, 10.0, 4.0) for o in range(0, 140, 35)]
    result = run_policy(graph, tasks, Policy.STORE_AND_FORWARD, scenario)
    assert len(result.counted()) == len(tasks)
    assert all(o.report.decision == 0 for o in result.outcomes)
