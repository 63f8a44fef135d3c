"""Benchmark policies, the store-and-forward baseline and Monte Carlo drivers."""
from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from . import allocator as alloc
from .allocator import EnergyReport, PowerProfile, Task
from .config import ScenarioConfig
from .linkbudget import LinkCoefficient, RfParams, channel_coefficient
from .orbital import (
    EARTH_ROTATION_RAD_S,
    R_EARTH_KM,
    ConstellationGraph,
    GroundStationNode,
    LinkClass,
    SatelliteNode,
    build_graph,
    build_walker_star,
    load_ground_stations,
    orbital_period_s,
    sample_tasks,
)
from .routing import RoutePath, RoutePlan, greedy_deconflicted_routes

SECONDS_PER_DAY = 86_400.0


class Policy(str, Enum):
    SAT2C = "Sat2C"
    ALWAYS_CLOUD = "AlwaysCloud"
    ALWAYS_EDGE = "AlwaysEdge"
    MAX_POWER = "MaxPower"
    STORE_AND_FORWARD = "StoreAndForward"


ALL_POLICIES = tuple(Policy)


class Timeout(Exception):
    """No ground-station contact within the simulated horizon."""


@dataclass(frozen=True)
class TaskOutcome:
    index: int
    task: Task
    path: RoutePath | None
    report: EnergyReport
    profile: PowerProfile | None

    @property
    def delivered(self) -> bool:
        return math.isfinite(self.report.latency_s)


@dataclass(frozen=True)
class RunResult:
    """Per-task outcomes of one policy on one instance.

    Means are taken over feasible tasks. Store-and-forward has no deadline
    control, so its means cover every delivered task instead.
    """

    policy: Policy
    outcomes: tuple[TaskOutcome, ...]
    route_failures: int

    def counted(self) -> list[TaskOutcome]:
        if self.policy == Policy.STORE_AND_FORWARD:
            return [o for o in self.outcomes if o.delivered]
        return [o for o in self.outcomes if o.report.feasible]

    @property
    def energies(self) -> list[float]:
        return [o.report.e_bit_total for o in self.counted()]

    @property
    def latencies(self) -> list[float]:
        return [o.report.latency_s for o in self.counted()]

    @property
    def mean_energy_per_bit(self) -> float:
        e = self.energies
        return math.fsum(e) / len(e) if e else math.nan

    @property
    def mean_latency_s(self) -> float:
        t = self.latencies
        return math.fsum(t) / len(t) if t else math.nan

    @property
    def offload_percent(self) -> float:
        """Share of counted tasks computed in the cloud."""
        c = self.counted()
        if not c:
            return math.nan
        return 100.0 * sum(o.report.decision == alloc.Decision.CLOUD for o in c) / len(c)

    @property
    def infeasible(self) -> int:
        return sum(not o.report.feasible for o in self.outcomes)


# --- scenario plumbing ---------------------------------------------------------------

@lru_cache(maxsize=16)
def _cached_graph(planes: int, spp: int, altitude_km: float, phase_offset: float,
                  catalog: tuple, policy: str, mask: float) -> ConstellationGraph:
    sats = build_walker_star(planes, spp, altitude_km, phase_offset)
    return build_graph(sats, load_ground_stations(catalog), policy, mask)


def build_network(config: ScenarioConfig) -> ConstellationGraph:
    return _cached_graph(config.planes, config.sats_per_plane, config.altitude_km, config.phase_offset,
                         config.gs_catalog, config.isl_policy.value, config.elevation_mask_deg)


def path_coefficients(path: RoutePath, config: ScenarioConfig) -> list[LinkCoefficient]:
    """Channel coefficients of each hop, using the RF set of its link class."""
    return [channel_coefficient(h.distance_km,
                                config.rf_isl if h.link_class == LinkClass.ISL else config.rf_downlink)
            for h in path.hops]


def tasks_for_seed(graph: ConstellationGraph, config: ScenarioConfig, seed: int) -> list[Task]:
    t = config.task
    return sample_tasks(graph, config.task_count, t.data_bits, t.deadline_s, t.compression_ratio, seed)


# --- store-and-forward ---------------------------------------------------------------

def first_contact(satellite: SatelliteNode, ground_stations: Sequence[GroundStationNode],
                  elevation_mask_deg: float = 10.0, time_step_s: float = 1.0,
                  horizon_s: float = SECONDS_PER_DAY, chunk: int = 512) -> tuple[float, float]:
    """Earliest sampled time at which some ground station sees the satellite.

    The satellite moves along its circular polar orbit; ground stations turn
    with the Earth. Returns ``(elapsed_s, distance_km)`` to the closest visible
    station.

    Raises:
        Timeout: if no contact happens within ``horizon_s``.
    """
    if time_step_s <= 0:
        raise ValueError("time step must be positive")
    if not ground_stations:
        raise Timeout("empty ground-station list")
    radius = satellite.radius_km
    rate_deg_s = 360.0 / orbital_period_s(radius - R_EARTH_KM)
    raan = math.radians(satellite.raan_deg)
    lat = np.radians([g.latitude_deg for g in ground_stations])
    lon = np.radians([g.longitude_deg for g in ground_stations])
    gs_r = np.linalg.norm(np.array([g.position for g in ground_stations]), axis=1)
    sin_mask = math.sin(math.radians(elevation_mask_deg))

    n_steps = int(math.floor(horizon_s / time_step_s)) + 1
    for start in range(0, n_steps, chunk):
        t = np.arange(start, min(start + chunk, n_steps)) * time_step_s
        u = np.radians(satellite.anomaly_deg + rate_deg_s * t)
        sat = radius * np.stack([math.cos(raan) * np.cos(u), math.sin(raan) * np.cos(u), np.sin(u)], axis=1)
        glon = lon[None, :] + EARTH_ROTATION_RAD_S * t[:, None]
        coslat = np.cos(lat)[None, :]
        gs = gs_r[None, :, None] * np.stack(
            [coslat * np.cos(glon), coslat * np.sin(glon), np.broadcast_to(np.sin(lat)[None, :], glon.shape)],
            axis=2)
        d = sat[:, None, :] - gs
        dist = np.linalg.norm(d, axis=2)
        sin_el = np.einsum("tgk,tgk->tg", d, gs) / (dist * gs_r[None, :])
        visible = sin_el > sin_mask
        hits = np.flatnonzero(visible.any(axis=1))
        if hits.size:
            k = int(hits[0])
            return float(t[k]), float(np.min(np.where(visible[k], dist[k], np.inf)))
    raise Timeout(f"no contact within {horizon_s:.0f} s")


def store_and_forward_latency(satellite: SatelliteNode, bits: float,
                              ground_stations: Sequence[GroundStationNode], rf: RfParams,
                              elevation_mask_deg: float = 10.0, time_step_s: float = 1.0,
                              horizon_s: float = SECONDS_PER_DAY) -> float:
    """Wait for ground-station contact, then send ``bits`` directly at full power."""
    wait, distance = first_contact(satellite, ground_stations, elevation_mask_deg, time_step_s, horizon_s)
    link = channel_coefficient(distance, rf)
    return wait + alloc.time_from_power(bits, link.bandwidth_hz, rf.max_tx_power_w, link.h_squared) \
        + link.prop_delay_s


# --- policies ------------------------------------------------------------------------

def evaluate_task(policy: Policy, links: Sequence[LinkCoefficient], task: Task,
                  config: ScenarioConfig) -> tuple[EnergyReport, PowerProfile | None]:
    amp, cmp = config.amplifier, config.compute
    if policy == Policy.SAT2C:
        return alloc.sat2c_decide(links, task, amp, cmp)
    if policy == Policy.ALWAYS_CLOUD:
        return alloc.solve_branch(links, task, alloc.Decision.CLOUD, amp, cmp)
    if policy == Policy.ALWAYS_EDGE:
        return alloc.solve_branch(links, task, alloc.Decision.EDGE, amp, cmp)
    if policy == Policy.MAX_POWER:
        return alloc.pick_best([alloc.max_power_branch(links, task, d, amp, cmp)
                                for d in (alloc.Decision.CLOUD, alloc.Decision.EDGE)])
    raise ValueError(f"{policy} is not a routed policy")


def _store_and_forward_outcome(i: int, task: Task, graph: ConstellationGraph,
                               config: ScenarioConfig) -> TaskOutcome:
    # raw data goes down directly and is processed in the cloud
    rf = config.rf_downlink
    try:
        wait, distance = first_contact(graph.satellites[task.origin], graph.ground_stations,
                                       config.elevation_mask_deg, config.store_forward_step_s)
    except Timeout as exc:
        return TaskOutcome(i, task, None, alloc.infeasible_report(alloc.Decision.CLOUD, str(exc)), None)
    link = channel_coefficient(distance, rf)
    p = min(rf.max_tx_power_w, config.amplifier.p_out_max_w)
    t_tx = alloc.time_from_power(task.data_bits, link.bandwidth_hz, p, link.h_squared)
    e_rf = (config.amplifier.p_fix_w + config.amplifier.mu * p) * t_tx
    latency = wait + t_tx + link.prop_delay_s + alloc.processing_delay(task, config.compute, alloc.Decision.CLOUD)
    violations = () if latency <= task.deadline_s else (f"latency {latency:.6g} s exceeds deadline",)
    report = EnergyReport(e_rf_j=e_rf, e_proc_j=0.0, e_bit_total=e_rf / task.data_bits, latency_s=latency,
                          feasible=not violations, decision=alloc.Decision.CLOUD, violations=violations)
    return TaskOutcome(i, task, None, report, None)


def run_policy(graph: ConstellationGraph, tasks: Sequence[Task], policy: Policy | str,
               config: ScenarioConfig, plan: RoutePlan | None = None) -> RunResult:
    """Evaluate one policy on one instance; routes are shared by all routed policies."""
    policy = Policy(policy)
    if policy == Policy.STORE_AND_FORWARD:
        outcomes = tuple(_store_and_forward_outcome(i, t, graph, config) for i, t in enumerate(tasks))
        return RunResult(policy, outcomes, route_failures=0)
    if plan is None:
        plan = greedy_deconflicted_routes(graph, tasks)
    outcomes = []
    for i, task in enumerate(tasks):
        path = plan.paths.get(i)
        if path is None:
            outcomes.append(TaskOutcome(i, task, None, alloc.infeasible_report(None, "unroutable"), None))
            continue
        report, profile = evaluate_task(policy, path_coefficients(path, config), task, config)
        outcomes.append(TaskOutcome(i, task, path, report, profile))
    return RunResult(policy, tuple(outcomes), route_failures=len(plan.unrouted))


# --- Monte Carlo ---------------------------------------------------------------------

@dataclass(frozen=True)
class PolicyStats:
    policy: Policy
    mean_energy_per_bit: float
    std_energy_per_bit: float
    mean_latency_s: float
    std_latency_s: float
    offload_percent: float
    tasks_counted: int
    infeasible: int
    route_failures: int


def _mean_std(values: Sequence[float]) -> tuple[float, float]:
    if not values:
        return math.nan, math.nan
    mean = math.fsum(values) / len(values)
    return mean, (statistics.pstdev(values) if len(values) > 1 else 0.0)


def aggregate(results: Sequence[RunResult]) -> PolicyStats:
    """Pool the counted tasks of several runs of one policy."""
    policy = results[0].policy
    counted = [o for r in results for o in r.counted()]
    e_mean, e_std = _mean_std([o.report.e_bit_total for o in counted])
    t_mean, t_std = _mean_std([o.report.latency_s for o in counted])
    offload = (100.0 * sum(o.report.decision == alloc.Decision.CLOUD for o in counted) / len(counted)
               if counted else math.nan)
    return PolicyStats(policy, e_mean, e_std, t_mean, t_std, offload, len(counted),
                       sum(r.infeasible for r in results), sum(r.route_failures for r in results))


@dataclass(frozen=True)
class MonteCarloResult:
    base_seed: int
    runs: tuple[dict[Policy, RunResult], ...]
    stats: dict[Policy, PolicyStats] = field(default_factory=dict)

    def per_policy(self, policy: Policy) -> list[RunResult]:
        return [r[policy] for r in self.runs]


def monte_carlo(config: ScenarioConfig, runs: int, base_seed: int,
                policies: Iterable[Policy | str] = ALL_POLICIES) -> MonteCarloResult:
    """Run ``runs`` independent instances; run ``r`` samples tasks with ``base_seed + r``."""
    if runs < 1:
        raise ValueError("runs must be >= 1")
    policies = [Policy(p) for p in policies]
    graph = build_network(config)
    per_run = []
    for r in range(runs):
        tasks = tasks_for_seed(graph, config, base_seed + r)
        plan = greedy_deconflicted_routes(graph, tasks)
        per_run.append({p: run_policy(graph, tasks, p, config, plan) for p in policies})
    stats = {p: aggregate([run[p] for run in per_run]) for p in policies}
    return MonteCarloResult(base_seed=base_seed, runs=tuple(per_run), stats=stats)


def savings_vs_fixed(mc: MonteCarloResult) -> dict[str, float]:
    """Relative energy savings of Sat2C against the better fixed-decision policy.

    ``mean`` compares pooled means; ``max_instance`` is the largest per-run
    saving.
    """
    def best_fixed(cloud: float, edge: float) -> float:
        return min(cloud, edge)

    s = mc.stats
    pooled = best_fixed(s[Policy.ALWAYS_CLOUD].mean_energy_per_bit, s[Policy.ALWAYS_EDGE].mean_energy_per_bit)
    mean = 1.0 - s[Policy.SAT2C].mean_energy_per_bit / pooled
    per_run = []
    for run in mc.runs:
        ref = best_fixed(run[Policy.ALWAYS_CLOUD].mean_energy_per_bit, run[Policy.ALWAYS_EDGE].mean_energy_per_bit)
        per_run.append(1.0 - run[Policy.SAT2C].mean_energy_per_bit / ref)
    out = {"mean": mean, "max_instance": max(per_run)}
    if Policy.MAX_POWER in s:
        out["mean_vs_max_power"] = 1.0 - s[Policy.SAT2C].mean_energy_per_bit / s[Policy.MAX_POWER].mean_energy_per_bit
    return out


SWEEP_PARAMETERS = ("fCpu", "rho")


@dataclass(frozen=True)
class SweepRow:
    value: float
    mean_energy: dict[Policy, float]
    offload_percent: float


def sweep(config: ScenarioConfig, parameter: str, grid: Sequence[float], runs: int, base_seed: int,
          policies: Iterable[Policy | str] = (Policy.SAT2C, Policy.ALWAYS_CLOUD, Policy.ALWAYS_EDGE,
                                              Policy.MAX_POWER)) -> list[SweepRow]:
    """Repeat :func:`monte_carlo` for each grid value of ``fCpu`` (Hz) or ``rho``."""
    if parameter not in SWEEP_PARAMETERS:
        raise ValueError(f"parameter must be one of {SWEEP_PARAMETERS}")
    if not grid:
        raise ValueError("empty grid")
    policies = [Policy(p) for p in policies]
    rows = []
    for value in grid:
        cfg = (config.with_compute(f_cpu_hz=float(value)) if parameter == "fCpu"
               else config.with_task(compression_ratio=float(value)))
        mc = monte_carlo(cfg, runs, base_seed, policies)
        offload = mc.stats[Policy.SAT2C].offload_percent if Policy.SAT2C in mc.stats else math.nan
        rows.append(SweepRow(float(value), {p: mc.stats[p].mean_energy_per_bit for p in policies}, offload))
    return rows
