"""Energy model, per-path power allocation and the edge-vs-cloud decision.

A task routed over a fixed path of hops spends

* RF energy ``sum_i (P_fix + mu p_i) L / R_i`` across the hops, where ``L`` is
  the transmitted payload (raw or compressed) and ``R_i = B log2(1 + p_i h_i^2)``,
* processing energy ``D z f^2 nu`` on the origin satellite when it computes
  locally.

For a fixed path and decision the power allocation is a sum-of-ratios program
coupled only through the latency budget. Each ratio
``(P_fix + lambda + mu p) / log2(1 + p h^2)`` is minimized with Dinkelbach's
iteration; the shared multiplier ``lambda`` on the latency budget is found by
bisection. ``lambda = 0`` whenever the budget does not bind.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Sequence

from .linkbudget import LinkCoefficient

LN2 = math.log(2.0)
MAX_EXPONENT = 60.0  # cap on L / (B T) in power_from_time
TIME_TOL_S = 1e-12
MAX_BISECTIONS = 200
FEASIBILITY_SLACK_S = 1e-9


class Decision(IntEnum):
    CLOUD = 0
    EDGE = 1


class Infeasible(Exception):
    """No power allocation meets the latency and power constraints."""


@dataclass(frozen=True)
class Task:
    origin: int
    data_bits: float
    deadline_s: float
    compression_ratio: float

    def __post_init__(self) -> None:
        if self.data_bits <= 0:
            raise ValueError("data_bits must be positive")
        if self.deadline_s <= 0:
            raise ValueError("deadline_s must be positive")
        if self.compression_ratio < 1:
            raise ValueError("compression_ratio must be >= 1")

    @property
    def result_bits(self) -> float:
        return self.data_bits / self.compression_ratio


@dataclass(frozen=True)
class ComputeParams:
    f_cpu_hz: float
    cloud_speedup: float
    cycles_per_bit: float
    effective_capacitance: float

    def __post_init__(self) -> None:
        if self.f_cpu_hz <= 0 or self.cycles_per_bit <= 0:
            raise ValueError("f_cpu_hz and cycles_per_bit must be positive")
        if not self.cloud_speedup > 1:
            raise ValueError("cloud_speedup must exceed 1")
        if self.effective_capacitance < 0:
            raise ValueError("effective_capacitance must be non-negative")

    @property
    def processing_power_w(self) -> float:
        """Power drawn by the CPU while computing, ``nu f^3``."""
        return self.effective_capacitance * self.f_cpu_hz ** 3


@dataclass(frozen=True)
class AmplifierParams:
    p_fix_w: float
    load_coefficient: float
    drain_efficiency: float
    p_out_max_w: float
    payload_budget_w: float = math.inf

    def __post_init__(self) -> None:
        if not 0 < self.drain_efficiency <= 1:
            raise ValueError("drain_efficiency must lie in (0, 1]")
        if self.p_out_max_w <= 0:
            raise ValueError("p_out_max_w must be positive")
        if self.p_fix_w < 0 or self.load_coefficient < 0:
            raise ValueError("p_fix_w and load_coefficient must be non-negative")

    @property
    def mu(self) -> float:
        return 1.0 + self.load_coefficient / self.drain_efficiency


@dataclass(frozen=True)
class LinkAllocation:
    power_w: float
    comm_time_s: float
    rate_bps: float


@dataclass(frozen=True)
class PowerProfile:
    per_link: tuple[LinkAllocation, ...]
    decision: Decision
    payload_bits: float

    @property
    def powers(self) -> list[float]:
        return [a.power_w for a in self.per_link]

    @property
    def comm_times(self) -> list[float]:
        return [a.comm_time_s for a in self.per_link]


@dataclass(frozen=True)
class EnergyReport:
    e_rf_j: float
    e_proc_j: float
    e_bit_total: float  # J/bit, normalized by the raw data size
    latency_s: float
    feasible: bool
    decision: Decision | None
    violations: tuple[str, ...] = field(default=())


def infeasible_report(decision: Decision | None = None, reason: str = "infeasible") -> EnergyReport:
    return EnergyReport(math.inf, math.inf, math.inf, math.inf, False, decision, (reason,))


# --- task-level formulas -------------------------------------------------------------

def payload_bits(task: Task, decision: int) -> float:
    """Bits actually transmitted: compressed result at the edge, raw data otherwise."""
    if decision not in (0, 1):
        raise ValueError("decision must be 0 or 1")
    return task.data_bits * (decision / task.compression_ratio + (1 - decision))


def processing_energy(task: Task, compute: ComputeParams, decision: int) -> float:
    return decision * task.data_bits * compute.cycles_per_bit * compute.f_cpu_hz ** 2 * compute.effective_capacitance


def processing_delay(task: Task, compute: ComputeParams, decision: int) -> float:
    """Processing time on the satellite (edge) or at the ground station (cloud)."""
    edge = task.data_bits * compute.cycles_per_bit / compute.f_cpu_hz
    return edge if decision == Decision.EDGE else edge / compute.cloud_speedup


# --- single-link relations -----------------------------------------------------------

def power_from_time(bits: float, bandwidth_hz: float, comm_time_s: float, h_squared: float) -> float:
    """Transmit power needed to push ``bits`` through a hop in ``comm_time_s``."""
    if comm_time_s <= 0:
        raise ValueError("communication time must be positive")
    exponent = bits / (bandwidth_hz * comm_time_s)
    if exponent > MAX_EXPONENT:
        return math.inf
    return math.expm1(exponent * LN2) / h_squared


def time_from_power(bits: float, bandwidth_hz: float, power_w: float, h_squared: float) -> float:
    spectral = math.log1p(power_w * h_squared) / LN2
    return math.inf if spectral == 0 else bits / (bandwidth_hz * spectral)


def link_energy(comm_time_s: float, bits: float, link: LinkCoefficient, amplifier: AmplifierParams) -> float:
    """RF energy of one hop as a function of its communication time.

    Convex in ``comm_time_s``; decreasing when ``P_fix = 0``, with a single
    interior minimum otherwise.
    """
    p = power_from_time(bits, link.bandwidth_hz, comm_time_s, link.h_squared)
    return (amplifier.p_fix_w + amplifier.mu * p) * comm_time_s


def dinkelbach_power(fixed_w: float, mu: float, h_squared: float, p_cap: float,
                     tol: float = 1e-15, max_iter: int = 100) -> float:
    """Power minimizing ``(fixed_w + mu p) / log2(1 + p h^2)`` on ``(0, p_cap]``.

    Dinkelbach's parametric subproblem ``min N(p) - q D(p)`` has the closed form
    ``p = q / (mu ln 2) - 1 / h^2`` clipped to the box.
    """
    if fixed_w <= 0:
        return 0.0
    p = p_cap
    q = (fixed_w + mu * p) / (math.log1p(p * h_squared) / LN2)
    for _ in range(max_iter):
        p = min(p_cap, max(0.0, q / (mu * LN2) - 1.0 / h_squared))
        if p == 0.0:
            return 0.0
        q_next = (fixed_w + mu * p) / (math.log1p(p * h_squared) / LN2)
        if abs(q - q_next) <= tol * q:
            return p
        q = q_next
    return p


# --- path-level solver ---------------------------------------------------------------

def link_power_caps(n_links: int, amplifier: AmplifierParams, processing_power_w: float = 0.0,
                    g_flags: Sequence[int] | None = None) -> list[float]:
    """Per-hop power ceilings from the amplifier limit and the payload budget.

    ``g_flags`` marks hops whose transmitter also runs the processor (the
    origin, by default).
    """
    if g_flags is None:
        g_flags = [1] + [0] * (n_links - 1)
    return [min(amplifier.p_out_max_w, amplifier.payload_budget_w - g * processing_power_w)
            for g in g_flags]


def _times_for_multiplier(lam: float, bits: float, links: Sequence[LinkCoefficient],
                          amplifier: AmplifierParams, caps: Sequence[float]) -> list[float]:
    times = []
    for link, cap in zip(links, caps):
        p = dinkelbach_power(amplifier.p_fix_w + lam, amplifier.mu, link.h_squared, cap)
        times.append(time_from_power(bits, link.bandwidth_hz, p, link.h_squared))
    return times


def _bisect_multiplier(bits: float, time_budget_s: float, links: Sequence[LinkCoefficient],
                       amplifier: AmplifierParams, caps: Sequence[float],
                       fastest: list[float]) -> list[float]:
    # sum of times is non-increasing in the multiplier; keep the feasible side
    lo, hi = 0.0, max(amplifier.p_fix_w, 1.0)
    hi_times = _times_for_multiplier(hi, bits, links, amplifier, caps)
    while sum(hi_times) > time_budget_s:
        lo, hi = hi, 2.0 * hi
        if hi > 1e300:
            return fastest
        hi_times = _times_for_multiplier(hi, bits, links, amplifier, caps)
    lo_sum = math.inf
    for _ in range(MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        mid_times = _times_for_multiplier(mid, bits, links, amplifier, caps)
        if sum(mid_times) > time_budget_s:
            lo, lo_sum = mid, sum(mid_times)
        else:
            hi, hi_times = mid, mid_times
        if lo_sum - sum(hi_times) <= TIME_TOL_S or hi - lo <= 1e-16 * hi:
            break
    return hi_times


def solve_power_allocation(links: Sequence[LinkCoefficient], bits: float, time_budget_s: float,
                           amplifier: AmplifierParams, *, decision: int = Decision.CLOUD,
                           processing_power_w: float = 0.0,
                           g_flags: Sequence[int] | None = None) -> PowerProfile:
    """Minimum-energy transmit powers for a fixed path.

    Minimizes ``sum_i (P_fix + mu p_i) bits / R_i`` subject to
    ``sum_i bits / R_i <= time_budget_s`` and per-hop power caps.

    Raises:
        Infeasible: if the budget is non-positive or cannot be met even at the
            power caps.
    """
    if not links:
        raise ValueError("path must contain at least one link")
    if time_budget_s <= 0:
        raise Infeasible(f"no time left for communication (budget {time_budget_s:.6g} s)")
    caps = link_power_caps(len(links), amplifier, processing_power_w, g_flags)
    if min(caps) <= 0:
        raise Infeasible("payload power budget exhausted by processing")

    fastest = [time_from_power(bits, l.bandwidth_hz, c, l.h_squared) for l, c in zip(links, caps)]
    if sum(fastest) > time_budget_s:
        raise Infeasible(f"{sum(fastest):.6g} s needed at full power exceeds budget {time_budget_s:.6g} s")

    times = _times_for_multiplier(0.0, bits, links, amplifier, caps)
    if sum(times) > time_budget_s:
        times = _bisect_multiplier(bits, time_budget_s, links, amplifier, caps, fastest)

    per_link = []
    for link, t in zip(links, times):
        p = power_from_time(bits, link.bandwidth_hz, t, link.h_squared)
        per_link.append(LinkAllocation(power_w=p, comm_time_s=t,
                                       rate_bps=bits / t))
    return PowerProfile(per_link=tuple(per_link), decision=Decision(decision), payload_bits=bits)


def max_power_profile(links: Sequence[LinkCoefficient], bits: float, amplifier: AmplifierParams, *,
                      decision: int = Decision.CLOUD, processing_power_w: float = 0.0,
                      g_flags: Sequence[int] | None = None) -> PowerProfile:
    """Every hop transmits at its power ceiling."""
    caps = link_power_caps(len(links), amplifier, processing_power_w, g_flags)
    per_link = []
    for link, cap in zip(links, caps):
        p = max(cap, 0.0)
        t = time_from_power(bits, link.bandwidth_hz, p, link.h_squared)
        per_link.append(LinkAllocation(power_w=p, comm_time_s=t, rate_bps=bits / t))
    return PowerProfile(per_link=tuple(per_link), decision=Decision(decision), payload_bits=bits)


# --- evaluation ----------------------------------------------------------------------

def rf_energy_power_domain(links: Sequence[LinkCoefficient], profile: PowerProfile,
                           amplifier: AmplifierParams) -> float:
    total = 0.0
    for link, alloc in zip(links, profile.per_link):
        rate = link.bandwidth_hz * math.log1p(alloc.power_w * link.h_squared) / LN2
        if rate == 0:
            return math.inf if amplifier.p_fix_w > 0 or alloc.power_w > 0 else 0.0
        total += (amplifier.p_fix_w + amplifier.mu * alloc.power_w) * profile.payload_bits / rate
    return total


def rf_energy_time_domain(links: Sequence[LinkCoefficient], comm_times: Sequence[float], bits: float,
                          amplifier: AmplifierParams) -> float:
    return sum(link_energy(t, bits, link, amplifier) for link, t in zip(links, comm_times))


def path_energy_per_bit(links: Sequence[LinkCoefficient], profile: PowerProfile, task: Task,
                        amplifier: AmplifierParams, compute: ComputeParams,
                        g_flags: Sequence[int] | None = None) -> EnergyReport:
    """Energy per raw bit, end-to-end latency and constraint check of a profile."""
    decision = int(profile.decision)
    e_rf = rf_energy_power_domain(links, profile, amplifier)
    e_proc = processing_energy(task, compute, decision)
    comm = 0.0
    for link, alloc in zip(links, profile.per_link):
        comm += time_from_power(profile.payload_bits, link.bandwidth_hz, alloc.power_w, link.h_squared)
    latency = comm + sum(l.prop_delay_s for l in links) + processing_delay(task, compute, decision)

    violations = []
    if not latency <= task.deadline_s + FEASIBILITY_SLACK_S:
        violations.append(f"latency {latency:.6g} s exceeds deadline {task.deadline_s:.6g} s")
    caps = link_power_caps(len(links), amplifier, decision * compute.processing_power_w, g_flags)
    for i, (alloc, cap) in enumerate(zip(profile.per_link, caps)):
        if alloc.power_w < 0 or alloc.power_w > cap * (1 + 1e-12):
            violations.append(f"hop {i}: power {alloc.power_w:.6g} W outside [0, {cap:.6g}]")
    return EnergyReport(e_rf_j=e_rf, e_proc_j=e_proc, e_bit_total=(e_rf + e_proc) / task.data_bits,
                        latency_s=latency, feasible=not violations, decision=Decision(decision),
                        violations=tuple(violations))


def communication_budget(links: Sequence[LinkCoefficient], task: Task, compute: ComputeParams,
                         decision: int) -> float:
    """Deadline minus propagation and processing delays."""
    return task.deadline_s - sum(l.prop_delay_s for l in links) - processing_delay(task, compute, decision)


def solve_branch(links: Sequence[LinkCoefficient], task: Task, decision: int, amplifier: AmplifierParams,
                 compute: ComputeParams) -> tuple[EnergyReport, PowerProfile | None]:
    """Optimal powers and resulting report for a fixed computing decision."""
    bits = payload_bits(task, decision)
    try:
        profile = solve_power_allocation(
            links, bits, communication_budget(links, task, compute, decision), amplifier,
            decision=decision, processing_power_w=decision * compute.processing_power_w)
    except Infeasible as exc:
        return infeasible_report(Decision(decision), str(exc)), None
    return path_energy_per_bit(links, profile, task, amplifier, compute), profile


def max_power_branch(links: Sequence[LinkCoefficient], task: Task, decision: int, amplifier: AmplifierParams,
                     compute: ComputeParams) -> tuple[EnergyReport, PowerProfile | None]:
    bits = payload_bits(task, decision)
    caps = link_power_caps(len(links), amplifier, decision * compute.processing_power_w)
    if min(caps) <= 0:
        return infeasible_report(Decision(decision), "payload power budget exhausted by processing"), None
    profile = max_power_profile(links, bits, amplifier, decision=decision,
                                processing_power_w=decision * compute.processing_power_w)
    return path_energy_per_bit(links, profile, task, amplifier, compute), profile


def pick_best(branches: Sequence[tuple[EnergyReport, PowerProfile | None]]
              ) -> tuple[EnergyReport, PowerProfile | None]:
    """Lowest energy per bit among feasible branches; the earlier branch wins ties."""
    best = None
    for report, profile in branches:
        if report.feasible and (best is None or report.e_bit_total < best[0].e_bit_total):
            best = (report, profile)
    if best is None:
        return infeasible_report(None, "no feasible computing decision"), None
    return best


def sat2c_decide(links: Sequence[LinkCoefficient], task: Task, amplifier: AmplifierParams,
                 compute: ComputeParams) -> tuple[EnergyReport, PowerProfile | None]:
    """Solve both computing decisions on the path and keep the cheaper feasible one."""
    return pick_best([solve_branch(links, task, d, amplifier, compute) for d in (Decision.CLOUD, Decision.EDGE)])
