"""Command-line front end: ``sat2c {run,montecarlo,sweep,validate}``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

from . import __version__
from . import allocator as alloc
from .config import ConfigError, ScenarioConfig, load_scenario
from .orbital import R_EARTH_KM, elevation_deg, has_line_of_sight
from .policies import (
    ALL_POLICIES,
    SWEEP_PARAMETERS,
    MonteCarloResult,
    Policy,
    RunResult,
    build_network,
    monte_carlo,
    savings_vs_fixed,
    sweep,
    tasks_for_seed,
)
from .routing import greedy_deconflicted_routes, validate_plan


EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_IO = 4


def fmt(value) -> str:
    """CSV cell text; non-finite numbers become empty cells."""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return repr(value) if math.isfinite(value) else ""
    if value is None:
        return ""
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


def write_manifest(out: Path, command: str, scenario: ScenarioConfig, seed: int, **extra) -> None:
    manifest = {
        "command": command,
        "scenario": scenario.source,
        "seed": seed,
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "output_dir": str(out),
        **extra,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")


def parse_policies(text: str | None) -> list[Policy]:
    if not text or text == "all":
        return list(ALL_POLICIES)
    try:
        return [Policy(p.strip()) for p in text.split(",") if p.strip()]
    except ValueError:
        raise ConfigError("--policies", f"unknown policy in {text!r}; choose from "
                          + ", ".join(p.value for p in Policy)) from None


def parse_grid(text: str) -> list[float]:
    """``start:stop:count`` (inclusive, evenly spaced) or a comma-separated list."""
    try:
        if ":" in text:
            start, stop, count = text.split(":")
            n = int(count)
            if n < 1:
                raise ValueError
            if n == 1:
                return [float(start)]
            a, b = float(start), float(stop)
            return [a + (b - a) * i / (n - 1) for i in range(n)]
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError("--grid", f"cannot parse {text!r}") from None
    if not values:
        raise ConfigError("--grid", "empty grid")
    return values


TASK_HEADER = ["task", "origin", "path", "decision", "powers_w", "comm_times_s",
               "e_rf_j", "e_proc_j", "e_bit_j_per_bit", "latency_s", "feasible"]

SUMMARY_HEADER = ["policy", "mean_energy_per_bit", "std_energy_per_bit", "mean_latency_s", "std_latency_s",
                  "offload_percent", "tasks_counted", "infeasible", "route_failures"]


def task_rows(result: RunResult) -> list[list]:
    rows = []
    for o in result.outcomes:
        r = o.report
        path = " ".join(str(v) for v in o.path.vertices) if o.path else ""
        powers = " ".join(repr(p) for p in o.profile.powers) if o.profile else ""
        times = " ".join(repr(t) for t in o.profile.comm_times) if o.profile else ""
        decision = int(r.decision) if r.decision is not None else None
        rows.append([o.index, o.task.origin, path, decision, powers, times,
                     r.e_rf_j, r.e_proc_j, r.e_bit_total, r.latency_s, r.feasible])
    return rows


def summary_rows(mc: MonteCarloResult) -> list[list]:
    return [[s.policy.value, s.mean_energy_per_bit, s.std_energy_per_bit, s.mean_latency_s, s.std_latency_s,
             s.offload_percent, s.tasks_counted, s.infeasible, s.route_failures] for s in mc.stats.values()]


def _prepare_out(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_run(args: argparse.Namespace) -> int:
    config = load_scenario(args.scenario)
    policies = parse_policies(args.policies)
    seed = config.seed if args.seed is None else args.seed
    out = _prepare_out(args.out)
    mc = monte_carlo(config, 1, seed, policies)
    run = mc.runs[0]
    for policy, result in run.items():
        write_csv(out / f"tasks_{policy.value}.csv", TASK_HEADER, task_rows(result))
    write_csv(out / "summary.csv", SUMMARY_HEADER, summary_rows(mc))
    write_manifest(out, "run", config, seed, policies=[p.value for p in policies])
    for s in mc.stats.values():
        print(f"{s.policy.value:16s} E_b={s.mean_energy_per_bit:.4e} J/bit  T={s.mean_latency_s:.4g} s  "
              f"cloud={s.offload_percent:.1f}%  infeasible={s.infeasible}")
    if all(s.tasks_counted == 0 for s in mc.stats.values()):
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_montecarlo(args: argparse.Namespace) -> int:
    config = load_scenario(args.scenario)
    policies = parse_policies(args.policies)
    seed = config.seed if args.seed is None else args.seed
    runs = config.runs if args.runs is None else args.runs
    if runs < 1:
        raise ConfigError("--runs", "must be >= 1")
    out = _prepare_out(args.out)
    mc = monte_carlo(config, runs, seed, policies)
    rows = []
    for r, run in enumerate(mc.runs):
        for policy, result in run.items():
            rows.append([r, seed + r, policy.value, result.mean_energy_per_bit, result.mean_latency_s,
                         result.offload_percent, len(result.counted()), result.infeasible, result.route_failures])
    write_csv(out / "montecarlo_runs.csv",
              ["run", "seed", "policy", "mean_energy_per_bit", "mean_latency_s", "offload_percent",
               "tasks_counted", "infeasible", "route_failures"], rows)
    write_csv(out / "montecarlo_summary.csv", SUMMARY_HEADER, summary_rows(mc))
    write_manifest(out, "montecarlo", config, seed, runs=runs, policies=[p.value for p in policies])
    for s in mc.stats.values():
        print(f"{s.policy.value:16s} E_b={s.mean_energy_per_bit:.4e} J/bit  T={s.mean_latency_s:.4g} s  "
              f"cloud={s.offload_percent:.1f}%")
    if {Policy.SAT2C, Policy.ALWAYS_CLOUD, Policy.ALWAYS_EDGE} <= set(policies):
        sv = savings_vs_fixed(mc)
        print("Sat2C savings: " + ", ".join(f"{k}={100 * v:.2f}%" for k, v in sv.items()))
    if all(s.tasks_counted == 0 for s in mc.stats.values()):
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    config = load_scenario(args.scenario)
    if args.param not in SWEEP_PARAMETERS:
        raise ConfigError("--param", f"must be one of {', '.join(SWEEP_PARAMETERS)}")
    if args.grid is None:
        raise ConfigError("--grid", "required")
    grid = parse_grid(args.grid)
    seed = config.seed if args.seed is None else args.seed
    runs = config.runs if args.runs is None else args.runs
    if runs < 1:
        raise ConfigError("--runs", "must be >= 1")
    policies = [p for p in parse_policies(args.policies) if p != Policy.STORE_AND_FORWARD]
    out = _prepare_out(args.out)
    rows = sweep(config, args.param, grid, runs, seed, policies)
    header = [args.param] + [f"{p.value}_mean_energy_per_bit" for p in policies] + ["sat2c_offload_percent"]
    write_csv(out / f"sweep_{args.param}.csv", header,
              [[r.value] + [r.mean_energy[p] for p in policies] + [r.offload_percent] for r in rows])
    write_manifest(out, "sweep", config, seed, runs=runs, param=args.param, grid=grid)
    for r in rows:
        print(f"{args.param}={r.value:g}  " + "  ".join(f"{p.value}={r.mean_energy[p]:.4e}" for p in policies)
              + f"  cloud={r.offload_percent:.1f}%")
    return EXIT_OK


def derived_values(config: ScenarioConfig) -> dict[str, float]:
    """Link-budget and CPU quantities implied by the scenario parameters."""
    isl, dl = config.rf_isl, config.rf_downlink
    probe = alloc.Task(0, config.task.data_bits, config.task.deadline_s, config.task.compression_ratio)
    return {
        "downlink_tx_gain_db": dl.tx_gain_db,
        "downlink_rx_gain_db": dl.rx_gain_db,
        "isl_tx_gain_db": isl.tx_gain_db,
        "isl_rx_gain_db": isl.rx_gain_db,
        "downlink_noise_dbw": dl.noise_power_dbw,
        "isl_noise_dbw": isl.noise_power_dbw,
        "mu": config.amplifier.mu,
        "processing_power_w": config.compute.processing_power_w,
        "edge_processing_delay_s": alloc.processing_delay(probe, config.compute, alloc.Decision.EDGE),
        "cloud_processing_delay_s": alloc.processing_delay(probe, config.compute, alloc.Decision.CLOUD),
        "edge_processing_energy_j": alloc.processing_energy(probe, config.compute, alloc.Decision.EDGE),
    }


def graph_invariant_failures(config: ScenarioConfig) -> list[str]:
    graph = build_network(config)
    failures = []
    r_sat = R_EARTH_KM + config.altitude_km
    for s in graph.satellites:
        if abs(s.radius_km - r_sat) > 1e-6 * r_sat:
            failures.append(f"satellite {s.id} radius {s.radius_km} != {r_sat}")
    for g in graph.ground_stations:
        if abs(math.hypot(*g.position) - R_EARTH_KM) > 1e-6 * R_EARTH_KM:
            failures.append(f"ground station {g.name} off the Earth's surface")
    for e in graph.edges:
        pu, pv = graph.position(e.u), graph.position(e.v)
        if e.link_class == "ISL" and not has_line_of_sight(pu, pv):
            failures.append(f"ISL {e.u}-{e.v} blocked by the Earth")
        if e.link_class == "Downlink":
            gs, sat = (pv, pu) if graph.is_satellite(e.u) else (pu, pv)
            if not elevation_deg(gs, sat) > config.elevation_mask_deg:
                failures.append(f"downlink {e.u}-{e.v} below elevation mask")
    tasks = tasks_for_seed(graph, config, config.seed)
    plan = greedy_deconflicted_routes(graph, tasks)
    failures.extend(validate_plan(plan, graph, tasks))
    return failures


def cmd_validate(args: argparse.Namespace) -> int:
    config = load_scenario(args.scenario)
    values = derived_values(config)
    print(f"scenario: {config.source}")
    print(f"  antenna gain downlink Tx/Rx : {values['downlink_tx_gain_db']:.2f} / {values['downlink_rx_gain_db']:.2f} dB")
    print(f"  antenna gain ISL Tx/Rx      : {values['isl_tx_gain_db']:.2f} / {values['isl_rx_gain_db']:.2f} dB")
    print(f"  noise power downlink / ISL  : {values['downlink_noise_dbw']:.2f} / {values['isl_noise_dbw']:.2f} dBW")
    print(f"  mu = 1 + c0/eta             : {values['mu']:.4f}")
    print(f"  CPU power nu f^3            : {values['processing_power_w']:.6g} W")
    print(f"  processing delay edge/cloud : {values['edge_processing_delay_s']:.4g} / "
          f"{values['cloud_processing_delay_s']:.4g} s")
    print(f"  processing energy (edge)    : {values['edge_processing_energy_j']:.4g} J")
    failures = graph_invariant_failures(config)
    graph = build_network(config)
    print(f"  graph: {graph.n_satellites} satellites, {len(graph.ground_stations)} ground stations, "
          f"{len(graph.edges)} edges")
    for f in failures:
        print(f"FAIL {f}")
    print("all invariants hold" if not failures else f"{len(failures)} invariant(s) failed")
    return EXIT_OK if not failures else EXIT_CONFIG


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sat2c", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, out: bool = True) -> None:
        p.add_argument("--scenario", default=None, help="scenario YAML (default: bundled scenario)")
        if out:
            p.add_argument("--seed", type=int, default=None, help="base seed (default: scenario seed)")
            p.add_argument("--policies", default="all", help="comma-separated policy names or 'all'")
            p.add_argument("--out", default="out", help="output directory")

    p = sub.add_parser("run", help="one instance, all policies, per-task CSVs")
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("montecarlo", help="repeated instances with consecutive seeds")
    common(p)
    p.add_argument("--runs", type=int, default=None)
    p.set_defaults(func=cmd_montecarlo)

    p = sub.add_parser("sweep", help="Monte Carlo over a grid of fCpu (Hz) or rho")
    common(p)
    p.add_argument("--runs", type=int, default=None)
    p.add_argument("--param", required=True, choices=SWEEP_PARAMETERS)
    p.add_argument("--grid", required=True, help="start:stop:count or v1,v2,...")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate", help="check invariants and print derived link/CPU values")
    common(p, out=False)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
