"""Scenario configuration: YAML loading and validation."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import yaml

from .allocator import AmplifierParams, ComputeParams
from .linkbudget import RfParams
from .orbital import IslPolicy, MalformedCatalog, load_ground_stations, read_catalog


class ConfigError(ValueError):
    """Invalid scenario; ``key`` is the dotted path of the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class TaskParams:
    data_bits: float = 1.2e6
    deadline_s: float = 10.0
    compression_ratio: float = 4.0


@dataclass(frozen=True)
class ScenarioConfig:
    planes: int
    sats_per_plane: int
    altitude_km: float
    gs_catalog: tuple[tuple[str, float, float], ...]
    elevation_mask_deg: float
    isl_policy: IslPolicy
    seed: int
    task_count: int
    rf_isl: RfParams
    rf_downlink: RfParams
    amplifier: AmplifierParams
    compute: ComputeParams
    task: TaskParams
    phase_offset: float = 0.5
    runs: int = 100
    store_forward_step_s: float = 1.0
    source: str = field(default="", compare=False)

    def with_compute(self, **changes: Any) -> "ScenarioConfig":
        return dataclasses.replace(self, compute=dataclasses.replace(self.compute, **changes))

    def with_task(self, **changes: Any) -> "ScenarioConfig":
        return dataclasses.replace(self, task=dataclasses.replace(self.task, **changes))


def default_scenario_path() -> Path:
    return Path(str(resources.files("sat2c") / "data" / "default_scenario.yaml"))


def _section(raw: dict, key: str) -> dict:
    value = raw.get(key)
    if not isinstance(value, dict):
        raise ConfigError(key, "missing section")
    return value


def _number(section: dict, prefix: str, key: str, default: Any = None, cast=float) -> Any:
    dotted = f"{prefix}.{key}"
    if key not in section:
        if default is None:
            raise ConfigError(dotted, "missing")
        return default
    value = section[key]
    try:
        if cast is int:
            if isinstance(value, bool) or float(value) != int(value):
                raise ValueError
            return int(value)
        if isinstance(value, str) and value.strip().lower() in (".inf", "inf", "+.inf"):
            return math.inf
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(dotted, f"not a valid {cast.__name__}: {value!r}") from None


def _rf(section: dict, prefix: str) -> RfParams:
    names = [f.name for f in dataclasses.fields(RfParams)]
    values = {n: _number(section, prefix, n, default=0.0 if n == "extra_loss_db" else None) for n in names}
    try:
        return RfParams(**values)
    except ValueError as exc:
        name = str(exc).split()[0]
        raise ConfigError(f"{prefix}.{name}", str(exc)) from None


def _check(condition: bool, key: str, message: str) -> None:
    if not condition:
        raise ConfigError(key, message)


def parse_scenario(raw: dict, base_dir: Path | None = None, source: str = "") -> ScenarioConfig:
    """Validate a scenario mapping and build a :class:`ScenarioConfig`."""
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "scenario must be a mapping")
    con = _section(raw, "constellation")
    planes = _number(con, "constellation", "planes", cast=int)
    spp = _number(con, "constellation", "sats_per_plane", cast=int)
    altitude = _number(con, "constellation", "altitude_km")
    phase_offset = _number(con, "constellation", "phase_offset", default=0.5)
    _check(planes >= 1, "constellation.planes", "must be >= 1")
    _check(spp >= 1, "constellation.sats_per_plane", "must be >= 1")
    _check(altitude > 0, "constellation.altitude_km", "must be positive")
    try:
        policy = IslPolicy(con.get("isl_policy", IslPolicy.GRID_NO_SEAM.value))
    except ValueError:
        raise ConfigError("constellation.isl_policy", f"unknown policy {con.get('isl_policy')!r}") from None

    gs = _section(raw, "ground_stations")
    mask = _number(gs, "ground_stations", "elevation_mask_deg", default=10.0)
    _check(-90.0 <= mask < 90.0, "ground_stations.elevation_mask_deg", "must lie in [-90, 90)")
    if "stations" in gs:
        try:
            catalog = tuple((str(s["name"]), float(s["latitude_deg"]), float(s["longitude_deg"]))
                            for s in gs["stations"])
        except (KeyError, TypeError, ValueError):
            raise ConfigError("ground_stations.stations", "records need name, latitude_deg, longitude_deg") from None
    elif "catalog" in gs:
        path = Path(gs["catalog"])
        if not path.is_absolute() and base_dir is not None:
            path = base_dir / path
        try:
            catalog = tuple(read_catalog(path))
        except OSError as exc:
            raise ConfigError("ground_stations.catalog", f"cannot read {path}: {exc.strerror}") from None
        except MalformedCatalog as exc:
            raise ConfigError("ground_stations.catalog", str(exc)) from None
    else:
        raise ConfigError("ground_stations.catalog", "missing (give catalog or stations)")
    try:
        load_ground_stations(catalog)
    except MalformedCatalog as exc:
        raise ConfigError("ground_stations.catalog", str(exc)) from None

    tasks = _section(raw, "tasks")
    task = TaskParams(
        data_bits=_number(tasks, "tasks", "data_bits"),
        deadline_s=_number(tasks, "tasks", "deadline_s"),
        compression_ratio=_number(tasks, "tasks", "compression_ratio"),
    )
    count = _number(tasks, "tasks", "count", cast=int)
    _check(task.data_bits > 0, "tasks.data_bits", "must be positive")
    _check(task.deadline_s > 0, "tasks.deadline_s", "must be positive")
    _check(task.compression_ratio >= 1, "tasks.compression_ratio",
           f"must be >= 1, got {task.compression_ratio}")
    _check(1 <= count <= planes * spp, "tasks.count", f"must lie in 1..{planes * spp}")

    rf = _section(raw, "rf")
    rf_isl = _rf(_section(rf, "isl"), "rf.isl")
    rf_dl = _rf(_section(rf, "downlink"), "rf.downlink")

    amp = _section(raw, "amplifier")
    amp_values = {
        "p_fix_w": _number(amp, "amplifier", "p_fix_w"),
        "drain_efficiency": _number(amp, "amplifier", "drain_efficiency"),
        "p_out_max_w": _number(amp, "amplifier", "p_out_max_w"),
        "payload_budget_w": _number(amp, "amplifier", "payload_budget_w", default=math.inf),
    }
    load = amp.get("load_coefficient")
    amp_values["load_coefficient"] = (math.pi / 4 * amp_values["drain_efficiency"] if load is None
                                      else _number(amp, "amplifier", "load_coefficient"))
    _check(0 < amp_values["drain_efficiency"] <= 1, "amplifier.drain_efficiency", "must lie in (0, 1]")
    _check(amp_values["p_out_max_w"] > 0, "amplifier.p_out_max_w", "must be positive")
    _check(amp_values["p_fix_w"] >= 0, "amplifier.p_fix_w", "must be non-negative")
    _check(amp_values["load_coefficient"] >= 0, "amplifier.load_coefficient", "must be non-negative")
    _check(amp_values["payload_budget_w"] > 0, "amplifier.payload_budget_w", "must be positive")
    amplifier = AmplifierParams(**amp_values)

    cmp = _section(raw, "compute")
    cvals = {k: _number(cmp, "compute", k)
             for k in ("f_cpu_hz", "cloud_speedup", "cycles_per_bit", "effective_capacitance")}
    _check(cvals["f_cpu_hz"] > 0, "compute.f_cpu_hz", "must be positive")
    _check(cvals["cloud_speedup"] > 1, "compute.cloud_speedup", "must exceed 1")
    _check(cvals["cycles_per_bit"] > 0, "compute.cycles_per_bit", "must be positive")
    _check(cvals["effective_capacitance"] >= 0, "compute.effective_capacitance", "must be non-negative")
    compute = ComputeParams(**cvals)

    exp = raw.get("experiment") or {}
    runs = _number(exp, "experiment", "runs", default=100, cast=int)
    step = _number(exp, "experiment", "store_forward_step_s", default=1.0)
    _check(runs >= 1, "experiment.runs", "must be >= 1")
    _check(step > 0, "experiment.store_forward_step_s", "must be positive")

    try:
        seed = int(raw.get("seed", 0))
    except (TypeError, ValueError):
        raise ConfigError("seed", f"not an integer: {raw.get('seed')!r}") from None

    return ScenarioConfig(
        planes=planes, sats_per_plane=spp, altitude_km=altitude, gs_catalog=catalog,
        elevation_mask_deg=mask, isl_policy=policy, seed=seed, task_count=count,
        rf_isl=rf_isl, rf_downlink=rf_dl, amplifier=amplifier, compute=compute, task=task,
        phase_offset=phase_offset, runs=runs, store_forward_step_s=step, source=source,
    )


def load_scenario(path: str | Path | None = None) -> ScenarioConfig:
    """Load a YAML scenario; ``None`` loads the bundled default."""
    path = Path(path) if path is not None else default_scenario_path()
    text = path.read_text(encoding="utf-8")  # OSError propagates: an I/O failure, not bad config
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"YAML parse error: {exc}") from None
    return parse_scenario(raw, base_dir=path.parent, source=str(path))
