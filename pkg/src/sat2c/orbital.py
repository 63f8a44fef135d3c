"""Walker-star constellation snapshot, ground stations and the network graph.

Vertex ids in a :class:`ConstellationGraph` are integers: satellites occupy
``0 .. n_sat - 1`` and ground stations follow at ``n_sat .. n_sat + n_gs - 1``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .allocator import Task

R_EARTH_KM = 6371.0
MU_EARTH_KM3_S2 = 398600.4418
EARTH_ROTATION_RAD_S = 7.2921159e-5


class MalformedCatalog(ValueError):
    pass


class IslPolicy(str, Enum):
    GRID_NO_SEAM = "GridNoSeam"
    GRID_WITH_SEAM = "GridWithSeam"


class LinkClass(str, Enum):
    ISL = "ISL"
    DOWNLINK = "Downlink"


@dataclass(frozen=True)
class SatelliteNode:
    id: int
    plane: int
    slot: int
    raan_deg: float
    anomaly_deg: float  # argument of latitude at the snapshot epoch
    position: tuple[float, float, float]

    @property
    def radius_km(self) -> float:
        return math.hypot(*self.position)


@dataclass(frozen=True)
class GroundStationNode:
    id: int
    name: str
    latitude_deg: float
    longitude_deg: float
    position: tuple[float, float, float]


@dataclass(frozen=True)
class Edge:
    u: int
    v: int
    distance_km: float
    link_class: LinkClass


@dataclass(frozen=True)
class ConstellationGraph:
    satellites: tuple[SatelliteNode, ...]
    ground_stations: tuple[GroundStationNode, ...]
    edges: tuple[Edge, ...]
    _adjacency: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        adjacency: dict[int, list[tuple[int, Edge]]] = {v: [] for v in range(self.n_vertices)}
        for e in self.edges:
            if e.u == e.v:
                raise ValueError(f"self-loop at {e.u}")
            if not (self.is_satellite(e.u) or self.is_satellite(e.v)):
                raise ValueError(f"ground-to-ground edge {e.u}-{e.v}")
            adjacency[e.u].append((e.v, e))
            adjacency[e.v].append((e.u, e))
        for v in adjacency:
            adjacency[v].sort(key=lambda item: item[0])
        object.__setattr__(self, "_adjacency", adjacency)

    @property
    def n_satellites(self) -> int:
        return len(self.satellites)

    @property
    def n_vertices(self) -> int:
        return len(self.satellites) + len(self.ground_stations)

    def is_satellite(self, v: int) -> bool:
        return 0 <= v < len(self.satellites)

    def is_ground_station(self, v: int) -> bool:
        return len(self.satellites) <= v < self.n_vertices

    def ground_station_ids(self) -> range:
        return range(len(self.satellites), self.n_vertices)

    def neighbors(self, v: int) -> list[tuple[int, Edge]]:
        return self._adjacency[v]

    def edge(self, u: int, v: int) -> Edge | None:
        for w, e in self._adjacency[u]:
            if w == v:
                return e
        return None

    def position(self, v: int) -> tuple[float, float, float]:
        if self.is_satellite(v):
            return self.satellites[v].position
        return self.ground_stations[v - len(self.satellites)].position

    def label(self, v: int) -> str:
        if self.is_satellite(v):
            s = self.satellites[v]
            return f"sat{s.plane}-{s.slot}"
        return self.ground_stations[v - len(self.satellites)].name


# --- geometry ------------------------------------------------------------------------

def orbit_position(radius_km: float, raan_deg: float, anomaly_deg: float,
                   inclination_deg: float = 90.0) -> tuple[float, float, float]:
    """Position on a circular orbit given RAAN and argument of latitude."""
    raan, u, inc = (math.radians(x) for x in (raan_deg, anomaly_deg, inclination_deg))
    x = radius_km * (math.cos(raan) * math.cos(u) - math.sin(raan) * math.sin(u) * math.cos(inc))
    y = radius_km * (math.sin(raan) * math.cos(u) + math.cos(raan) * math.sin(u) * math.cos(inc))
    z = radius_km * math.sin(u) * math.sin(inc)
    return (x, y, z)


def geodetic_to_ecef(latitude_deg: float, longitude_deg: float, radius_km: float = R_EARTH_KM
                     ) -> tuple[float, float, float]:
    lat, lon = math.radians(latitude_deg), math.radians(longitude_deg)
    return (radius_km * math.cos(lat) * math.cos(lon),
            radius_km * math.cos(lat) * math.sin(lon),
            radius_km * math.sin(lat))


def orbital_period_s(altitude_km: float) -> float:
    return 2.0 * math.pi * math.sqrt((R_EARTH_KM + altitude_km) ** 3 / MU_EARTH_KM3_S2)


def elevation_deg(ground: Sequence[float], target: Sequence[float]) -> float:
    """Elevation of ``target`` seen from ``ground`` over the local horizontal of a sphere."""
    g = np.asarray(ground, dtype=float)
    d = np.asarray(target, dtype=float) - g
    sin_el = float(np.dot(d, g) / (np.linalg.norm(d) * np.linalg.norm(g)))
    return math.degrees(math.asin(max(-1.0, min(1.0, sin_el))))


def segment_min_radius(a: Sequence[float], b: Sequence[float]) -> float:
    """Closest approach of segment ``ab`` to the Earth's center."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ab = b - a
    denom = float(np.dot(ab, ab))
    t = 0.0 if denom == 0 else min(1.0, max(0.0, -float(np.dot(a, ab)) / denom))
    return float(np.linalg.norm(a + t * ab))


def has_line_of_sight(a: Sequence[float], b: Sequence[float], radius_km: float = R_EARTH_KM) -> bool:
    return segment_min_radius(a, b) >= radius_km


# --- constellation -------------------------------------------------------------------

def build_walker_star(planes: int, sats_per_plane: int, altitude_km: float,
                      phase_offset: float = 0.5) -> list[SatelliteNode]:
    """Polar Walker-star snapshot.

    Ascending nodes are spread over 180 degrees, slots evenly within each
    plane, and adjacent planes are phased by ``phase_offset`` of a slot.
    """
    if planes < 1 or sats_per_plane < 1:
        raise ValueError("planes and sats_per_plane must be >= 1")
    if altitude_km <= 0:
        raise ValueError("altitude must be positive")
    radius = R_EARTH_KM + altitude_km
    slot_spacing = 360.0 / sats_per_plane
    satellites = []
    for p in range(planes):
        raan = p * 180.0 / planes
        for s in range(sats_per_plane):
            anomaly = (s * slot_spacing + p * phase_offset * slot_spacing) % 360.0
            satellites.append(SatelliteNode(
                id=p * sats_per_plane + s, plane=p, slot=s, raan_deg=raan, anomaly_deg=anomaly,
                position=orbit_position(radius, raan, anomaly)))
    return satellites


def read_catalog(path: str | Path) -> list[tuple[str, float, float]]:
    """Read a ``name,latitude_deg,longitude_deg`` CSV file."""
    entries = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            try:
                entries.append((row["name"].strip(), float(row["latitude_deg"]), float(row["longitude_deg"])))
            except (KeyError, TypeError, ValueError) as exc:
                raise MalformedCatalog(f"{path}: bad record {row!r}") from exc
    return entries


def load_ground_stations(catalog: Iterable[tuple[str, float, float]]) -> list[GroundStationNode]:
    stations = []
    seen = set()
    for i, (name, lat, lon) in enumerate(catalog):
        if not -90.0 <= lat <= 90.0:
            raise MalformedCatalog(f"{name}: latitude {lat} out of range")
        if not -180.0 < lon <= 180.0:
            raise MalformedCatalog(f"{name}: longitude {lon} out of range")
        if name in seen:
            raise MalformedCatalog(f"duplicate ground station {name!r}")
        seen.add(name)
        stations.append(GroundStationNode(id=i, name=name, latitude_deg=lat, longitude_deg=lon,
                                          position=geodetic_to_ecef(lat, lon)))
    if not stations:
        raise MalformedCatalog("empty ground-station catalog")
    return stations


def _best_plane_pairing(a: Sequence[SatelliteNode], b: Sequence[SatelliteNode]) -> list[int]:
    # one-to-one slot pairing minimizing the summed link length; shifts s -> s + k
    # suit co-rotating planes, reflections s -> k - s the counter-rotating seam
    n = len(a)
    pa = np.array([s.position for s in a])
    pb = np.array([s.position for s in b])
    idx = np.arange(n)
    best = None
    for orientation in (1, -1):
        for k in range(n):
            perm = (orientation * idx + k) % n
            total = float(np.linalg.norm(pa - pb[perm], axis=1).sum())
            key = (round(total, 6), orientation == -1, k)
            if best is None or key < best[0]:
                best = (key, perm)
    return [int(j) for j in best[1]]


def _isl_pairs(satellites: Sequence[SatelliteNode], policy: IslPolicy) -> set[tuple[int, int]]:
    planes: dict[int, list[SatelliteNode]] = {}
    for s in satellites:
        planes.setdefault(s.plane, []).append(s)
    for members in planes.values():
        members.sort(key=lambda s: s.slot)
    pairs = set()
    for members in planes.values():
        n = len(members)
        for i in range(n):
            a, b = members[i].id, members[(i + 1) % n].id
            if a != b:
                pairs.add((min(a, b), max(a, b)))
    order = sorted(planes)
    plane_pairs = list(zip(order, order[1:]))
    if policy == IslPolicy.GRID_WITH_SEAM and len(order) > 2:
        plane_pairs.append((order[-1], order[0]))
    for p, q in plane_pairs:
        a, b = planes[p], planes[q]
        if len(a) != len(b):
            raise ValueError("cross-plane grid needs equal plane sizes")
        for i, j in enumerate(_best_plane_pairing(a, b)):
            u, v = a[i].id, b[j].id
            pairs.add((min(u, v), max(u, v)))
    return pairs


def build_graph(satellites: Sequence[SatelliteNode], ground_stations: Sequence[GroundStationNode],
                isl_policy: IslPolicy | str = IslPolicy.GRID_NO_SEAM,
                elevation_mask_deg: float = 10.0) -> ConstellationGraph:
    """Snapshot graph with line-of-sight ISLs and elevation-masked downlinks.

    Ground stations are re-numbered to follow the satellites.
    """
    if not satellites:
        raise ValueError("no satellites")
    policy = IslPolicy(isl_policy)
    sats = tuple(sorted(satellites, key=lambda s: s.id))
    if [s.id for s in sats] != list(range(len(sats))):
        raise ValueError("satellite ids must be 0..n-1")
    n = len(sats)
    stations = tuple(replace(g, id=n + i) for i, g in enumerate(ground_stations))

    edges = []
    for u, v in sorted(_isl_pairs(sats, policy)):
        pu, pv = sats[u].position, sats[v].position
        # coincident satellites (possible across the seam at the poles) get no link
        if math.dist(pu, pv) > 1e-6 and has_line_of_sight(pu, pv):
            edges.append(Edge(u, v, math.dist(pu, pv), LinkClass.ISL))
    for s in sats:
        for g in stations:
            if elevation_deg(g.position, s.position) > elevation_mask_deg:
                edges.append(Edge(s.id, g.id, math.dist(s.position, g.position), LinkClass.DOWNLINK))
    return ConstellationGraph(satellites=sats, ground_stations=stations, edges=tuple(edges))


def sample_tasks(graph: ConstellationGraph, count: int, data_bits: float, deadline_s: float,
                 compression_ratio: float, seed: int) -> list[Task]:
    """Distinct origin satellites drawn uniformly without replacement."""
    if not 1 <= count <= graph.n_satellites:
        raise ValueError(f"task count {count} outside 1..{graph.n_satellites}")
    rng = np.random.default_rng(seed)
    origins = rng.choice(graph.n_satellites, size=count, replace=False)
    return [Task(origin=int(o), data_bits=data_bits, deadline_s=deadline_s, compression_ratio=compression_ratio)
            for o in origins]
