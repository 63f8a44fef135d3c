"""Minimum-propagation-delay routing with satellite-disjoint paths.

Every path starts at a task's origin satellite, crosses satellites only, and
ends at some ground station. Paths of different tasks may share the terminal
ground station but no satellite.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Collection, Sequence

from .allocator import Task
from .linkbudget import propagation_delay_s
from .orbital import ConstellationGraph, LinkClass


class Unreachable(Exception):
    """No ground station can be reached from the origin."""


@dataclass(frozen=True)
class Hop:
    u: int
    v: int
    distance_km: float
    prop_delay_s: float
    link_class: LinkClass


@dataclass(frozen=True)
class RoutePath:
    vertices: tuple[int, ...]
    hops: tuple[Hop, ...]

    @property
    def origin(self) -> int:
        return self.vertices[0]

    @property
    def ground_station(self) -> int:
        return self.vertices[-1]

    @property
    def total_prop_delay_s(self) -> float:
        return sum(h.prop_delay_s for h in self.hops)

    @classmethod
    def from_vertices(cls, graph: ConstellationGraph, vertices: Sequence[int]) -> "RoutePath":
        hops = []
        for u, v in zip(vertices, vertices[1:]):
            e = graph.edge(u, v)
            if e is None:
                raise ValueError(f"{u} and {v} are not adjacent")
            hops.append(Hop(u, v, e.distance_km, propagation_delay_s(e.distance_km), e.link_class))
        return cls(vertices=tuple(vertices), hops=tuple(hops))


@dataclass(frozen=True)
class RoutePlan:
    paths: dict[int, RoutePath]  # keyed by task index
    unrouted: tuple[int, ...] = field(default=())

    @property
    def objective(self) -> float:
        return sum(p.total_prop_delay_s for p in self.paths.values())

    @property
    def complete(self) -> bool:
        return not self.unrouted


def shortest_prop_path(graph: ConstellationGraph, origin: int,
                       blocked: Collection[int] = ()) -> RoutePath:
    """Dijkstra from ``origin`` to the nearest ground station in propagation delay.

    Ground stations are terminal. Ties on delay go to the lower ground-station
    id, then to the lexicographically smaller vertex sequence.

    Raises:
        Unreachable: if no ground station can be reached.
    """
    if not graph.is_satellite(origin):
        raise ValueError(f"origin {origin} is not a satellite")
    if origin in blocked:
        raise ValueError(f"origin {origin} is blocked")
    blocked = set(blocked)
    # heap entries compare by (delay, path); the first pop of a vertex is final
    heap: list[tuple[float, tuple[int, ...]]] = [(0.0, (origin,))]
    done: set[int] = set()
    best_gs: tuple[float, int, tuple[int, ...]] | None = None
    while heap:
        delay, path = heapq.heappop(heap)
        v = path[-1]
        if v in done:
            continue
        if best_gs is not None and delay > best_gs[0]:
            break
        done.add(v)
        if graph.is_ground_station(v):
            key = (delay, v, path)
            if best_gs is None or key < best_gs:
                best_gs = key
            continue
        for w, e in graph.neighbors(v):
            if w in done or w in blocked:
                continue
            heapq.heappush(heap, (delay + propagation_delay_s(e.distance_km), path + (w,)))
    if best_gs is None:
        raise Unreachable(f"no ground station reachable from {origin}")
    return RoutePath.from_vertices(graph, best_gs[2])


def greedy_deconflicted_routes(graph: ConstellationGraph, tasks: Sequence[Task]) -> RoutePlan:
    """Route all tasks on satellite-disjoint paths, cheapest path first.

    Each round recomputes every pending task's shortest path on the residual
    graph (satellites of committed paths removed, other pending origins
    blocked) and commits the one with the smallest delay. Tasks that become
    unreachable are reported in ``RoutePlan.unrouted``.
    """
    origins = [t.origin for t in tasks]
    if len(set(origins)) != len(origins):
        raise ValueError("task origins must be distinct")
    pending = set(range(len(tasks)))
    used: set[int] = set()
    paths: dict[int, RoutePath] = {}
    unrouted: list[int] = []
    while pending:
        best: tuple[float, int, RoutePath] | None = None
        for i in sorted(pending):
            blocked = used | {origins[j] for j in pending if j != i}
            try:
                path = shortest_prop_path(graph, origins[i], blocked)
            except Unreachable:
                unrouted.append(i)
                continue
            key = (path.total_prop_delay_s, origins[i])
            if best is None or key < (best[0], origins[best[1]]):
                best = (path.total_prop_delay_s, i, path)
        pending.difference_update(unrouted)
        if best is None:
            break
        _, i, path = best
        paths[i] = path
        used.update(v for v in path.vertices if graph.is_satellite(v))
        pending.discard(i)
    return RoutePlan(paths=paths, unrouted=tuple(sorted(unrouted)))


def validate_plan(plan: RoutePlan, graph: ConstellationGraph, tasks: Sequence[Task]) -> list[str]:
    """Constraint violations of a plan; empty when it is valid."""
    violations = []
    owner: dict[int, int] = {}
    for i, path in sorted(plan.paths.items()):
        v = path.vertices
        if v[0] != tasks[i].origin:
            violations.append(f"C2: task {i} starts at {v[0]}, not its origin {tasks[i].origin}")
        if not graph.is_ground_station(v[-1]):
            violations.append(f"C3: task {i} ends at {v[-1]}, not a ground station")
        for k, x in enumerate(v[:-1]):
            if not graph.is_satellite(x):
                violations.append(f"C3: task {i} passes through ground station {x} at position {k}")
        for a, b in zip(v, v[1:]):
            if graph.edge(a, b) is None:
                violations.append(f"adjacency: task {i} hop {a}-{b} is not an edge")
        for x in v:
            if not graph.is_satellite(x):
                continue
            if x in owner and owner[x] != i:
                violations.append(f"C1: tasks {owner[x]} and {i} share satellite {x}")
            else:
                owner[x] = i
    return violations
