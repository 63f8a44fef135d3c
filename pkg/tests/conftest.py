import itertools
import math
import random

import networkx as nx
import pytest

from sat2c.config import load_scenario
from sat2c.linkbudget import propagation_delay_s
from sat2c.orbital import ConstellationGraph, Edge, GroundStationNode, LinkClass, SatelliteNode

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def scenario():
    return load_scenario()


def toy_graph(n_sats, n_gs, sat_edges, gs_edges):
    """ConstellationGraph from explicit (u, v, km) lists; ground stations are n_sats + k."""
    sats = [SatelliteNode(i, 0, i, 0.0, 0.0, (0.0, 0.0, 0.0)) for i in range(n_sats)]
    gss = [GroundStationNode(n_sats + k, f"gs{k}", 0.0, 0.0, (0.0, 0.0, 0.0)) for k in range(n_gs)]
    edges = [Edge(u, v, d, LinkClass.ISL) for u, v, d in sat_edges]
    edges += [Edge(u, v, d, LinkClass.DOWNLINK) for u, v, d in gs_edges]
    return ConstellationGraph(tuple(sats), tuple(gss), tuple(edges))


def random_toy_graph(rng: random.Random, max_sats=12, max_gs=2, p_isl=0.3, p_dl=0.25):
    n_sats = rng.randint(4, max_sats)
    n_gs = rng.randint(1, max_gs)
    sat_edges = [(u, v, rng.uniform(500.0, 3000.0))
                 for u, v in itertools.combinations(range(n_sats), 2) if rng.random() < p_isl]
    gs_edges = [(s, n_sats + g, rng.uniform(600.0, 2500.0))
                for s in range(n_sats) for g in range(n_gs) if rng.random() < p_dl]
    return toy_graph(n_sats, n_gs, sat_edges, gs_edges)


def to_networkx(graph: ConstellationGraph) -> nx.Graph:
    g = nx.Graph()
    g.add_nodes_from(range(graph.n_vertices))
    for e in graph.edges:
        g.add_edge(e.u, e.v, delay=propagation_delay_s(e.distance_km))
    return g


def satellite_paths(graph: ConstellationGraph, origin: int, forbidden=frozenset()):
    """All simple origin -> ground-station paths with satellite-only interiors."""
    g = to_networkx(graph)
    for gs in graph.ground_station_ids():
        keep = [v for v in range(graph.n_vertices)
                if (graph.is_satellite(v) and v not in forbidden) or v == gs]
        if origin not in keep:
            continue
        sub = g.subgraph(keep)
        for path in nx.all_simple_paths(sub, origin, gs):
            delay = sum(sub[a][b]["delay"] for a, b in zip(path, path[1:]))
            yield delay, tuple(path)


def exhaustive_joint_optimum(graph: ConstellationGraph, origins):
    """Minimum total delay over satellite-disjoint path assignments; inf if none."""
    best = math.inf

    def recurse(i, used, total):
        nonlocal best
        if total >= best:
            return
        if i == len(origins):
            best = total
            return
        others = {o for j, o in enumerate(origins) if j != i}
        for delay, path in satellite_paths(graph, origins[i], frozenset(used | others)):
            sats = {v for v in path if graph.is_satellite(v)}
            if sats & used:
                continue
            recurse(i + 1, used | sats, total + delay)

    recurse(0, set(), 0.0)
    return best
