import math
import random

import pytest

from forkfleet import mapgen
from forkfleet.roadnet import Edge, ParkingSpot, Waypoint, build_graph


def random_graph(seed, n_nodes, extra_edges=None, extent=100.0):
    """Random strongly-ish connected directed graph with Euclidean-consistent
    edge lengths (length >= straight-line distance, so A*'s heuristic is
    admissible). Deterministic per seed."""
    rnd = random.Random(seed)
    pts = [(rnd.uniform(0, extent), rnd.uniform(0, extent)) for _ in range(n_nodes)]
    waypoints = [Waypoint(i, x, y, 0.0) for i, (x, y) in enumerate(pts)]
    edges = []
    seen = set()

    def add(a, b):
        if a == b or (a, b) in seen:
            return
        seen.add((a, b))
        chord = math.dist(pts[a], pts[b])
        edges.append(Edge(a, b, chord * rnd.uniform(1.0, 1.5) + 1e-9, 3.0, True))

    # random spanning cycle keeps everything reachable
    order = list(range(n_nodes))
    rnd.shuffle(order)
    for a, b in zip(order, order[1:] + order[:1]):
        add(a, b)
    if extra_edges is None:
        extra_edges = 2 * n_nodes
    for _ in range(extra_edges):
        add(rnd.randrange(n_nodes), rnd.randrange(n_nodes))
    return build_graph(waypoints, edges)


def one_way_pair_graph():
    """Two nodes connected A->B only, plus a long way back B->C->A."""
    waypoints = [Waypoint(0, 0, 0, 0.0), Waypoint(1, 10, 0, 0.0), Waypoint(2, 5, 8, 0.0)]
    edges = [
        Edge(0, 1, 10.0, 3.0, True),
        Edge(1, 2, 10.0, 3.0, True),
        Edge(2, 0, 10.0, 3.0, True),
    ]
    return build_graph(waypoints, edges)


def square_graph():
    """4-node square with both directions on every side (8 edges)."""
    waypoints = [Waypoint(0, 0, 0, 0.0), Waypoint(1, 10, 0, 0.0),
                 Waypoint(2, 10, 10, 0.0), Waypoint(3, 0, 10, 0.0)]
    edges = []
    for a, b in ((0, 1), (1, 2), (2, 3), (3, 0)):
        edges.append(Edge(a, b, 10.0, 3.0, True))
        edges.append(Edge(b, a, 10.0, 3.0, True))
    return build_graph(waypoints, edges)


def line_graph(lengths):
    """0 -> 1 -> 2 ... with the given edge lengths along the x axis."""
    xs = [0.0]
    for L in lengths:
        xs.append(xs[-1] + L)
    waypoints = [Waypoint(i, x, 0.0, 0.0) for i, x in enumerate(xs)]
    edges = [Edge(i, i + 1, L, 3.0, True) for i, L in enumerate(lengths)]
    return build_graph(waypoints, edges)


def enumerate_shortest(graph, src, dst):
    """Brute-force shortest distance over all simple paths (oracle)."""
    best = math.inf

    def walk(node, dist, visited):
        nonlocal best
        if dist >= best:
            return
        if node == dst:
            best = dist
            return
        for ei in graph.adjacency[node]:
            e = graph.edges[ei]
            if e.dst not in visited:
                walk(e.dst, dist + e.length, visited | {e.dst})

    walk(src, 0.0, {src})
    return best


@pytest.fixture(scope="session")
def warehouse():
    return mapgen.warehouse_map()
