"""Charging-station placement from trajectory data, plus heatmap validation.

Stations are chosen by visit-weighted greedy coverage with distance decay,
restricted to road-network nodes and subject to a minimum pairwise network
separation. This is a documented stand-in for a centrality-based placement
method published elsewhere; the mean-detour metric keeps alternatives
comparable. The occupancy heatmap provides the visual cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .roadnet import EmptyGraph, RoadGraph, dijkstra, nearest_node
from .trajectory import split_by_vehicle


class DegenerateGrid(ValueError):
    pass


class InfeasibleSeparation(ValueError):
    pass


@dataclass
class HeatmapGrid:
    origin_x: float
    origin_y: float
    cell_size: float
    width: int
    height: int
    counts: list          # row-major, height rows of width ints
    overflow: int = 0

    def cell_of(self, x: float, y: float):
        cx = int(math.floor((x - self.origin_x) / self.cell_size))
        cy = int(math.floor((y - self.origin_y) / self.cell_size))
        if 0 <= cx < self.width and 0 <= cy < self.height:
            return cx, cy
        return None

    def cell_center(self, cx: int, cy: int):
        return (self.origin_x + (cx + 0.5) * self.cell_size,
                self.origin_y + (cy + 0.5) * self.cell_size)

    def total(self) -> int:
        return sum(sum(row) for row in self.counts)

    def top_decile_cells(self):
        """Nonzero cells with counts at or above the 90th percentile of
        nonzero counts."""
        nz = sorted(c for row in self.counts for c in row if c > 0)
        if not nz:
            return []
        threshold = nz[min(len(nz) - 1, int(math.ceil(0.9 * len(nz))) - 1)]
        return [(cx, cy) for cy in range(self.height) for cx in range(self.width)
                if self.counts[cy][cx] >= threshold and self.counts[cy][cx] > 0]


def heatmap(samples, origin_x: float, origin_y: float, cell_size: float,
            width: int, height: int) -> HeatmapGrid:
    """Count trajectory samples per grid cell; out-of-extent samples go to
    the overflow tally so conservation is exact."""
    if cell_size <= 0 or width <= 0 or height <= 0:
        raise DegenerateGrid(f"grid {width}x{height} at cell_size {cell_size}")
    grid = HeatmapGrid(origin_x, origin_y, cell_size, width, height,
                       [[0] * width for _ in range(height)])
    for s in samples:
        cell = grid.cell_of(s.x, s.y)
        if cell is None:
            grid.overflow += 1
        else:
            grid.counts[cell[1]][cell[0]] += 1
    return grid


def heatmap_for_graph(samples, graph: RoadGraph, cell_size: float = 2.0,
                      margin: float = 2.0) -> HeatmapGrid:
    """Heatmap sized to the graph bounding box plus a margin."""
    x0, y0, x1, y1 = graph.bounding_box()
    ox, oy = x0 - margin, y0 - margin
    width = max(1, int(math.ceil((x1 - x0 + 2 * margin) / cell_size)))
    height = max(1, int(math.ceil((y1 - y0 + 2 * margin) / cell_size)))
    return heatmap(samples, ox, oy, cell_size, width, height)


def visit_weights(samples, graph: RoadGraph, dwell_weighting: bool = False):
    """Per-node weight accumulated from samples snapped to their nearest node.

    Count weighting adds 1 per sample; dwell weighting adds the time gap to
    the previous sample of the same vehicle (first sample counts 0 s).
    """
    if graph.n_nodes() == 0:
        raise EmptyGraph("visit_weights on empty graph")
    weights = [0.0] * graph.n_nodes()
    if not dwell_weighting:
        for s in samples:
            weights[nearest_node(graph, s.x, s.y)] += 1.0
        return weights
    # each sample covers the gap to the next one; the last sample reuses the
    # previous gap so uniform sampling matches count weighting exactly
    for series in split_by_vehicle(samples).values():
        for i, s in enumerate(series):
            if i + 1 < len(series):
                dt = series[i + 1].t - s.t
            elif i > 0:
                dt = s.t - series[i - 1].t
            else:
                dt = 0.0
            weights[nearest_node(graph, s.x, s.y)] += dt
    return weights


@dataclass
class PlacementResult:
    stations: list   # node ids, in selection order
    scores: list     # score each station had when picked
    k: int
    min_separation: float


def _sym_dist(dist_rows, a, b):
    return min(dist_rows[a][b], dist_rows[b][a])


def _all_pairs(graph: RoadGraph):
    return [dijkstra(graph, u) for u in range(graph.n_nodes())]


def place_chargers(graph: RoadGraph, weights, k: int, min_separation: float = 25.0,
                   d_scale: float = 20.0) -> PlacementResult:
    """Greedy coverage selection of up to k charger nodes.

    score(node) = sum over u of weights[u] * 1/(1 + d(u, node)/d_scale) with
    d the symmetric-min network distance. Each round picks the best feasible
    node (>= min_separation from all picks, ties to the smaller id), then
    zeroes the weights it covers within min_separation.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    n = graph.n_nodes()
    if n == 0:
        raise InfeasibleSeparation("cannot place chargers on an empty graph")
    dist_rows = _all_pairs(graph)
    remaining = list(weights)
    stations, scores = [], []
    for _ in range(k):
        best_node, best_score = None, 0.0
        for node in range(n):
            ok = all(_sym_dist(dist_rows, node, s) >= min_separation for s in stations)
            if not ok:
                continue
            score = 0.0
            for u in range(n):
                if remaining[u] == 0.0:
                    continue
                d = _sym_dist(dist_rows, u, node)
                if math.isfinite(d):
                    score += remaining[u] / (1.0 + d / d_scale)
            if score > best_score:
                best_node, best_score = node, score
        if best_node is None:
            break
        stations.append(best_node)
        scores.append(best_score)
        for u in range(n):
            if _sym_dist(dist_rows, u, best_node) < min_separation:
                remaining[u] = 0.0
    return PlacementResult(stations, scores, k, min_separation)


def score_placement(result: PlacementResult, samples, graph: RoadGraph) -> float:
    """Mean network distance from each sample's node to its nearest station."""
    if not result.stations:
        raise ValueError("empty placement")
    dist_to = {s: dijkstra(graph, s) for s in result.stations}
    dist_from = {}
    total = 0.0
    count = 0
    for smp in samples:
        node = nearest_node(graph, smp.x, smp.y)
        if node not in dist_from:
            dist_from[node] = dijkstra(graph, node)
        best = math.inf
        for st in result.stations:
            best = min(best, dist_from[node][st], dist_to[st][node])
        total += best
        count += 1
    return total / count if count else 0.0


# --- file formats -----------------------------------------------------------

def write_heatmap(grid: HeatmapGrid, fileobj, header_comment: str = "") -> None:
    w = fileobj.write
    if header_comment:
        w(f"# {header_comment}\n")
    w(f"heatmap v1 {grid.origin_x:.12g} {grid.origin_y:.12g} "
      f"{grid.cell_size:.12g} {grid.width} {grid.height}\n")
    for row in grid.counts:
        w(" ".join(str(c) for c in row) + "\n")


def write_heatmap_nonzero_csv(grid: HeatmapGrid, fileobj) -> None:
    fileobj.write("cell_x,cell_y,center_x,center_y,count\n")
    for cy in range(grid.height):
        for cx in range(grid.width):
            c = grid.counts[cy][cx]
            if c > 0:
                x, y = grid.cell_center(cx, cy)
                fileobj.write(f"{cx},{cy},{x:.12g},{y:.12g},{c}\n")


def write_placement_csv(result: PlacementResult, graph: RoadGraph, fileobj,
                        header_comment: str = "") -> None:
    w = fileobj.write
    if header_comment:
        w(f"# {header_comment}\n")
    w("round,node_id,x,y,score\n")
    for i, (node, score) in enumerate(zip(result.stations, result.scores)):
        wp = graph.waypoints[node]
        w(f"{i},{node},{wp.x:.12g},{wp.y:.12g},{score:.12g}\n")
