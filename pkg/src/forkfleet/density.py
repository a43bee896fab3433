"""Critical traffic density: dynamic clustering by network distance.

Vehicles are snapped to road-network nodes and form the vertices of a
dynamic graph weighted by directed shortest-path distance. Two vehicles
link when the smaller of the two directed distances is within a threshold;
connected components of that relation are the clusters. A cluster of two
or more vehicles whose mean speed falls below the velocity threshold is
flagged critical. Directed distances stay asymmetric under one-way
sections, which is why both directions are computed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .roadnet import RoadGraph, dijkstra, nearest_node
from .trajectory import sample_at, split_by_vehicle

LINKAGE_SYMMETRIC_MIN = "symmetric_min"
LINKAGE_DIRECTED_EITHER = "directed_either"


class EmptyFleet(ValueError):
    pass


@dataclass(frozen=True)
class DensityConfig:
    distance_threshold: float = 15.0   # m
    velocity_threshold: float = 0.5    # m/s
    linkage: str = LINKAGE_SYMMETRIC_MIN
    snapshot_interval: float = 1.0     # s


@dataclass
class Snapshot:
    t: float
    vehicle_ids: list
    nodes: list       # snapped NodeId per vehicle
    speeds: list
    positions: list   # (x, y) per vehicle
    dist: list        # dist[i][j] = directed network distance i -> j


@dataclass
class Cluster:
    members: list
    mean_speed: float
    critical: bool


@dataclass
class ClusterReport:
    t: float
    clusters: list
    snapshot: Snapshot = None


@dataclass
class CriticalEpisode:
    start: float
    end: float
    peak_size: int
    centroid_node: int


class UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, i):
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def snapshot_from_states(t: float, states, graph: RoadGraph) -> Snapshot:
    """Build a snapshot from (vehicle_id, x, y, speed) tuples.

    One Dijkstra per distinct occupied node; vehicles sharing a node get
    distance zero regardless of intra-edge offsets.
    """
    if not states:
        raise EmptyFleet("snapshot of an empty fleet")
    states = sorted(states, key=lambda s: s[0])
    vids = [s[0] for s in states]
    positions = [(s[1], s[2]) for s in states]
    speeds = [s[3] for s in states]
    nodes = [nearest_node(graph, x, y) for x, y in positions]
    dist_from = {}
    for node in set(nodes):
        dist_from[node] = dijkstra(graph, node)
    n = len(vids)
    dmat = [[dist_from[nodes[i]][nodes[j]] for j in range(n)] for i in range(n)]
    return Snapshot(t, vids, nodes, speeds, positions, dmat)


def clusters(s: Snapshot, cfg: DensityConfig):
    """Partition vehicles into clusters of the thresholded link relation.

    Returns a list of member-index lists (indices into the snapshot arrays),
    each sorted, ordered by smallest member. Singletons are allowed.
    """
    n = len(s.vehicle_ids)
    uf = UnionFind(n)
    t = cfg.distance_threshold
    for i in range(n):
        for j in range(i + 1, n):
            # min() of the directed pair; DirectedEither yields the same relation
            if min(s.dist[i][j], s.dist[j][i]) <= t:
                uf.union(i, j)
    groups = {}
    for i in range(n):
        groups.setdefault(uf.find(i), []).append(i)
    return [groups[r] for r in sorted(groups)]


def flag_critical(partition, s: Snapshot, cfg: DensityConfig) -> ClusterReport:
    """Mean-speed check per cluster; singletons are never critical."""
    out = []
    for members in partition:
        mean_speed = sum(s.speeds[i] for i in members) / len(members)
        critical = len(members) >= 2 and mean_speed < cfg.velocity_threshold
        out.append(Cluster([s.vehicle_ids[i] for i in members], mean_speed, critical))
    return ClusterReport(s.t, out, s)


def analyze_snapshot(t, states, graph, cfg) -> ClusterReport:
    s = snapshot_from_states(t, states, graph)
    return flag_critical(clusters(s, cfg), s, cfg)


def density_timeline(samples, graph: RoadGraph, cfg: DensityConfig):
    """One ClusterReport per snapshot-interval tick over the trajectory span.

    Returns (reports, episodes). Critical clusters are stitched into
    episodes across consecutive ticks by >= 50% member overlap.
    """
    per_vehicle = split_by_vehicle(samples)
    if not per_vehicle:
        return [], []
    t0 = min(ss[0].t for ss in per_vehicle.values())
    te = max(ss[-1].t for ss in per_vehicle.values())
    reports = []
    n_ticks = int(math.floor((te - t0) / cfg.snapshot_interval + 1e-9)) + 1
    for k in range(n_ticks):
        t = t0 + k * cfg.snapshot_interval
        states = []
        for vid in sorted(per_vehicle):
            smp = sample_at(per_vehicle[vid], t)
            if smp is not None:
                states.append((vid, smp.x, smp.y, smp.speed))
        if not states:
            continue
        reports.append(analyze_snapshot(t, states, graph, cfg))
    episodes = _stitch_episodes(reports, graph, cfg)
    return reports, episodes


def _overlap_ok(a, b):
    inter = len(set(a) & set(b))
    return inter >= 0.5 * max(len(a), len(b))


def _centroid_node(members, report, graph):
    idx = [report.snapshot.vehicle_ids.index(v) for v in members]
    cx = sum(report.snapshot.positions[i][0] for i in idx) / len(idx)
    cy = sum(report.snapshot.positions[i][1] for i in idx) / len(idx)
    return nearest_node(graph, cx, cy)


def _stitch_episodes(reports, graph, cfg):
    episodes = []
    # active: list of dicts {members, start, peak_size, peak_report}
    active = []
    for rep in reports:
        crit = [c.members for c in rep.clusters if c.critical]
        next_active = []
        matched_prev = set()
        for members in crit:
            hit = None
            for ai, a in enumerate(active):
                if ai not in matched_prev and _overlap_ok(a["members"], members):
                    hit = ai
                    break
            if hit is not None:
                matched_prev.add(hit)
                a = active[hit]
                a["members"] = members
                a["end"] = rep.t
                if len(members) > a["peak_size"]:
                    a["peak_size"] = len(members)
                    a["peak_members"] = members
                    a["peak_report"] = rep
                next_active.append(a)
            else:
                next_active.append({"members": members, "start": rep.t, "end": rep.t,
                                    "peak_size": len(members), "peak_members": members,
                                    "peak_report": rep})
        for ai, a in enumerate(active):
            if ai not in matched_prev:
                episodes.append(a)
        active = next_active
    episodes.extend(active)
    out = []
    for a in sorted(episodes, key=lambda e: (e["start"], e["end"])):
        out.append(CriticalEpisode(a["start"], a["end"], a["peak_size"],
                                   _centroid_node(a["peak_members"], a["peak_report"], graph)))
    return out


def write_report_csv(reports, fileobj, header_comment: str = "") -> None:
    """CSV: t,cluster_id,member_ids(semicolon-joined),mean_speed,critical."""
    w = fileobj.write
    if header_comment:
        w(f"# {header_comment}\n")
    w("t,cluster_id,member_ids,mean_speed,critical\n")
    for rep in reports:
        for ci, c in enumerate(rep.clusters):
            members = ";".join(str(m) for m in c.members)
            w(f"{rep.t:.12g},{ci},{members},{c.mean_speed:.12g},{1 if c.critical else 0}\n")


def write_episode_summary(episodes, fileobj) -> None:
    w = fileobj.write
    w(f"critical episodes: {len(episodes)}\n")
    for i, e in enumerate(episodes):
        w(f"episode {i}: start={e.start:.12g}s end={e.end:.12g}s "
          f"peak_size={e.peak_size} centroid_node={e.centroid_node}\n")
