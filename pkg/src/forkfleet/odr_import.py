"""Restricted OpenDRIVE importer: roads with line/arc planView geometry.

Only what routing needs is read: reference-line geometry, driving-lane
counts per side and road-to-road links. Lane offsets are ignored; both
travel directions share the sampled reference line, with direction encoded
in edge orientation (right lanes forward, left lanes backward, right-hand
traffic). Anything outside the subset is skipped with a warning, except
unsupported planView geometry, which is a hard error.
"""

from __future__ import annotations

import logging
import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from typing import Optional

from .roadnet import Edge, RoadGraph, Waypoint, build_graph, normalize_heading

log = logging.getLogger(__name__)

SUPPORTED_GEOMETRY = ("line", "arc")


class OdrError(ValueError):
    pass


class MalformedDocument(OdrError):
    pass


class UnsupportedGeometry(OdrError):
    pass


class MissingAttribute(OdrError):
    pass


class GeometryGap(OdrError):
    pass


class DegenerateRoad(OdrError):
    pass


@dataclass(frozen=True)
class GeometrySegment:
    kind: str  # "line" | "arc"
    s: float
    x: float
    y: float
    hdg: float
    length: float
    curvature: float = 0.0

    def point_at(self, u: float):
        """Analytic (x, y, heading) at arc length u from the segment start."""
        if self.kind == "line":
            return (self.x + u * math.cos(self.hdg),
                    self.y + u * math.sin(self.hdg),
                    self.hdg)
        k = self.curvature
        h = self.hdg + k * u
        return (self.x + (math.sin(h) - math.sin(self.hdg)) / k,
                self.y - (math.cos(h) - math.cos(self.hdg)) / k,
                h)


@dataclass(frozen=True)
class RoadLink:
    kind: str          # "predecessor" | "successor"
    element_id: str
    contact_point: str  # "start" | "end"


@dataclass
class Road:
    id: str
    length: float
    plan_view: list
    left_count: int
    right_count: int
    links: list = field(default_factory=list)

    def point_at(self, s: float):
        """Reference-line point at arc length s along the whole road."""
        s = min(max(s, 0.0), self.length)
        seg = self.plan_view[0]
        for g in self.plan_view:
            if s >= g.s - 1e-12:
                seg = g
        return seg.point_at(min(s - seg.s, seg.length))


@dataclass
class RoadDescription:
    roads: list

    def road_by_id(self, rid: str) -> Optional[Road]:
        for r in self.roads:
            if r.id == rid:
                return r
        return None


def _attr(elem, name, road_id, cast=float):
    v = elem.get(name)
    if v is None:
        raise MissingAttribute(f"road {road_id}: <{elem.tag}> missing attribute '{name}'")
    try:
        return cast(v)
    except ValueError as exc:
        raise MalformedDocument(f"road {road_id}: bad value for '{name}': {v!r}") from exc


def parse_opendrive_subset(text: str) -> RoadDescription:
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise MalformedDocument(f"not well-formed XML: {exc}") from exc
    roads = []
    for road_el in root.iter("road"):
        rid = road_el.get("id", "?")
        length = _attr(road_el, "length", rid)
        pv = road_el.find("planView")
        if pv is None:
            raise MalformedDocument(f"road {rid}: missing planView")
        segments = []
        for geom in pv.findall("geometry"):
            children = list(geom)
            if not children:
                raise MalformedDocument(f"road {rid}: geometry without shape element")
            shape = children[0]
            if shape.tag not in SUPPORTED_GEOMETRY:
                raise UnsupportedGeometry(f"road {rid}: planView element '{shape.tag}'")
            seg = GeometrySegment(
                kind=shape.tag,
                s=_attr(geom, "s", rid),
                x=_attr(geom, "x", rid),
                y=_attr(geom, "y", rid),
                hdg=_attr(geom, "hdg", rid),
                length=_attr(geom, "length", rid),
                curvature=_attr(shape, "curvature", rid) if shape.tag == "arc" else 0.0,
            )
            if seg.length <= 0:
                raise MalformedDocument(f"road {rid}: non-positive segment length")
            if seg.kind == "arc" and (seg.curvature == 0 or not math.isfinite(seg.curvature)):
                raise MalformedDocument(f"road {rid}: arc needs nonzero finite curvature")
            segments.append(seg)
        if not segments:
            raise MalformedDocument(f"road {rid}: empty planView")
        segments.sort(key=lambda g: g.s)
        for a, b in zip(segments, segments[1:]):
            if b.s <= a.s:
                raise MalformedDocument(f"road {rid}: segment s-offsets not strictly increasing")
            xe, ye, _ = a.point_at(a.length)
            if math.hypot(b.x - xe, b.y - ye) > 1e-3:
                raise GeometryGap(f"road {rid}: planView discontinuity at s={b.s}")
        seg_total = sum(g.length for g in segments)
        if abs(seg_total - length) > 1e-3:
            raise MalformedDocument(
                f"road {rid}: declared length {length} != segment sum {seg_total}"
            )
        left_count = right_count = 0
        lanes_el = road_el.find("lanes")
        if lanes_el is not None:
            for section in lanes_el.findall("laneSection"):
                lc = rc = 0
                for side in ("left", "right"):
                    side_el = section.find(side)
                    if side_el is None:
                        continue
                    n = sum(1 for lane in side_el.findall("lane")
                            if lane.get("type", "driving") == "driving")
                    if side == "left":
                        lc = n
                    else:
                        rc = n
                left_count = max(left_count, lc)
                right_count = max(right_count, rc)
        links = []
        link_el = road_el.find("link")
        if link_el is not None:
            for kind in ("predecessor", "successor"):
                le = link_el.find(kind)
                if le is None:
                    continue
                if le.get("elementType", "road") != "road":
                    log.warning("road %s: skipping %s link to %s element",
                                rid, kind, le.get("elementType"))
                    continue
                eid = le.get("elementId")
                if eid is None:
                    raise MissingAttribute(f"road {rid}: link without elementId")
                contact = le.get("contactPoint", "start" if kind == "successor" else "end")
                links.append(RoadLink(kind, eid, contact))
        roads.append(Road(rid, length, segments, left_count, right_count, links))
    if not roads:
        raise MalformedDocument("document contains no <road> elements")
    return RoadDescription(roads)


def to_road_graph(desc: RoadDescription, spacing: float,
                  default_speed_limit: float = 4.0) -> RoadGraph:
    """Sample every road's reference line and wire up directed edge chains.

    Forward chains carry right-lane traffic, backward chains left-lane
    traffic with reversed headings. Linked roads share junction nodes so
    routes flow across road boundaries.
    """
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    for road in desc.roads:
        if road.length <= 0:
            raise DegenerateRoad(f"road {road.id} has zero length")

    raw = []   # (x, y, heading) per raw node
    edges = []
    # per (road id, direction) -> node index list along the chain
    chains = {}
    for road in desc.roads:
        n = max(1, math.ceil(road.length / spacing - 1e-12))
        step = road.length / n
        pts = [road.point_at(i * step) for i in range(n + 1)]
        if road.right_count > 0:
            idxs = []
            for (x, y, h) in pts:
                idxs.append(len(raw))
                raw.append((x, y, normalize_heading(h)))
            for a, b in zip(idxs, idxs[1:]):
                edges.append([a, b, step])
            chains[(road.id, "fwd")] = idxs
        if road.left_count > 0:
            idxs = []
            for (x, y, h) in reversed(pts):
                idxs.append(len(raw))
                raw.append((x, y, normalize_heading(h + math.pi)))
            for a, b in zip(idxs, idxs[1:]):
                edges.append([a, b, step])
            chains[(road.id, "bwd")] = idxs

    # Merge chain endpoints across road links (union-find on raw indices).
    parent = list(range(len(raw)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(i, j):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)

    def endpoint(road_id, direction, which):
        chain = chains.get((road_id, direction))
        if chain is None:
            return None
        return chain[0] if which == "first" else chain[-1]

    for road in desc.roads:
        for link in road.links:
            other = desc.road_by_id(link.element_id)
            if other is None:
                log.warning("road %s: link to unknown road %s ignored", road.id, link.element_id)
                continue
            if link.kind == "successor":
                # our geometric end touches the other's contact point
                if link.contact_point == "start":
                    pairs = [(endpoint(road.id, "fwd", "last"), endpoint(other.id, "fwd", "first")),
                             (endpoint(other.id, "bwd", "last"), endpoint(road.id, "bwd", "first"))]
                else:
                    pairs = [(endpoint(road.id, "fwd", "last"), endpoint(other.id, "bwd", "first")),
                             (endpoint(other.id, "fwd", "last"), endpoint(road.id, "bwd", "first"))]
            else:
                # our geometric start touches the other's contact point
                if link.contact_point == "end":
                    pairs = [(endpoint(other.id, "fwd", "last"), endpoint(road.id, "fwd", "first")),
                             (endpoint(road.id, "bwd", "last"), endpoint(other.id, "bwd", "first"))]
                else:
                    pairs = [(endpoint(other.id, "bwd", "last"), endpoint(road.id, "fwd", "first")),
                             (endpoint(road.id, "bwd", "last"), endpoint(other.id, "fwd", "first"))]
            for a, b in pairs:
                if a is None or b is None:
                    continue
                xa, ya, _ = raw[a]
                xb, yb, _ = raw[b]
                gap = math.hypot(xb - xa, yb - ya)
                if gap > 1e-3:
                    raise GeometryGap(
                        f"linked roads {road.id}/{other.id} endpoints {gap:.4f} m apart"
                    )
                union(a, b)

    # Compact merged nodes into dense ids, deterministically by raw order.
    rep_to_node = {}
    waypoints = []
    for i in range(len(raw)):
        r = find(i)
        if r not in rep_to_node:
            rep_to_node[r] = len(waypoints)
            x, y, h = raw[r]
            waypoints.append(Waypoint(len(waypoints), x, y, h))
    node_of = [rep_to_node[find(i)] for i in range(len(raw))]
    edge_objs = []
    seen = set()
    for a, b, length in edges:
        na, nb = node_of[a], node_of[b]
        if na == nb or (na, nb) in seen:
            continue
        seen.add((na, nb))
        edge_objs.append(Edge(na, nb, length, default_speed_limit, True))
    return build_graph(waypoints, edge_objs, [])
