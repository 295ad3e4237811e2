"""Minimal road-graph model: vertices, polyline edges, world-file loader.

A trimmed port of the host's graph module — just enough geometry for the
cheat-mode expert. Arithmetic matches the host operation for operation so
a cheat session reproduces the host's in-process reference run bit for
bit.
"""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Iterable, NamedTuple, Optional

GRAPH_FORMAT_VERSION = 1


class DataError(ValueError):
    """Unreadable or inconsistent input data."""


class Point(NamedTuple):
    x: float
    y: float

    def dist(self, other: "Point") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


class Edge(NamedTuple):
    id: int
    a: int
    b: int
    polyline: tuple[Point, ...]

    def other(self, vid: int) -> int:
        if vid == self.a:
            return self.b
        if vid == self.b:
            return self.a
        raise DataError(f"vertex {vid} is not an endpoint of edge {self.id}")

    def polyline_from(self, vid: int) -> tuple[Point, ...]:
        if vid == self.a:
            return self.polyline
        if vid == self.b:
            return tuple(reversed(self.polyline))
        raise DataError(f"vertex {vid} is not an endpoint of edge {self.id}")

    @property
    def length(self) -> float:
        return polyline_length(self.polyline)


def polyline_length(pts: Iterable[Point]) -> float:
    pts = list(pts)
    return sum(pts[i].dist(pts[i + 1]) for i in range(len(pts) - 1))


def cumulative_arclengths(pts: Iterable[Point]) -> list[float]:
    pts = list(pts)
    out = [0.0]
    for i in range(len(pts) - 1):
        out.append(out[-1] + pts[i].dist(pts[i + 1]))
    return out


def point_at_arclength(pts: Iterable[Point], s: float) -> Point:
    pts = list(pts)
    if s <= 0:
        return pts[0]
    acc = 0.0
    for i in range(len(pts) - 1):
        seg = pts[i].dist(pts[i + 1])
        if acc + seg >= s and seg > 0:
            t = (s - acc) / seg
            return Point(pts[i].x + t * (pts[i + 1].x - pts[i].x),
                         pts[i].y + t * (pts[i + 1].y - pts[i].y))
        acc += seg
    return pts[-1]


def project_onto_polyline(pts: Iterable[Point],
                          p: Point) -> tuple[float, float]:
    """Project ``p`` onto the polyline; returns (arclength, distance)."""
    pts = list(pts)
    best_s = 0.0
    best_d = p.dist(pts[0])
    acc = 0.0
    for i in range(len(pts) - 1):
        a, b = pts[i], pts[i + 1]
        seg = a.dist(b)
        if seg > 0:
            t = ((p.x - a.x) * (b.x - a.x)
                 + (p.y - a.y) * (b.y - a.y)) / (seg * seg)
            t = min(1.0, max(0.0, t))
            q = Point(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y))
            d = p.dist(q)
            if d < best_d - 1e-12:
                best_d = d
                best_s = acc + t * seg
        acc += seg
    return best_s, best_d


class RoadGraph:
    """Read-only undirected graph with polyline edge geometry."""

    def __init__(self) -> None:
        self.vertices: dict[int, Point] = {}
        self.edges: dict[int, Edge] = {}
        self._adj: dict[int, list[int]] = {}

    def add_vertex(self, p: Point) -> int:
        vid = len(self.vertices)
        self.vertices[vid] = p
        self._adj[vid] = []
        return vid

    def add_edge(self, a: int, b: int,
                 polyline: Optional[list[Point]] = None) -> int:
        poly = tuple(polyline) if polyline else (self.vertices[a],
                                                 self.vertices[b])
        eid = len(self.edges)
        self.edges[eid] = Edge(eid, a, b, poly)
        self._adj[a].append(eid)
        self._adj[b].append(eid)
        return eid

    def degree(self, vid: int) -> int:
        return len(self._adj[vid])

    def incident_edges(self, vid: int) -> list[int]:
        return list(self._adj[vid])


def load_graph(path) -> RoadGraph:
    """Load the graph interchange JSON the host writes as gt.json.

    Vertex and edge ids are reassigned sequentially in sorted file order,
    the same normalization the host applies on load, so ids agree between
    the two sides.
    """
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("version") != GRAPH_FORMAT_VERSION:
        raise DataError(f"{path}: unsupported graph format version")
    g = RoadGraph()
    try:
        remap = {}
        for v in sorted(doc["vertices"], key=lambda v: int(v["id"])):
            remap[int(v["id"])] = g.add_vertex(
                Point(float(v["x"]), float(v["y"])))
        for e in doc["edges"]:
            a, b = int(e["a"]), int(e["b"])
            if a not in remap or b not in remap:
                raise DataError(
                    f"edge ({a}, {b}) references a missing vertex")
            poly = [Point(float(x), float(y))
                    for x, y in e.get("polyline") or []]
            if a == b:
                continue
            g.add_edge(remap[a], remap[b], poly or None)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: malformed graph record: {exc}") from exc
    return g
