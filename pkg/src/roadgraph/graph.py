"""Planar road-network graph: vertices, polyline edges, simplification.

Coordinates follow the image convention: x is the column (rightward),
y is the row (downward), origin at the top-left corner. Sub-pixel float
positions are allowed everywhere.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, NamedTuple, Optional

ENDPOINT_TOL = 1e-6


class GraphError(ValueError):
    """Raised on operations that would break graph invariants."""


class Point(NamedTuple):
    x: float
    y: float

    def dist(self, other: "Point") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def yx(self) -> tuple[float, float]:
        return (self.y, self.x)


class VertexClass(Enum):
    ENDPOINT = "endpoint"          # degree 1
    INTERIOR = "interior"          # degree 2
    INTERSECTION = "intersection"  # degree >= 3
    ISOLATED = "isolated"          # degree 0; tolerated, excluded from metrics


@dataclass(frozen=True)
class Edge:
    id: int
    a: int
    b: int
    polyline: tuple[Point, ...]  # polyline[0] at vertex a, polyline[-1] at vertex b

    def other(self, vid: int) -> int:
        if vid == self.a:
            return self.b
        if vid == self.b:
            return self.a
        raise GraphError(f"vertex {vid} is not an endpoint of edge {self.id}")

    def polyline_from(self, vid: int) -> tuple[Point, ...]:
        """Polyline oriented so it starts at vertex ``vid``."""
        if vid == self.a:
            return self.polyline
        if vid == self.b:
            return tuple(reversed(self.polyline))
        raise GraphError(f"vertex {vid} is not an endpoint of edge {self.id}")

    @property
    def length(self) -> float:
        return polyline_length(self.polyline)


# ---------------------------------------------------------------------------
# polyline geometry helpers

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
    """Point at arclength ``s`` along the polyline, clamped to its ends."""
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


def project_onto_polyline(pts: Iterable[Point], p: Point) -> tuple[float, float]:
    """Project ``p`` onto the polyline; returns (arclength, distance)."""
    pts = list(pts)
    best_s = 0.0
    best_d = p.dist(pts[0])
    acc = 0.0
    for i in range(len(pts) - 1):
        a, b = pts[i], pts[i + 1]
        seg = a.dist(b)
        if seg > 0:
            t = ((p.x - a.x) * (b.x - a.x) + (p.y - a.y) * (b.y - a.y)) / (seg * seg)
            t = min(1.0, max(0.0, t))
            q = Point(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y))
            d = p.dist(q)
            if d < best_d - 1e-12:
                best_d = d
                best_s = acc + t * seg
        acc += seg
    return best_s, best_d


# ---------------------------------------------------------------------------

class RoadGraph:
    """Undirected planar graph with polyline edge geometry.

    Mutating methods operate in place; callers that need value semantics
    should work on a ``copy()``. Invariants (no self-loops, no duplicated
    edges, polyline endpoints pinned to vertex positions) are enforced at
    mutation time and can be re-checked wholesale with ``validate()``.

    Parallel edges between the same vertex pair are allowed only when their
    polyline geometries differ; they arise from cycle simplification and
    never from agent steps.
    """

    def __init__(self) -> None:
        self.vertices: dict[int, Point] = {}
        self.edges: dict[int, Edge] = {}
        self._adj: dict[int, list[int]] = {}  # vertex id -> incident edge ids
        self._next_vid = 0
        self._next_eid = 0

    # -- construction ------------------------------------------------------

    def add_vertex(self, p: Point) -> int:
        p = Point(float(p[0]), float(p[1]))
        if not (math.isfinite(p.x) and math.isfinite(p.y)):
            raise GraphError(f"non-finite vertex position {p}")
        vid = self._next_vid
        self._next_vid += 1
        self.vertices[vid] = p
        self._adj[vid] = []
        return vid

    def add_edge(self, a: int, b: int,
                 polyline: Optional[Iterable[Point]] = None) -> int:
        if a == b:
            raise GraphError("self-loop edges are forbidden")
        if a not in self.vertices or b not in self.vertices:
            raise GraphError(f"unknown endpoint in edge ({a}, {b})")
        pa, pb = self.vertices[a], self.vertices[b]
        if polyline is None:
            poly = (pa, pb)
        else:
            poly = tuple(Point(float(p[0]), float(p[1])) for p in polyline)
            if len(poly) < 2:
                raise GraphError("polyline needs at least two points")
            if poly[0].dist(pa) > ENDPOINT_TOL or poly[-1].dist(pb) > ENDPOINT_TOL:
                raise GraphError("polyline endpoints must coincide with vertex positions")
        if polyline_length(poly) <= ENDPOINT_TOL:
            raise GraphError(f"zero-length edge between {a} and {b}")
        for eid in self._adj[a]:
            e = self.edges[eid]
            if {e.a, e.b} == {a, b} and e.polyline_from(a) == poly:
                raise GraphError(f"duplicate edge between {a} and {b}")
        eid = self._next_eid
        self._next_eid += 1
        self.edges[eid] = Edge(eid, a, b, poly)
        self._adj[a].append(eid)
        self._adj[b].append(eid)
        return eid

    def remove_edge(self, eid: int) -> None:
        e = self.edges.pop(eid)
        self._adj[e.a].remove(eid)
        self._adj[e.b].remove(eid)

    def remove_vertex(self, vid: int) -> None:
        if self._adj[vid]:
            raise GraphError("cannot remove vertex with incident edges")
        del self._adj[vid]
        del self.vertices[vid]

    # -- queries -----------------------------------------------------------

    def degree(self, vid: int) -> int:
        return len(self._adj[vid])

    def incident_edges(self, vid: int) -> list[int]:
        return list(self._adj[vid])

    def neighbors(self, vid: int) -> list[int]:
        return [self.edges[eid].other(vid) for eid in self._adj[vid]]

    def has_edge_between(self, a: int, b: int) -> bool:
        return any(self.edges[eid].other(a) == b for eid in self._adj.get(a, ()))

    def num_vertices(self) -> int:
        return len(self.vertices)

    def num_edges(self) -> int:
        return len(self.edges)

    def total_length(self) -> float:
        return sum(e.length for e in self.edges.values())

    def copy(self) -> "RoadGraph":
        g = RoadGraph()
        g.vertices = dict(self.vertices)
        g.edges = dict(self.edges)
        g._adj = {v: list(eids) for v, eids in self._adj.items()}
        g._next_vid = self._next_vid
        g._next_eid = self._next_eid
        return g

    def components(self) -> list[set[int]]:
        seen: set[int] = set()
        out = []
        for start in sorted(self.vertices):
            if start in seen:
                continue
            comp = {start}
            stack = [start]
            while stack:
                v = stack.pop()
                for n in self.neighbors(v):
                    if n not in comp:
                        comp.add(n)
                        stack.append(n)
            seen |= comp
            out.append(comp)
        return out

    def validate(self) -> None:
        for vid, p in self.vertices.items():
            if not (math.isfinite(p.x) and math.isfinite(p.y)):
                raise GraphError(f"non-finite position at vertex {vid}")
        seen_pairs: dict[tuple[int, int], list[tuple[Point, ...]]] = {}
        for eid, e in self.edges.items():
            if e.a == e.b:
                raise GraphError(f"self-loop at edge {eid}")
            if e.a not in self.vertices or e.b not in self.vertices:
                raise GraphError(f"dangling endpoint at edge {eid}")
            if (e.polyline[0].dist(self.vertices[e.a]) > ENDPOINT_TOL
                    or e.polyline[-1].dist(self.vertices[e.b]) > ENDPOINT_TOL):
                raise GraphError(f"polyline endpoints detached at edge {eid}")
            key = (min(e.a, e.b), max(e.a, e.b))
            canon = e.polyline_from(key[0])
            if canon in seen_pairs.get(key, []):
                raise GraphError(f"duplicate edge between {e.a} and {e.b}")
            seen_pairs.setdefault(key, []).append(canon)
            if eid not in self._adj[e.a] or eid not in self._adj[e.b]:
                raise GraphError(f"adjacency index inconsistent at edge {eid}")
        for vid, eids in self._adj.items():
            for eid in eids:
                e = self.edges.get(eid)
                if e is None or vid not in (e.a, e.b):
                    raise GraphError(f"stale adjacency entry at vertex {vid}")


# ---------------------------------------------------------------------------
# operations

def classify_vertex(g: RoadGraph, vid: int) -> VertexClass:
    if vid not in g.vertices:
        raise KeyError(f"unknown vertex id {vid}")
    d = g.degree(vid)
    if d == 0:
        return VertexClass.ISOLATED
    if d == 1:
        return VertexClass.ENDPOINT
    if d == 2:
        return VertexClass.INTERIOR
    return VertexClass.INTERSECTION


def snap_vertex(g: RoadGraph, p: Point, eps: float) -> Optional[int]:
    """Nearest vertex within ``eps`` of ``p``; ties broken by (y, x), then id."""
    if eps < 0:
        raise ValueError("eps must be >= 0")
    p = Point(float(p[0]), float(p[1]))
    best: Optional[tuple[float, float, float, int]] = None
    for vid, q in g.vertices.items():
        d = p.dist(q)
        if d <= eps:
            key = (d, q.y, q.x, vid)
            if best is None or key < best:
                best = key
    return None if best is None else best[3]


def split_edge(g: RoadGraph, eid: int, s: float) -> int:
    """Split edge ``eid`` at arclength ``s``; returns the new vertex id.

    When ``s`` falls within 1 px of an endpoint no split happens and that
    endpoint's id is returned instead.
    """
    e = g.edges[eid]
    length = e.length
    if s <= 1.0:
        return e.a
    if s >= length - 1.0:
        return e.b
    cum = cumulative_arclengths(e.polyline)
    at = point_at_arclength(e.polyline, s)
    first = [p for p, c in zip(e.polyline, cum) if c < s - 1e-9] + [at]
    second = [at] + [p for p, c in zip(e.polyline, cum) if c > s + 1e-9]
    mid = g.add_vertex(at)
    g.remove_edge(eid)
    g.add_edge(e.a, mid, tuple(first))
    g.add_edge(mid, e.b, tuple(second))
    return mid


def _geodesic_within(g: RoadGraph, source: int, cutoff: float) -> dict[int, float]:
    """Dijkstra distances from ``source``, pruned beyond ``cutoff``."""
    dist = {source: 0.0}
    heap = [(0.0, source)]
    while heap:
        d, v = heapq.heappop(heap)
        if d > dist.get(v, math.inf):
            continue
        for eid in g.incident_edges(v):
            e = g.edges[eid]
            nd = d + e.length
            u = e.other(v)
            if nd <= cutoff and nd < dist.get(u, math.inf) - 1e-12:
                dist[u] = nd
                heapq.heappush(heap, (nd, u))
    return dist


def consolidate_graph(g: RoadGraph, radius: float, min_detour: float,
                      max_passes: int = 5) -> int:
    """Stitch vertices onto nearby geometry that is far away along the graph.

    Exploration can leave two runs of road geometry overlapping in space
    without sharing a vertex (each drawn by a different probe); routing then
    detours around the whole network even though the strands touch. For each
    vertex within ``radius`` of a non-incident edge whose endpoints are more
    than ``min_detour`` away along the graph, the edge is split at the
    closest point and joined to the vertex. Returns the number of stitches.
    """
    if radius < 0 or min_detour <= 0:
        raise ValueError("radius must be >= 0 and min_detour positive")
    stitched = 0
    for _ in range(max_passes):
        made = 0
        for vid in sorted(g.vertices):
            p = g.vertices[vid]
            incident = set(g.incident_edges(vid))
            best = None
            for eid in sorted(g.edges):
                if eid in incident:
                    continue
                s, d = project_onto_polyline(g.edges[eid].polyline, p)
                if d <= radius and (best is None or d < best[2] - 1e-12):
                    best = (eid, s, d)
            if best is None:
                continue
            eid, s, _ = best
            e = g.edges[eid]
            reach = _geodesic_within(g, vid, min_detour)
            near_end = min(
                reach.get(e.a, math.inf) + s,
                reach.get(e.b, math.inf) + (e.length - s))
            if near_end <= min_detour:
                continue
            mid = split_edge(g, eid, s)
            if mid == vid or g.has_edge_between(vid, mid):
                continue
            if g.vertices[mid].dist(p) <= ENDPOINT_TOL:
                # coincident: a joining edge would be zero-length, so fold
                # the vertex's edges onto the split vertex instead
                for ie in g.incident_edges(vid):
                    e2 = g.edges[ie]
                    other = e2.other(vid)
                    poly = e2.polyline_from(other)
                    g.remove_edge(ie)
                    if other != mid and not g.has_edge_between(other, mid):
                        g.add_edge(other, mid, poly[:-1] + (g.vertices[mid],))
                g.remove_vertex(vid)
            else:
                g.add_edge(vid, mid)
            made += 1
        stitched += made
        if made == 0:
            break
    return stitched


class StepEdgeResult(NamedTuple):
    graph: RoadGraph
    vertex_id: int
    warning: bool


def add_step_edge(g: RoadGraph, from_id: int, to: Point,
                  eps_merge: float) -> StepEdgeResult:
    """Connect ``from_id`` to ``to``, snapping onto existing vertices.

    If ``to`` falls within ``eps_merge`` of an existing vertex the edge
    closes onto it; otherwise a new vertex is created. Moves that would
    produce a self-loop or a duplicate straight edge are no-ops with the
    warning flag set.
    """
    if from_id not in g.vertices:
        raise GraphError(f"unknown vertex id {from_id}")
    to = Point(float(to[0]), float(to[1]))
    target = snap_vertex(g, to, eps_merge)
    if target == from_id:
        return StepEdgeResult(g, from_id, True)
    if target is None:
        target = g.add_vertex(to)
    elif g.has_edge_between(from_id, target):
        return StepEdgeResult(g, target, True)
    g.add_edge(from_id, target)
    return StepEdgeResult(g, target, False)


def _split_closed_polyline(poly: tuple[Point, ...]) -> tuple[Point, tuple[Point, ...], tuple[Point, ...]]:
    """Split a closed polyline at its arclength-farthest interior node.

    Returns (aux point, first half, second half). Both halves run from the
    closing point to the aux point so they can back two parallel edges.
    """
    cum = cumulative_arclengths(poly)
    total = cum[-1]
    # pick the existing interior node closest to the half-way arclength
    best_idx = None
    best_err = math.inf
    for i in range(1, len(poly) - 1):
        err = abs(cum[i] - total / 2)
        if err < best_err - 1e-12:
            best_err = err
            best_idx = i
    if best_idx is None:
        raise GraphError("closed chain without interior polyline nodes")
    aux = poly[best_idx]
    first = poly[: best_idx + 1]
    second = tuple(reversed(poly[best_idx:]))
    return aux, first, second


def simplify_graph(g: RoadGraph) -> RoadGraph:
    """Contract degree-2 vertices, concatenating the absorbed polylines.

    Endpoint and intersection vertices keep their exact positions. Pure
    cycles retain an anchor (lexicographically smallest (y, x) position)
    plus one auxiliary vertex near the opposite side of the cycle so the
    geometry survives without self-loops. Degree-0 vertices are copied
    through untouched.
    """
    out = RoadGraph()
    keep = sorted(v for v in g.vertices if g.degree(v) != 2)
    vmap = {v: out.add_vertex(g.vertices[v]) for v in keep}

    visited: set[int] = set()

    def walk_chain(start: int, first_eid: int) -> tuple[int, tuple[Point, ...], list[int]]:
        """Follow a chain of degree-2 vertices from ``start`` through
        ``first_eid`` until another kept vertex is reached."""
        poly: list[Point] = [g.vertices[start]]
        eids = []
        v = start
        eid = first_eid
        while True:
            e = g.edges[eid]
            seg = e.polyline_from(v)
            poly.extend(seg[1:])
            eids.append(eid)
            v = e.other(v)
            if g.degree(v) != 2 or v == start:
                return v, tuple(poly), eids
            nxt = [x for x in g.incident_edges(v) if x != eid]
            eid = nxt[0]

    for v in keep:
        for eid in sorted(g.incident_edges(v)):
            if eid in visited:
                continue
            w, poly, chain = walk_chain(v, eid)
            if any(x in visited for x in chain):
                continue
            visited.update(chain)
            if w == v:
                aux, first, second = _split_closed_polyline(poly)
                aux_id = out.add_vertex(aux)
                out.add_edge(vmap[v], aux_id, first)
                out.add_edge(vmap[v], aux_id, second)
            else:
                out.add_edge(vmap[v], vmap[w], poly)

    # remaining edges belong to pure cycles (every vertex degree 2)
    remaining = sorted(set(g.edges) - visited)
    while remaining:
        seed_eid = remaining[0]
        cycle_vertices = set()
        stack = [g.edges[seed_eid].a]
        while stack:
            v = stack.pop()
            if v in cycle_vertices:
                continue
            cycle_vertices.add(v)
            stack.extend(g.neighbors(v))
        anchor = min(cycle_vertices, key=lambda v: (g.vertices[v].y, g.vertices[v].x, v))
        first_eid = min(g.incident_edges(anchor))
        w, poly, chain = walk_chain(anchor, first_eid)
        assert w == anchor
        visited.update(chain)
        remaining = sorted(set(g.edges) - visited)
        anchor_id = out.add_vertex(g.vertices[anchor])
        aux, first, second = _split_closed_polyline(poly)
        aux_id = out.add_vertex(aux)
        out.add_edge(anchor_id, aux_id, first)
        out.add_edge(anchor_id, aux_id, second)

    return out


def structurally_equal(g1: RoadGraph, g2: RoadGraph, tol: float = 1e-9) -> bool:
    """Position-based structural equality, ignoring vertex/edge id labels."""
    def canon(g: RoadGraph):
        verts = sorted((round(p.y / tol) * tol, round(p.x / tol) * tol)
                       for p in g.vertices.values())
        edges = sorted(
            tuple(sorted([
                tuple((round(c / tol) * tol) for c in pt)
                for pt in (e.polyline[0], e.polyline[-1])
            ])) + (tuple((round(pt.x / tol) * tol, round(pt.y / tol) * tol)
                         for pt in min(e.polyline, tuple(reversed(e.polyline)))),)
            for e in g.edges.values()
        )
        return verts, edges

    return canon(g1) == canon(g2)
