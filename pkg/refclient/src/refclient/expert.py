"""Ground-truth expert: next label vertices for an agent on the graph.

Port of the host's supervision expert, kept operation-for-operation
identical so a cheat-mode session reproduces the host's in-process
reference run exactly. Only the deterministic zero-noise path is needed
client-side; noise injection and force correction live in the host's
training harness.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

from .roadnet import (Point, RoadGraph, cumulative_arclengths,
                      point_at_arclength, project_onto_polyline)

# Agent positions within this distance of a graph vertex count as standing
# on it; must exceed the intersection-disk radius so recovered seeds snap.
VERTEX_SNAP_TOL = 5.0

# A segment counts as explored when less than this much arclength remains.
EXPLORED_SLACK = 1.0


class OffTrackError(RuntimeError):
    """Agent strayed beyond the error-tolerance band."""


class LabelMode(Enum):
    ROAD_SEGMENT = "road_segment"
    INTERSECTION = "intersection"


@dataclass(frozen=True)
class ExpertConfig:
    tau: float = 40.0               # road-segment-mode look-ahead
    tau_prime: float = 20.0         # intersection-mode branch offset
    xi: float = 20.0                # off-track tolerance
    curvature_angle_deg: float = 30.0


@dataclass(frozen=True)
class ExpertLabel:
    mode: LabelMode
    vertices: tuple[Point, ...]
    matched_segment_ids: tuple[int, ...] = ()


@dataclass
class ExplorationState:
    """Per-segment progress markers plus branch bookkeeping."""

    coverage: dict[int, dict[int, float]]
    pending_entries: dict[int, set[int]] = field(default_factory=dict)
    visited_vertices: set[int] = field(default_factory=set)
    unconsumed_initials: set[int] = field(default_factory=set)
    current_edge: Optional[int] = None
    current_entry: Optional[int] = None

    @classmethod
    def for_graph(cls, gt: RoadGraph) -> "ExplorationState":
        coverage = {eid: {e.a: 0.0, e.b: 0.0} for eid, e in gt.edges.items()}
        initials = {v for v in gt.vertices if gt.degree(v) not in (0, 2)}
        return cls(coverage=coverage, unconsumed_initials=initials)

    def edge_explored(self, gt: RoadGraph, eid: int) -> bool:
        return sum(self.coverage[eid].values()) >= \
            gt.edges[eid].length - EXPLORED_SLACK

    def advance(self, gt: RoadGraph, eid: int, entry: int, s: float) -> None:
        cov = self.coverage[eid]
        cov[entry] = min(max(cov[entry], s), gt.edges[eid].length)


def _locate(gt: RoadGraph, state: ExplorationState,
            p: Point) -> tuple[int, float, float]:
    """Locate ``p`` on the graph geometry: (edge id, arclength from a, dist).

    The segment currently being traversed wins when the point projects
    onto it closely, keeping traversal stable near junction clutter.
    """
    if state.current_edge is not None and state.current_edge in gt.edges:
        e = gt.edges[state.current_edge]
        s, d = project_onto_polyline(e.polyline, p)
        if d <= 3 * VERTEX_SNAP_TOL:
            return state.current_edge, s, d
    best = None
    for eid in sorted(gt.edges):
        s, d = project_onto_polyline(gt.edges[eid].polyline, p)
        if best is None or d < best[2] - 1e-12:
            best = (eid, s, d)
    if best is None:
        raise OffTrackError("ground-truth graph has no edges")
    return best


def _nearest_vertex(gt: RoadGraph, p: Point) -> tuple[Optional[int], float]:
    best_v, best_d = None, math.inf
    for vid in sorted(gt.vertices):
        d = p.dist(gt.vertices[vid])
        if d < best_d - 1e-12:
            best_v, best_d = vid, d
    return best_v, best_d


def _turning_point_ahead(poly: Sequence[Point], s_from: float, tau: float,
                         min_angle_deg: float) -> Optional[Point]:
    """Nearest interior polyline node past ``s_from`` (within ``tau``) where
    the direction change is at least ``min_angle_deg``."""
    cum = cumulative_arclengths(poly)
    for i in range(1, len(poly) - 1):
        if cum[i] <= s_from + 1e-9 or cum[i] > s_from + tau:
            continue
        ax, ay = poly[i].x - poly[i - 1].x, poly[i].y - poly[i - 1].y
        bx, by = poly[i + 1].x - poly[i].x, poly[i + 1].y - poly[i].y
        na, nb = math.hypot(ax, ay), math.hypot(bx, by)
        if na < 1e-12 or nb < 1e-12:
            continue
        cosv = max(-1.0, min(1.0, (ax * bx + ay * by) / (na * nb)))
        if math.degrees(math.acos(cosv)) >= min_angle_deg:
            return poly[i]
    return None


def _vertex_mode(gt: RoadGraph, state: ExplorationState, vid: int,
                 cfg: ExpertConfig) -> ExpertLabel:
    state.visited_vertices.add(vid)
    state.unconsumed_initials.discard(vid)
    state.current_edge = None
    state.current_entry = None
    labels: list[Point] = []
    segs: list[int] = []
    for eid in sorted(gt.incident_edges(vid)):
        if state.edge_explored(gt, eid):
            continue
        e = gt.edges[eid]
        poly = e.polyline_from(vid)
        if e.length < cfg.tau_prime:
            pt = gt.vertices[e.other(vid)]
        else:
            pt = point_at_arclength(poly, cfg.tau_prime)
        labels.append(pt)
        segs.append(eid)
        state.pending_entries.setdefault(eid, set()).add(vid)
    return ExpertLabel(LabelMode.INTERSECTION, tuple(labels), tuple(segs))


def expert_next(gt: RoadGraph, state: ExplorationState, v_t: Point,
                cfg: ExpertConfig,
                xi: Optional[float] = None) -> ExpertLabel:
    """Next label vertex set for an agent at ``v_t`` on the ground truth."""
    v_t = Point(float(v_t[0]), float(v_t[1]))
    xi = cfg.xi if xi is None else xi

    near_v, near_d = _nearest_vertex(gt, v_t)
    arrival_tol = VERTEX_SNAP_TOL
    if near_v is not None and gt.degree(near_v) != 2 and (
            near_v not in state.visited_vertices
            or any(not state.edge_explored(gt, ie)
                   for ie in gt.incident_edges(near_v))):
        # noisy arrivals merge into nearby history clutter and may never
        # land exactly on the junction; accept a wider radius while the
        # vertex still has work attached so its turn is not starved
        arrival_tol = 2 * VERTEX_SNAP_TOL
    if near_v is not None and near_d <= arrival_tol:
        # arrival at a vertex finishes the segment being traversed
        if state.current_edge is not None:
            e = gt.edges[state.current_edge]
            if near_v in (e.a, e.b) and state.current_entry is not None \
                    and near_v == e.other(state.current_entry):
                state.advance(gt, state.current_edge, state.current_entry,
                              e.length)
        return _vertex_mode(gt, state, near_v, cfg)

    if not gt.edges:
        raise OffTrackError("agent is not on the (empty) ground-truth graph")

    eid, s, d = _locate(gt, state, v_t)
    if d > xi:
        raise OffTrackError(f"agent {d:.1f} px off track (tolerance {xi})")
    e = gt.edges[eid]
    length = e.length

    if state.edge_explored(gt, eid):
        state.current_edge = None
        state.current_entry = None
        # before stopping, steer toward a nearby vertex that still has
        # unexplored road attached (or whose candidate-initial turn never
        # ran); noisy probes can otherwise strand whole segments
        best = None
        for vid in sorted(gt.vertices):
            needs_visit = vid in state.unconsumed_initials or any(
                not state.edge_explored(gt, ie)
                for ie in gt.incident_edges(vid))
            if not needs_visit:
                continue
            dv = v_t.dist(gt.vertices[vid])
            if dv <= cfg.tau_prime and (best is None or dv < best[1]):
                best = (vid, dv)
        if best is not None:
            return ExpertLabel(LabelMode.ROAD_SEGMENT,
                               (gt.vertices[best[0]],), ())
        return ExpertLabel(LabelMode.ROAD_SEGMENT, (), ())

    cov = state.coverage[eid]
    if state.current_edge == eid and state.current_entry is not None:
        entry = state.current_entry
    elif state.pending_entries.get(eid) and min(
            (s if v == e.a else length - s)
            for v in state.pending_entries[eid]) <= cfg.tau:
        # only consume a pending entry when the agent actually stands near
        # that end's branch stub; a probe wandering in from elsewhere on
        # the segment must not claim (and thereby skip) the whole run-up
        pend = state.pending_entries[eid]
        entry = min(pend, key=lambda v: s if v == e.a else length - s)
        pend.discard(entry)
    elif cov[e.a] >= s - EXPLORED_SLACK and cov[e.a] > 0:
        entry = e.a
    elif cov[e.b] >= (length - s) - EXPLORED_SLACK and cov[e.b] > 0:
        entry = e.b
    else:
        entry = e.a if s <= length - s else e.b

    s_from_entry = s if entry == e.a else length - s
    state.advance(gt, eid, entry, s_from_entry)
    state.current_edge = eid
    state.current_entry = entry
    remaining = length - s_from_entry
    exit_v = e.other(entry)
    poly = e.polyline_from(entry)

    if remaining <= cfg.tau:
        # covers both the terminal rule and the loop-closure case: segment
        # terminals are exactly the candidate initial vertices ahead
        target = gt.vertices[exit_v]
    else:
        target = _turning_point_ahead(poly, s_from_entry, cfg.tau,
                                      cfg.curvature_angle_deg)
        if target is None:
            target = point_at_arclength(poly, s_from_entry + cfg.tau)
    return ExpertLabel(LabelMode.ROAD_SEGMENT, (target,), (eid,))
