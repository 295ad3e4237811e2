"""Iterative detection agent: seed, probe, branch, terminate.

The engine owns the candidate-vertex stack and the history graph; the
per-step vertex prediction is delegated to a policy object (the in-process
expert oracle, or a remote process behind the bridge protocol).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .expert import ExpertConfig, ExplorationState, OffTrackError, expert_next, force_correct
from .graph import (Point, RoadGraph, add_step_edge, consolidate_graph,
                    simplify_graph, snap_vertex)
from .raster import Tile, crop_roi, crop_window, draw_polyline, extract_peaks, RoiSpec


class PolicyError(RuntimeError):
    """A policy response violated the interface contract."""


@dataclass(frozen=True)
class EngineConfig:
    roi_side: int = 256
    prob_threshold: float = 0.5
    eps_merge: float = 5.0
    max_steps_per_probe: int = 5000
    max_steps_total: int = 200000
    n_queries: int = 10
    peak_threshold: float = 0.5
    peak_nms_radius: float = 8.0
    # steps that add no new geometry (predictions merging back into
    # existing vertices and edges) are wasted; noisy policies redraw, so
    # allow a burst of them before giving up on the probe
    max_stationary_steps: int = 30
    # post-run stitching: join a vertex to geometry within stitch_radius
    # when the graph-route detour exceeds stitch_min_detour (two probes
    # drawing the same road leave touching but unlinked strands)
    stitch_radius: Optional[float] = None   # None: use eps_merge
    stitch_min_detour: float = 120.0

    def __post_init__(self) -> None:
        if self.roi_side < 64 or self.roi_side % 2 != 0:
            raise ValueError("roi_side must be even and >= 64")
        if not 0.0 <= self.prob_threshold <= 1.0:
            raise ValueError("prob_threshold must be in [0, 1]")
        if self.max_steps_per_probe <= 0 or self.max_steps_total <= 0:
            raise ValueError("step guards must be positive")
        if self.max_stationary_steps < 1:
            raise ValueError("max_stationary_steps must be >= 1")
        if self.eps_merge < 0:
            raise ValueError("eps_merge must be >= 0")
        if self.stitch_radius is not None and self.stitch_radius < 0:
            raise ValueError("stitch_radius must be >= 0")
        if self.stitch_min_detour <= 0:
            raise ValueError("stitch_min_detour must be positive")


@dataclass(frozen=True)
class VertexPrediction:
    offset: Point  # relative to the ROI center
    prob: float


@dataclass(frozen=True)
class PolicyRequest:
    roi_rgb: Tile
    history_raster: Tile
    center: Point


@dataclass(frozen=True)
class PolicyResponse:
    predictions: tuple[VertexPrediction, ...]


Policy = Callable[[PolicyRequest], PolicyResponse]
SegProvider = Callable[[Tile], tuple[Tile, Tile]]


@dataclass
class AgentState:
    history: RoadGraph
    stack: list[Point] = field(default_factory=list)
    current: Optional[Point] = None
    current_id: Optional[int] = None
    steps_total: int = 0
    steps_on_current_probe: int = 0
    on_new_edge: Optional[Callable[[Point, Point], None]] = None


@dataclass(frozen=True)
class StopProbe:
    pass


@dataclass(frozen=True)
class Stay:
    """The only prediction merged back into the current vertex."""


@dataclass(frozen=True)
class Move:
    vertex: Point
    vertex_id: int


@dataclass(frozen=True)
class Branch:
    vertices: tuple[Point, ...]


Action = Union[StopProbe, Stay, Move, Branch]


@dataclass
class DetectionResult:
    graph: RoadGraph          # simplified, polylines retained
    raw_graph: RoadGraph      # the history graph as built
    steps_total: int
    truncated: bool


def seed_initial_vertices(intersection_map: Tile, cfg: EngineConfig) -> list[Point]:
    """Candidate initial vertices as a stack, highest confidence on top."""
    peaks = extract_peaks(intersection_map, cfg.peak_threshold, cfg.peak_nms_radius)
    return list(reversed(peaks))


def validate_response(resp: PolicyResponse, cfg: EngineConfig) -> tuple[VertexPrediction, ...]:
    preds = tuple(resp.predictions)
    if len(preds) > cfg.n_queries:
        raise PolicyError(f"{len(preds)} predictions exceed the query budget "
                          f"of {cfg.n_queries}")
    half = cfg.roi_side / 2
    for p in preds:
        if not 0.0 <= p.prob <= 1.0:
            raise PolicyError(f"probability {p.prob} outside [0, 1]")
        if abs(p.offset.x) > half or abs(p.offset.y) > half:
            raise PolicyError(f"offset {p.offset} outside the ROI")
    return preds


def _dedupe(preds: list[tuple[Point, float]], eps: float) -> list[tuple[Point, float]]:
    # keep the higher-probability member of any pair closer than eps
    ordered = sorted(preds, key=lambda t: (-t[1], t[0].y, t[0].x))
    kept: list[tuple[Point, float]] = []
    for pt, prob in ordered:
        if all(pt.dist(k) > eps for k, _ in kept):
            kept.append((pt, prob))
    return kept


def step(state: AgentState, preds: Sequence[VertexPrediction],
         cfg: EngineConfig) -> Action:
    """One decision: stop the probe, move along the road, or branch."""
    if state.current is None or state.current_id is None:
        raise ValueError("agent has no current vertex")
    valid = [(Point(state.current.x + p.offset.x, state.current.y + p.offset.y),
              p.prob)
             for p in preds if p.prob >= cfg.prob_threshold]
    valid = _dedupe(valid, cfg.eps_merge)
    if not valid:
        return StopProbe()
    g = state.history
    if len(valid) == 1:
        pt = valid[0][0]
        before = g.vertices[state.current_id]
        _, vid, warning = add_step_edge(g, state.current_id, pt, cfg.eps_merge)
        if warning and vid == state.current_id:
            return Stay()
        if not warning and state.on_new_edge is not None:
            state.on_new_edge(before, g.vertices[vid])
        return Move(g.vertices[vid], vid)
    targets = []
    for pt, _ in valid:
        before = g.vertices[state.current_id]
        _, vid, warning = add_step_edge(g, state.current_id, pt, cfg.eps_merge)
        if warning and vid == state.current_id:
            continue
        if not warning and state.on_new_edge is not None:
            state.on_new_edge(before, g.vertices[vid])
        targets.append(g.vertices[vid])
    if not targets:
        # every branch target merged back into the current vertex; let the
        # policy redraw instead of abandoning the junction
        return Stay()
    return Branch(tuple(targets))


def run_detection(image: Tile, policy: Policy, seg_provider: SegProvider,
                  cfg: EngineConfig) -> DetectionResult:
    """Run the full iterative loop over one tile.

    Seeds come from local peaks of the intersection map; each seed starts a
    probe that moves step by step until the policy reports no road ahead or
    branches. Detection halts when the stack is exhausted or a step guard
    fires (the latter sets the truncation flag).
    """
    if image.channels != 3:
        raise ValueError("expected a 3-channel image tile")
    _road_map, intersection_map = seg_provider(image)
    height, width = image.height, image.width

    history = RoadGraph()
    canvas = np.zeros((height, width), dtype=bool)

    state = AgentState(history=history,
                       stack=seed_initial_vertices(intersection_map, cfg))
    state.on_new_edge = lambda a, b: draw_polyline(canvas, [a, b])

    truncated = False
    while state.stack and not truncated:
        seed = state.stack.pop()
        vid = snap_vertex(history, seed, cfg.eps_merge)
        if vid is None:
            vid = history.add_vertex(seed)
        state.current_id = vid
        state.current = history.vertices[vid]
        state.steps_on_current_probe = 0
        stationary = 0

        while True:
            if state.steps_total >= cfg.max_steps_total:
                truncated = True
                break
            if state.steps_on_current_probe >= cfg.max_steps_per_probe:
                truncated = True
                break
            spec = RoiSpec(state.current, cfg.roi_side)
            request = PolicyRequest(
                roi_rgb=crop_roi(image, spec),
                history_raster=Tile(crop_window(canvas, state.current,
                                                cfg.roi_side)),
                center=state.current,
            )
            state.steps_total += 1
            state.steps_on_current_probe += 1
            try:
                preds = validate_response(policy(request), cfg)
            except PolicyError:
                truncated = True
                break
            edges_before = history.num_edges()
            action = step(state, preds, cfg)
            if history.num_edges() > edges_before:
                stationary = 0
            else:
                stationary += 1
                if stationary >= cfg.max_stationary_steps:
                    break
            if isinstance(action, StopProbe):
                break
            if isinstance(action, Stay):
                continue
            if isinstance(action, Branch):
                state.stack.extend(action.vertices)
                break
            state.current = action.vertex
            state.current_id = action.vertex_id

    radius = cfg.eps_merge if cfg.stitch_radius is None else cfg.stitch_radius
    consolidate_graph(history, radius, cfg.stitch_min_detour)
    return DetectionResult(graph=simplify_graph(history), raw_graph=history,
                           steps_total=state.steps_total, truncated=truncated)


class ExpertOraclePolicy:
    """Policy backed by the ground-truth expert; optionally noisy.

    Zero-noise responses equal the expert labels exactly with probability
    1.0, which makes the whole engine verifiable without any network. With
    noise enabled, predictions are labels plus per-coordinate Gaussian
    noise, and force correction (when on) swaps drifting predictions back
    to the labels before they are executed.
    """

    def __init__(self, gt: RoadGraph, cfg: ExpertConfig, *,
                 noise_sigma: float = 0.0, seed: Optional[int] = None,
                 force_correction: bool = False,
                 off_track_xi: Optional[float] = None,
                 recorder: Optional[Callable] = None):
        self.gt = gt
        self.cfg = cfg
        self.noise_sigma = noise_sigma
        self.force_correction = force_correction
        self.off_track_xi = off_track_xi
        self.recorder = recorder
        self.state = ExplorationState.for_graph(gt)
        self.rng = np.random.default_rng(seed)

    def __call__(self, request: PolicyRequest) -> PolicyResponse:
        try:
            label = expert_next(self.gt, self.state, request.center, self.cfg,
                                xi=self.off_track_xi)
        except OffTrackError:
            return PolicyResponse(())
        vertices = list(label.vertices)
        if self.noise_sigma > 0 and vertices:
            noise = self.rng.normal(0.0, self.noise_sigma, size=(len(vertices), 2))
            noisy = [Point(v.x + float(n[0]), v.y + float(n[1]))
                     for v, n in zip(vertices, noise)]
        else:
            noisy = vertices
        if self.force_correction:
            executed, corrected = force_correct(noisy, label, self.cfg.xi)
        else:
            executed, corrected = noisy, False
        if self.recorder is not None:
            self.recorder(request, label, executed, corrected)
        half = 0.0
        if request.roi_rgb is not None:
            half = request.roi_rgb.width / 2
        preds = []
        for v in executed:
            dx = v.x - request.center.x
            dy = v.y - request.center.y
            if half:
                dx = max(-half, min(half, dx))
                dy = max(-half, min(half, dy))
            preds.append(VertexPrediction(Point(dx, dy), 1.0))
        return PolicyResponse(tuple(preds))


def wrap_expert_as_policy(gt: RoadGraph, cfg: ExpertConfig, *,
                          noise_sigma: float = 0.0,
                          seed: Optional[int] = None,
                          force_correction: bool = False) -> ExpertOraclePolicy:
    """Ground-truth-backed policy for network-free end-to-end runs."""
    return ExpertOraclePolicy(gt, cfg, noise_sigma=noise_sigma, seed=seed,
                              force_correction=force_correction)
