"""Expert labeling: look-ahead geometry, branching, coverage, correction."""
from __future__ import annotations

import math

import numpy as np
import pytest

from roadgraph import (EngineConfig, ExpertConfig, ExplorationState, LabelMode,
                       OffTrackError, Point, RoadGraph, expert_next,
                       force_correct, render_synthetic_world, run_detection,
                       wrap_expert_as_policy)
from roadgraph.expert import VERTEX_SNAP_TOL

from conftest import cross_graph, straight_line_graph


def fresh(g):
    return ExplorationState.for_graph(g)


# -- road-segment mode -----------------------------------------------------------

def test_straight_road_lookahead_is_tau():
    g = straight_line_graph(length=400.0)
    cfg = ExpertConfig()
    state = fresh(g)
    label = expert_next(g, state, Point(150.0, 100.0), cfg)
    assert label.mode is LabelMode.ROAD_SEGMENT
    (target,) = label.vertices
    assert Point(150.0, 100.0).dist(target) == pytest.approx(cfg.tau)


def test_terminal_rule_targets_exit_vertex():
    g = straight_line_graph(length=400.0)
    cfg = ExpertConfig()
    state = fresh(g)
    # establish direction first, then query with < tau remaining
    expert_next(g, state, Point(100.0, 100.0), cfg)
    label = expert_next(g, state, Point(430.0, 100.0), cfg)
    (target,) = label.vertices
    assert target == Point(450.0, 100.0)


def test_turning_point_override():
    g = RoadGraph()
    a = g.add_vertex(Point(0.0, 0.0))
    b = g.add_vertex(Point(120.0, 90.0))
    bend = Point(60.0, 0.0)  # 56 degree direction change at the bend
    g.add_edge(a, b, (Point(0.0, 0.0), bend, Point(120.0, 90.0)))
    state = fresh(g)
    label = expert_next(g, state, Point(30.0, 0.0), ExpertConfig())
    (target,) = label.vertices
    assert target == bend


def test_off_track_raises():
    g = straight_line_graph()
    with pytest.raises(OffTrackError):
        expert_next(g, fresh(g), Point(200.0, 200.0), ExpertConfig())


def test_off_track_tolerance_override():
    g = straight_line_graph()
    p = Point(200.0, 130.0)  # 30 px off the road
    expert_next(g, fresh(g), p, ExpertConfig(), xi=35.0)
    with pytest.raises(OffTrackError):
        expert_next(g, fresh(g), p, ExpertConfig(), xi=25.0)


# -- intersection mode -------------------------------------------------------------

def test_intersection_mode_one_label_per_unexplored_edge():
    g = cross_graph()
    cfg = ExpertConfig()
    label = expert_next(g, fresh(g), Point(200.0, 200.0), cfg)
    assert label.mode is LabelMode.INTERSECTION
    assert len(label.vertices) == 4
    for target in label.vertices:
        assert Point(200.0, 200.0).dist(target) == pytest.approx(cfg.tau_prime)


def test_short_edge_branch_targets_other_endpoint():
    g = RoadGraph()
    c = g.add_vertex(Point(100.0, 100.0))
    near = g.add_vertex(Point(110.0, 100.0))  # shorter than tau_prime
    far = g.add_vertex(Point(100.0, 300.0))
    g.add_edge(c, near)
    g.add_edge(c, far)
    label = expert_next(g, fresh(g), Point(100.0, 100.0), ExpertConfig())
    assert Point(110.0, 100.0) in label.vertices


def test_explored_edges_not_relabeled():
    g = cross_graph()
    cfg = ExpertConfig()
    state = fresh(g)
    for eid in list(g.edges)[:2]:
        e = g.edges[eid]
        state.advance(g, eid, e.a, e.length)
    label = expert_next(g, state, Point(200.0, 200.0), cfg)
    assert len(label.vertices) == 2


def test_vertex_snap_tolerance():
    g = cross_graph()
    label = expert_next(g, fresh(g), Point(203.0, 201.0), ExpertConfig())
    assert label.mode is LabelMode.INTERSECTION
    assert VERTEX_SNAP_TOL == 5.0


# -- force correction ----------------------------------------------------------------

def make_label(*pts):
    from roadgraph.expert import ExpertLabel
    return ExpertLabel(LabelMode.ROAD_SEGMENT, tuple(pts), ())


def test_force_correct_within_xi_keeps_prediction():
    label = make_label(Point(10.0, 10.0))
    executed, corrected = force_correct([Point(15.0, 10.0)], label, xi=20.0)
    assert not corrected
    assert executed == [Point(15.0, 10.0)]


def test_force_correct_strictly_greater_than_xi():
    label = make_label(Point(0.0, 0.0))
    at_limit, c1 = force_correct([Point(20.0, 0.0)], label, xi=20.0)
    assert not c1 and at_limit == [Point(20.0, 0.0)]
    beyond, c2 = force_correct([Point(20.000001, 0.0)], label, xi=20.0)
    assert c2 and beyond == [Point(0.0, 0.0)]


def test_force_correct_cardinality_mismatch_always_corrects():
    label = make_label(Point(0.0, 0.0), Point(5.0, 5.0))
    executed, corrected = force_correct([Point(0.0, 0.0)], label, xi=20.0)
    assert corrected
    assert executed == [Point(0.0, 0.0), Point(5.0, 5.0)]


def test_force_correct_empty():
    executed, corrected = force_correct([], make_label(), xi=20.0)
    assert executed == [] and not corrected


# -- coverage over full worlds ---------------------------------------------------------

@pytest.mark.parametrize("style,seed", [("grid", 0), ("grid", 7), ("ring", 3)])
def test_zero_noise_full_coverage(style, seed):
    w = render_synthetic_world(seed, 512, 512, style)
    policy = wrap_expert_as_policy(w.graph, ExpertConfig())
    run_detection(w.image, policy,
                  lambda _: (w.road_mask, w.intersection_mask), EngineConfig())
    state = policy.state
    total = sum(e.length for e in w.graph.edges.values())
    covered = sum(state.explored_length(w.graph, eid) for eid in w.graph.edges)
    assert covered == pytest.approx(total)
    assert state.fully_explored(w.graph)


def test_noise_statistics_match_sigma():
    # mean |noise| of a 2-d gaussian is sigma * sqrt(pi / 2)
    sigma = 3.0
    g = straight_line_graph(length=2000.0, y=100.0)
    policy = wrap_expert_as_policy(g, ExpertConfig(noise_sigma=sigma),
                                   noise_sigma=sigma, seed=0)
    rng = np.random.default_rng(1)
    errors = []
    for _ in range(1000):
        x = float(rng.uniform(100.0, 1900.0))
        state = ExplorationState.for_graph(g)
        policy.state = state
        from roadgraph import PolicyRequest
        req = PolicyRequest(roi_rgb=None, history_raster=None,
                            center=Point(x, 100.0))
        resp = policy(req)
        (pred,) = resp.predictions
        label = expert_next(g, ExplorationState.for_graph(g),
                            Point(x, 100.0), ExpertConfig())
        got = Point(x + pred.offset.x, 100.0 + pred.offset.y)
        errors.append(got.dist(label.vertices[0]))
    expected = sigma * math.sqrt(math.pi / 2.0)
    stderr = sigma * math.sqrt((4.0 - math.pi) / 2.0) / math.sqrt(len(errors))
    assert abs(np.mean(errors) - expected) < 3.0 * stderr
