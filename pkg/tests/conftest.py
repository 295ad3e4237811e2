"""Shared fixtures: small synthetic worlds and deterministic RNGs."""
from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from roadgraph import Point, RoadGraph, render_synthetic_world

settings.register_profile(
    "suite", deadline=None,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("suite")


@pytest.fixture(scope="session")
def small_world():
    return render_synthetic_world(3, 512, 512, "grid")


@pytest.fixture(scope="session")
def ring_world():
    return render_synthetic_world(1, 512, 512, "ring")


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)


def straight_line_graph(length: float = 400.0, y: float = 100.0) -> RoadGraph:
    g = RoadGraph()
    a = g.add_vertex(Point(50.0, y))
    b = g.add_vertex(Point(50.0 + length, y))
    g.add_edge(a, b)
    return g


def cross_graph() -> RoadGraph:
    """A plus-shaped junction: four arms of length 150 meeting at (200, 200)."""
    g = RoadGraph()
    c = g.add_vertex(Point(200.0, 200.0))
    for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        tip = g.add_vertex(Point(200.0 + 150.0 * dx, 200.0 + 150.0 * dy))
        g.add_edge(c, tip)
    return g


def random_graph(rng: np.random.Generator, n_vertices: int = 8,
                 span: float = 400.0) -> RoadGraph:
    """Random connected planar-ish graph with straight edges, spacing >= 20."""
    g = RoadGraph()
    pts: list[Point] = []
    while len(pts) < n_vertices:
        cand = Point(float(rng.uniform(10, span)), float(rng.uniform(10, span)))
        if all(cand.dist(p) > 20 for p in pts):
            pts.append(cand)
    ids = [g.add_vertex(p) for p in pts]
    for i in range(1, len(ids)):
        j = int(rng.integers(0, i))
        g.add_edge(ids[i], ids[j])
    extra = int(rng.integers(0, n_vertices))
    for _ in range(extra):
        i, j = rng.integers(0, n_vertices, size=2)
        if i != j and not g.has_edge_between(ids[int(i)], ids[int(j)]):
            g.add_edge(ids[int(i)], ids[int(j)])
    return g
