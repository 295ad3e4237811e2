"""Deterministic synthetic aerial tiles with known road-network graphs.

Desk-scale stand-in for real imagery: a seeded generator produces a planar
road graph (jittered grid with diagonals and dead-end spurs), an RGB tile
with anti-aliased road strokes over textured background, and the two
ground-truth masks used for supervision and seeding.
"""
from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from scipy import ndimage

from .graph import Point, RoadGraph
from .raster import Tile, rasterize_graph

MIN_VERTEX_SPACING = 30.0
INTERSECTION_DISK_RADIUS = 4


class SyntheticWorld(NamedTuple):
    image: Tile
    graph: RoadGraph
    road_mask: Tile
    intersection_mask: Tile


def _grid_graph(rng: np.random.Generator, width: int, height: int) -> RoadGraph:
    spacing = 128
    margin = 56
    jitter = 22.0
    cols = max(2, (width - 2 * margin) // spacing + 1)
    rows = max(2, (height - 2 * margin) // spacing + 1)
    g = RoadGraph()
    ids = {}
    for r in range(rows):
        for c in range(cols):
            x = margin + c * spacing + rng.uniform(-jitter, jitter)
            y = margin + r * spacing + rng.uniform(-jitter, jitter)
            ids[(r, c)] = g.add_vertex(Point(x, y))
    for r in range(rows):
        for c in range(cols):
            if c + 1 < cols:
                g.add_edge(ids[(r, c)], ids[(r, c + 1)])
            if r + 1 < rows:
                g.add_edge(ids[(r, c)], ids[(r + 1, c)])

    # diagonals: forced at the four corner cells so corner vertices are not
    # degree 2, random elsewhere
    diag_cells = set()

    def add_diag(r: int, c: int, main: bool) -> None:
        a = ids[(r, c)] if main else ids[(r, c + 1)]
        b = ids[(r + 1, c + 1)] if main else ids[(r + 1, c)]
        if not g.has_edge_between(a, b):
            g.add_edge(a, b)
        diag_cells.add((r, c))

    add_diag(0, 0, True)
    add_diag(0, cols - 2, False)
    add_diag(rows - 2, 0, False)
    add_diag(rows - 2, cols - 2, True)
    for r in range(rows - 1):
        for c in range(cols - 1):
            if (r, c) in diag_cells:
                continue
            roll = rng.random()
            if roll < 0.15:
                add_diag(r, c, rng.random() < 0.5)

    # dead-end spurs give the world endpoint vertices (broken roads)
    for r in range(rows - 1):
        for c in range(cols - 1):
            if (r, c) in diag_cells:
                continue
            if rng.random() < 0.14:
                corners = [ids[(r, c)], ids[(r, c + 1)], ids[(r + 1, c)], ids[(r + 1, c + 1)]]
                anchor = corners[rng.integers(0, 4)]
                cx = np.mean([g.vertices[v].x for v in corners]) + rng.uniform(-10, 10)
                cy = np.mean([g.vertices[v].y for v in corners]) + rng.uniform(-10, 10)
                spur = g.add_vertex(Point(float(cx), float(cy)))
                g.add_edge(anchor, spur)

    # sparse removals, never leaving a degree-2 vertex behind
    removable = sorted(g.edges)
    rng.shuffle(removable)
    for eid in removable:
        if eid not in g.edges:
            continue
        if rng.random() > 0.2:
            continue
        e = g.edges[eid]
        if g.degree(e.a) - 1 in (0, 2) or g.degree(e.b) - 1 in (0, 2):
            continue
        g.remove_edge(eid)
    for vid in sorted(g.vertices):
        if g.degree(vid) == 0:
            g.remove_vertex(vid)
    return g


def _ring_graph(rng: np.random.Generator, width: int, height: int) -> RoadGraph:
    """Adversarial cyclic layout: one big loop plus two spurs."""
    n = 12
    cx, cy = width / 2.0, height / 2.0
    radius = 0.33 * min(width, height) + rng.uniform(-8, 8)
    g = RoadGraph()
    ring = []
    for i in range(n):
        ang = 2 * math.pi * i / n + rng.uniform(-0.02, 0.02)
        ring.append(g.add_vertex(Point(cx + radius * math.cos(ang),
                                       cy + radius * math.sin(ang))))
    for i in range(n):
        g.add_edge(ring[i], ring[(i + 1) % n])
    for i in (0, n // 2):
        p = g.vertices[ring[i]]
        dx, dy = p.x - cx, p.y - cy
        norm = math.hypot(dx, dy)
        tip = g.add_vertex(Point(p.x + 60 * dx / norm, p.y + 60 * dy / norm))
        g.add_edge(ring[i], tip)
    return g


def _textured_background(rng: np.random.Generator, width: int, height: int) -> np.ndarray:
    coarse = rng.normal(0.0, 1.0, size=(height // 16 + 1, width // 16 + 1))
    coarse = np.kron(coarse, np.ones((16, 16)))[:height, :width]
    coarse = ndimage.gaussian_filter(coarse, sigma=8)
    fine = rng.normal(0.0, 0.035, size=(height, width))
    base = 0.22 + 0.06 * coarse + fine
    return np.clip(base, 0.02, 0.55)


def render_synthetic_world(seed: int, width: int, height: int,
                           style: str = "grid") -> SyntheticWorld:
    """Seeded world: RGB image, ground-truth graph, road and junction masks.

    The graph has straight polylines, vertices at least 30 px apart and no
    degree-2 vertices (grid style), so it doubles as its own simplified
    form. The intersection mask marks degree>=3 and degree-1 vertices with
    filled disks of radius 4.
    """
    if width < 256 or height < 256:
        raise ValueError("world must be at least 256 x 256")
    rng = np.random.default_rng(seed)
    if style == "grid":
        g = _grid_graph(rng, width, height)
    elif style == "ring":
        g = _ring_graph(rng, width, height)
    else:
        raise ValueError(f"unknown style {style!r}")

    centerline = rasterize_graph(g, width, height, stroke=1).data > 0
    dist = ndimage.distance_transform_edt(~centerline)
    road_width = rng.uniform(4.0, 8.0)
    alpha = np.clip(road_width / 2 + 0.5 - dist, 0.0, 1.0)

    background = _textured_background(rng, width, height)
    road_tone = 0.78 + rng.normal(0.0, 0.02, size=(height, width))
    gray = background * (1 - alpha) + np.clip(road_tone, 0.6, 0.95) * alpha
    channel_gain = np.array([0.95, 1.0, 0.9])
    img = np.clip(gray[:, :, None] * channel_gain[None, None, :], 0.0, 1.0)

    road_mask = rasterize_graph(g, width, height, stroke=3)

    inter = np.zeros((height, width), dtype=np.float32)
    r = INTERSECTION_DISK_RADIUS
    for vid in sorted(g.vertices):
        if g.degree(vid) == 2 or g.degree(vid) == 0:
            continue
        p = g.vertices[vid]
        px, py = int(round(p.x)), int(round(p.y))
        for dy in range(-r, r + 1):
            for dx in range(-r, r + 1):
                if dx * dx + dy * dy <= r * r:
                    qx, qy = px + dx, py + dy
                    if 0 <= qx < width and 0 <= qy < height:
                        inter[qy, qx] = 1.0

    return SyntheticWorld(Tile(img.astype(np.float32)), g, road_mask, Tile(inter))
