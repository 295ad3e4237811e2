"""Rasterization, cropping and peak extraction."""
from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from roadgraph import Point, RoadGraph, Tile, crop_roi, extract_peaks, rasterize_graph
from roadgraph.raster import RoiSpec, bresenham, crop_window, draw_polyline

coords = st.integers(min_value=-40, max_value=40)


def test_tile_validates_range():
    with pytest.raises(ValueError):
        Tile(np.full((4, 4), 2.0))
    t = Tile(np.zeros((4, 4)))
    assert t.channels == 1 and t.width == 4 and t.height == 4


def test_tile_is_immutable():
    t = Tile(np.zeros((4, 4)))
    with pytest.raises(ValueError):
        t.data[0, 0] = 1.0


@given(coords, coords, coords, coords)
def test_bresenham_endpoints_and_connectivity(x0, y0, x1, y1):
    pts = list(bresenham(x0, y0, x1, y1))
    assert pts[0] == (x0, y0)
    assert pts[-1] == (x1, y1)
    for (ax, ay), (bx, by) in zip(pts, pts[1:]):
        assert max(abs(ax - bx), abs(ay - by)) == 1


def test_draw_polyline_marks_segments():
    canvas = np.zeros((20, 20), dtype=bool)
    draw_polyline(canvas, [Point(2.0, 2.0), Point(10.0, 2.0), Point(10.0, 9.0)])
    assert canvas[2, 2] and canvas[2, 10] and canvas[9, 10]
    assert canvas[2, 5] and canvas[5, 10]


def test_rasterize_graph_stroke_width():
    g = RoadGraph()
    a = g.add_vertex(Point(10.0, 10.0))
    b = g.add_vertex(Point(30.0, 10.0))
    g.add_edge(a, b)
    thin = rasterize_graph(g, 40, 40, stroke=1)
    thick = rasterize_graph(g, 40, 40, stroke=8)
    assert thin.data.sum() < thick.data.sum()
    assert thin.data[10, 20] == 1.0
    assert thick.data[13, 20] == 1.0  # widened by the stroke radius


def test_crop_window_zero_pads_at_border():
    arr = np.ones((16, 16), dtype=np.float32)
    out = crop_window(arr, Point(0.0, 0.0), 8)
    assert out.shape == (8, 8)
    assert out[:4, :4].sum() == 0.0  # off-image quadrant
    assert out[4:, 4:].sum() == 16.0


def test_crop_roi_center_alignment():
    data = np.zeros((32, 32), dtype=np.float32)
    data[7, 9] = 1.0
    t = Tile(data)
    roi = crop_roi(t, RoiSpec(Point(9.0, 7.0), 8))
    assert roi.data[4, 4] == 1.0


def test_extract_peaks_threshold_and_order():
    data = np.zeros((32, 32), dtype=np.float32)
    data[5, 5] = 0.9
    data[20, 20] = 0.7
    data[28, 4] = 0.3  # below threshold
    peaks = extract_peaks(Tile(data), threshold=0.5, nms_radius=4.0)
    assert peaks == [Point(5.0, 5.0), Point(20.0, 20.0)]


def test_extract_peaks_nms_suppression():
    data = np.zeros((32, 32), dtype=np.float32)
    data[10, 10] = 0.9
    data[10, 14] = 0.8  # within radius of the stronger peak
    data[10, 25] = 0.8
    peaks = extract_peaks(Tile(data), threshold=0.5, nms_radius=8.0)
    assert Point(10.0, 10.0) in peaks
    assert Point(14.0, 10.0) not in peaks
    assert Point(25.0, 10.0) in peaks


def test_extract_peaks_empty_map():
    assert extract_peaks(Tile(np.zeros((8, 8)))) == []


@settings(max_examples=30)
@given(st.integers(min_value=0, max_value=1000))
def test_peaks_respect_min_separation(seed):
    rng = np.random.default_rng(seed)
    data = rng.uniform(0.0, 1.0, size=(48, 48)).astype(np.float32)
    peaks = extract_peaks(Tile(data), threshold=0.5, nms_radius=6.0)
    for i, p in enumerate(peaks):
        for q in peaks[i + 1:]:
            assert p.dist(q) >= 6.0
