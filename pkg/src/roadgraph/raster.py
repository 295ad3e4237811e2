"""Rasterization, ROI cropping and local-peak extraction."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np
from scipy import ndimage

from .graph import Point, RoadGraph


@dataclass(frozen=True)
class Tile:
    """Immutable raster: float data in [0, 1], shape (h, w) or (h, w, c)."""

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.data, dtype=np.float32)
        if arr.ndim == 2:
            pass
        elif arr.ndim == 3 and arr.shape[2] in (1, 3):
            if arr.shape[2] == 1:
                arr = arr[:, :, 0]
        else:
            raise ValueError(f"unsupported tile shape {arr.shape}")
        if arr.size and (arr.min() < -1e-6 or arr.max() > 1 + 1e-6):
            raise ValueError("tile values must lie in [0, 1]")
        arr = np.clip(arr, 0.0, 1.0)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.data.ndim == 2 else self.data.shape[2]


@dataclass(frozen=True)
class RoiSpec:
    center: Point
    side: int

    def __post_init__(self) -> None:
        if self.side <= 0 or self.side % 2 != 0:
            raise ValueError("ROI side must be positive and even")


def bresenham(x0: int, y0: int, x1: int, y1: int) -> Iterator[tuple[int, int]]:
    """Integer line stepping from (x0, y0) to (x1, y1), both inclusive."""
    dx = abs(x1 - x0)
    dy = abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx - dy
    x, y = x0, y0
    while True:
        yield x, y
        if x == x1 and y == y1:
            return
        e2 = 2 * err
        if e2 > -dy:
            err -= dy
            x += sx
        if e2 < dx:
            err += dx
            y += sy


def _disk_offsets(radius: int) -> list[tuple[int, int]]:
    return [(dx, dy)
            for dy in range(-radius, radius + 1)
            for dx in range(-radius, radius + 1)
            if dx * dx + dy * dy <= radius * radius]


def _stamp(canvas: np.ndarray, x: int, y: int, offsets) -> None:
    h, w = canvas.shape
    for dx, dy in offsets:
        px, py = x + dx, y + dy
        if 0 <= px < w and 0 <= py < h:
            canvas[py, px] = True


def draw_polyline(canvas: np.ndarray, pts: list[Point]) -> None:
    """Bresenham-draw a polyline onto a boolean canvas, clipping at borders."""
    h, w = canvas.shape
    for i in range(len(pts) - 1):
        x0, y0 = int(round(pts[i].x)), int(round(pts[i].y))
        x1, y1 = int(round(pts[i + 1].x)), int(round(pts[i + 1].y))
        if (y1, x1) < (y0, x0):
            # Bresenham is not symmetric under endpoint swap; canonical
            # direction makes the drawing independent of edge orientation
            x0, y0, x1, y1 = x1, y1, x0, y0
        for x, y in bresenham(x0, y0, x1, y1):
            if 0 <= x < w and 0 <= y < h:
                canvas[y, x] = True


def rasterize_graph(g: RoadGraph, width: int, height: int, stroke: int = 1) -> Tile:
    """Binary mask of the graph: Bresenham polylines plus vertex disks.

    ``stroke`` > 1 dilates the drawing with a disk of radius stroke // 2;
    stroke 1 leaves the one-pixel-wide centerline untouched.
    """
    if stroke < 1:
        raise ValueError("stroke must be >= 1")
    canvas = np.zeros((height, width), dtype=bool)
    for eid in sorted(g.edges):
        draw_polyline(canvas, list(g.edges[eid].polyline))
    radius = stroke // 2
    if radius > 0:
        struct = np.zeros((2 * radius + 1, 2 * radius + 1), dtype=bool)
        for dx, dy in _disk_offsets(radius):
            struct[dy + radius, dx + radius] = True
        canvas = ndimage.binary_dilation(canvas, structure=struct)
    offsets = _disk_offsets(radius)
    for vid in sorted(g.vertices):
        p = g.vertices[vid]
        _stamp(canvas, int(round(p.x)), int(round(p.y)), offsets)
    return Tile(canvas.astype(np.float32))


def crop_window(arr: np.ndarray, center: Point, side: int) -> np.ndarray:
    """Zero-padded side x side window of an array, centered at the rounded
    center. Works for (h, w) and (h, w, c) arrays."""
    half = side // 2
    cx = int(round(center.x))
    cy = int(round(center.y))
    y0, y1 = cy - half, cy + half
    x0, x1 = cx - half, cx + half
    shape = (side, side) + arr.shape[2:]
    out = np.zeros(shape, dtype=np.float32)
    sy0, sy1 = max(0, y0), min(arr.shape[0], y1)
    sx0, sx1 = max(0, x0), min(arr.shape[1], x1)
    if sy0 < sy1 and sx0 < sx1:
        out[sy0 - y0:sy1 - y0, sx0 - x0:sx1 - x0] = arr[sy0:sy1, sx0:sx1]
    return out


def crop_roi(t: Tile, spec: RoiSpec) -> Tile:
    """Zero-padded side x side crop centered at the rounded ROI center."""
    return Tile(crop_window(t.data, spec.center, spec.side))


def extract_peaks(prob: Tile, threshold: float = 0.5,
                  nms_radius: float = 8.0) -> list[Point]:
    """Greedy NMS over local maxima, highest value first, ties by (y, x).

    A pixel qualifies when its value is >= threshold and >= each of its 8
    neighbours; accepted peaks suppress later candidates closer than
    ``nms_radius``. The result is sorted by descending value.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must be in [0, 1]")
    if nms_radius < 1:
        raise ValueError("nms_radius must be >= 1")
    arr = prob.data
    if arr.ndim != 2:
        raise ValueError("extract_peaks expects a 1-channel tile")
    if arr.size == 0:
        return []
    local_max = ndimage.maximum_filter(arr, size=3, mode="constant", cval=0.0)
    ys, xs = np.nonzero((arr >= threshold) & (arr >= local_max))
    if len(ys) == 0:
        return []
    vals = arr[ys, xs]
    order = np.lexsort((xs, ys, -vals))
    accepted: list[tuple[float, float]] = []
    out: list[Point] = []
    r2 = nms_radius * nms_radius
    for i in order:
        x, y = float(xs[i]), float(ys[i])
        if any((x - ax) ** 2 + (y - ay) ** 2 < r2 for ax, ay in accepted):
            continue
        accepted.append((x, y))
        out.append(Point(x, y))
    return out
