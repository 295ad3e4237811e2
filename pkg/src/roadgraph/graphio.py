"""Graph and raster file formats.

JSON is the canonical interchange (it can carry per-edge polylines); the
legacy vertex/edge text layout is import-only. Rasters are 8-bit PNG,
binary masks stored as {0, 255}.
"""
from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Union

import numpy as np
from PIL import Image

from .graph import GraphError, Point, RoadGraph

log = logging.getLogger(__name__)

GRAPH_FORMAT_VERSION = 1

PathLike = Union[str, Path]


class DataError(ValueError):
    """Unreadable or inconsistent input data."""


def save_graph(g: RoadGraph, path: PathLike) -> None:
    doc = {
        "version": GRAPH_FORMAT_VERSION,
        "vertices": [{"id": vid, "x": p.x, "y": p.y}
                     for vid, p in sorted(g.vertices.items())],
        "edges": [{"a": e.a, "b": e.b,
                   "polyline": [[q.x, q.y] for q in e.polyline]}
                  for _, e in sorted(g.edges.items())],
    }
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True))


def _normalize(vertices: dict[int, Point],
               edges: list[tuple[int, int, list[Point]]]) -> RoadGraph:
    g = RoadGraph()
    remap = {}
    for vid, p in sorted(vertices.items()):
        remap[vid] = g.add_vertex(p)
    dropped = 0
    deduped = 0
    for a, b, poly in edges:
        if a not in remap or b not in remap:
            raise DataError(f"edge ({a}, {b}) references a missing vertex")
        if a == b or vertices[a].dist(vertices[b]) == 0 and len(poly) <= 2:
            dropped += 1
            continue
        try:
            g.add_edge(remap[a], remap[b], poly or None)
        except GraphError:
            deduped += 1
    if dropped or deduped:
        log.info("graph normalization dropped %d degenerate and %d duplicate "
                 "edges", dropped, deduped)
    return g


def load_graph_json(path: PathLike) -> RoadGraph:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("version") != GRAPH_FORMAT_VERSION:
        raise DataError(f"{path}: unsupported graph format version")
    try:
        vertices = {int(v["id"]): Point(float(v["x"]), float(v["y"]))
                    for v in doc["vertices"]}
        edges = []
        for e in doc["edges"]:
            poly = [Point(float(x), float(y))
                    for x, y in e.get("polyline") or []]
            edges.append((int(e["a"]), int(e["b"]), poly))
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: malformed graph record: {exc}") from exc
    return _normalize(vertices, edges)


def load_graph_text(path: PathLike) -> RoadGraph:
    """Legacy text import: "x y" vertex lines, a blank line, "i j" edge lines.

    Vertex ids are implicit 0-based line positions. Errors carry the
    1-based line number.
    """
    lines = Path(path).read_text().splitlines()
    vertices: dict[int, Point] = {}
    edges: list[tuple[int, int, list[Point]]] = []
    in_edges = False
    for lineno, line in enumerate(lines, start=1):
        text = line.strip()
        if not text:
            in_edges = True
            continue
        parts = text.split()
        if len(parts) != 2:
            raise DataError(f"{path}:{lineno}: expected two fields, "
                            f"got {len(parts)}")
        if not in_edges:
            try:
                x, y = float(parts[0]), float(parts[1])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: bad vertex "
                                f"coordinates") from exc
            vertices[len(vertices)] = Point(x, y)
        else:
            try:
                i, j = int(parts[0]), int(parts[1])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: bad edge indices") from exc
            if i not in vertices or j not in vertices:
                raise DataError(f"{path}:{lineno}: edge ({i}, {j}) references "
                                f"a vertex that does not exist")
            edges.append((i, j, []))
    return _normalize(vertices, edges)


def load_graph(path: PathLike, fmt: str = "json") -> RoadGraph:
    if fmt == "json":
        return load_graph_json(path)
    if fmt == "roadtracer-text":
        return load_graph_text(path)
    raise DataError(f"unknown graph format {fmt!r}")


# ---------------------------------------------------------------------------
# rasters

def save_png(arr_01: np.ndarray, path: PathLike) -> None:
    """Write a [0, 1] float array as an 8-bit PNG (round half up)."""
    arr = np.asarray(arr_01, dtype=np.float64)
    data = np.floor(arr * 255.0 + 0.5).clip(0, 255).astype(np.uint8)
    Image.fromarray(data).save(Path(path))


def load_png(path: PathLike) -> np.ndarray:
    """Read an 8-bit PNG back to float32 in [0, 1]."""
    try:
        with Image.open(Path(path)) as img:
            arr = np.asarray(img, dtype=np.uint8)
    except (OSError, SyntaxError) as exc:
        raise DataError(f"{path}: {exc}") from exc
    return arr.astype(np.float32) / 255.0
