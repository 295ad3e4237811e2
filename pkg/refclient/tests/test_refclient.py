"""Reference client: framing, PNG reader, expert port, stdio loop."""
from __future__ import annotations

import io
import struct
import subprocess
import sys
import zlib
from pathlib import Path

import pytest

refclient = pytest.importorskip("refclient")

from refclient.expert import (ExpertConfig, ExplorationState, LabelMode,
                              expert_next)
from refclient.png import PngError, read_png
from refclient.protocol import (PROTOCOL_VERSION, ProtocolError,
                                encode_frame, read_frame, validate_message)
from refclient.roadnet import Point, RoadGraph

REPO_FIXTURES = Path(__file__).resolve().parents[2] / "tests" / "fixtures" / "protocol"


# -- framing -------------------------------------------------------------------

def test_frame_round_trip():
    msg = {"kind": "Bye", "id": 7, "extra": [1, 2.5, "x"]}
    assert read_frame(io.BytesIO(encode_frame(msg))) == msg


def test_frame_errors():
    assert read_frame(io.BytesIO(b"")) is None
    with pytest.raises(ProtocolError):
        read_frame(io.BytesIO(b"\x00"))
    with pytest.raises(ProtocolError):
        read_frame(io.BytesIO(struct.pack(">I", 5) + b"abc"))
    with pytest.raises(ProtocolError):
        validate_message({"kind": "Nope", "id": 0})


def test_golden_fixtures_byte_compatible():
    fixtures = sorted(REPO_FIXTURES.glob("*.bin"))
    if not fixtures:
        pytest.skip("host fixture directory not present")
    assert len(fixtures) == 8
    for path in fixtures:
        raw = path.read_bytes()
        message = validate_message(read_frame(io.BytesIO(raw)))
        assert encode_frame(message) == raw


# -- png -----------------------------------------------------------------------

def make_png(width, height, rows, color=0):
    def chunk(ctype, payload):
        body = ctype + payload
        return (struct.pack(">I", len(payload)) + body
                + struct.pack(">I", zlib.crc32(body)))

    ihdr = struct.pack(">IIBBBBB", width, height, 8, color, 0, 0, 0)
    raw = b"".join(bytes([f]) + line for f, line in rows)
    return (b"\x89PNG\r\n\x1a\n" + chunk(b"IHDR", ihdr)
            + chunk(b"IDAT", zlib.compress(raw)) + chunk(b"IEND", b""))


def test_png_filters(tmp_path):
    # rows exercise None, Sub, Up, Average and Paeth filters
    rows = [(0, bytes([10, 20, 30, 40])),
            (1, bytes([5, 5, 5, 5])),       # 5 10 15 20
            (2, bytes([1, 1, 1, 1])),       # 6 11 16 21
            (3, bytes([0, 0, 0, 0])),       # 3 7 11 16
            (4, bytes([0, 0, 0, 0]))]       # 3 7 11 16
    path = tmp_path / "t.png"
    path.write_bytes(make_png(4, 5, rows))
    w, h, c, pixels = read_png(path)
    assert (w, h, c) == (4, 5, 1)
    assert pixels == bytes([10, 20, 30, 40, 5, 10, 15, 20, 6, 11, 16, 21,
                            3, 7, 11, 16, 3, 7, 11, 16])


def test_png_rejects_garbage(tmp_path):
    path = tmp_path / "bad.png"
    path.write_bytes(b"not a png at all")
    with pytest.raises(PngError):
        read_png(path)


# -- expert port ---------------------------------------------------------------

def line_graph(length=400.0):
    g = RoadGraph()
    a = g.add_vertex(Point(50.0, 100.0))
    b = g.add_vertex(Point(50.0 + length, 100.0))
    g.add_edge(a, b)
    return g


def test_expert_lookahead_is_tau():
    g = line_graph()
    state = ExplorationState.for_graph(g)
    cfg = ExpertConfig()
    expert_next(g, state, Point(50.0, 100.0), cfg)  # vertex turn
    label = expert_next(g, state, Point(120.0, 100.0), cfg)
    assert label.mode is LabelMode.ROAD_SEGMENT
    (pt,) = label.vertices
    assert pt == Point(160.0, 100.0)


def test_expert_intersection_branches():
    g = RoadGraph()
    c = g.add_vertex(Point(200.0, 200.0))
    for dx, dy in ((150.0, 0.0), (-150.0, 0.0), (0.0, 150.0), (0.0, -150.0)):
        v = g.add_vertex(Point(200.0 + dx, 200.0 + dy))
        g.add_edge(c, v)
    state = ExplorationState.for_graph(g)
    label = expert_next(g, state, Point(200.0, 200.0), ExpertConfig())
    assert label.mode is LabelMode.INTERSECTION
    assert len(label.vertices) == 4
    assert all(Point(200.0, 200.0).dist(p) == pytest.approx(20.0)
               for p in label.vertices)


# -- stdio loop ----------------------------------------------------------------

def talk(frames, args=("--stub",)):
    proc = subprocess.run([sys.executable, "-m", "refclient", *args],
                          input=b"".join(encode_frame(f) for f in frames),
                          capture_output=True, timeout=30)
    replies = []
    stream = io.BytesIO(proc.stdout)
    while (msg := read_frame(stream)) is not None:
        replies.append(msg)
    return proc.returncode, replies


def test_stub_session():
    hello = {"kind": "Hello", "id": 0, "version": PROTOCOL_VERSION,
             "roi_side": 256, "n_queries": 10, "extensions": {}}
    segment = {"kind": "Segment", "id": 1,
               "image": {"width": 2, "height": 2, "channels": 3,
                         "data": "AAAAAAAAAAAAAAAA"}}
    predict = {"kind": "Predict", "id": 2,
               "roi": {"width": 2, "height": 2, "channels": 3,
                       "data": "AAAAAAAAAAAAAAAA"},
               "history": {"width": 2, "height": 2, "channels": 1,
                           "data": "AAAAAA=="},
               "center": {"x": 10.0, "y": 20.0}}
    code, replies = talk([hello, segment, predict, {"kind": "Bye", "id": 3}])
    assert code == 0
    assert [r["kind"] for r in replies] == ["Hello", "SegmentResult",
                                            "PredictResult"]
    assert replies[0]["version"] == PROTOCOL_VERSION
    assert replies[1]["id"] == 1
    assert replies[2] == {"kind": "PredictResult", "id": 2, "predictions": []}


def test_version_mismatch_refused():
    hello = {"kind": "Hello", "id": 0, "version": 99, "roi_side": 256}
    code, replies = talk([hello])
    assert code == 2
    assert replies[0]["kind"] == "Error"
    assert replies[0]["code"] == "version"


def test_garbage_input_exits_cleanly():
    proc = subprocess.run([sys.executable, "-m", "refclient", "--stub"],
                          input=b"\x00\x00\x00\x05junk!",
                          capture_output=True, timeout=30)
    assert proc.returncode == 2
    assert b"Traceback" not in proc.stderr
