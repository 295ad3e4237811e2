"""Wire protocol for out-of-process policies.

A remote process (typically a trained model wrapped in a thin client) can
serve both the segmentation maps and the per-step vertex predictions. The
framing is deliberately simple so clients are easy to write in any
language: each message is a 4-byte big-endian length prefix followed by
one UTF-8 JSON object. Images travel as base64 of row-major 8-bit data.

Session rules: exactly one in-flight request, the response must echo the
request id, and the first exchange is a Hello carrying the protocol
version and the ROI side length.
"""
from __future__ import annotations

import base64
import json
import socket
import struct
import subprocess
import time
from dataclasses import dataclass, field
from typing import BinaryIO, Optional

import numpy as np

from .engine import (EngineConfig, PolicyError, PolicyRequest, PolicyResponse,
                     VertexPrediction, validate_response)
from .graph import Point
from .raster import Tile

PROTOCOL_VERSION = 1
HANDSHAKE_TIMEOUT = 30.0
MAX_FRAME_BYTES = 64 * 1024 * 1024

KINDS = ("Hello", "Segment", "SegmentResult", "Predict", "PredictResult",
         "Error", "Bye")


class ProtocolError(RuntimeError):
    """Malformed frame, schema violation, or broken session discipline."""


# ---------------------------------------------------------------------------
# framing

def encode_frame(message: dict) -> bytes:
    body = json.dumps(message, separators=(",", ":"), sort_keys=True)
    data = body.encode("utf-8")
    if len(data) > MAX_FRAME_BYTES:
        raise ProtocolError(f"frame of {len(data)} bytes exceeds the limit")
    return struct.pack(">I", len(data)) + data


def read_frame(stream: BinaryIO) -> Optional[dict]:
    """Read one framed message; None on clean EOF at a frame boundary."""
    header = stream.read(4)
    if not header:
        return None
    if len(header) < 4:
        raise ProtocolError("truncated length prefix")
    (length,) = struct.unpack(">I", header)
    if length > MAX_FRAME_BYTES:
        raise ProtocolError(f"declared frame length {length} exceeds the limit")
    data = b""
    while len(data) < length:
        chunk = stream.read(length - len(data))
        if not chunk:
            raise ProtocolError("stream closed mid-frame")
        data += chunk
    try:
        message = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"frame is not valid UTF-8 JSON: {exc}") from exc
    if not isinstance(message, dict):
        raise ProtocolError("frame payload must be a JSON object")
    return message


def validate_message(message: dict) -> dict:
    kind = message.get("kind")
    if kind not in KINDS:
        raise ProtocolError(f"unknown message kind {kind!r}")
    if not isinstance(message.get("id"), int):
        raise ProtocolError("message id must be an integer")
    return message


# ---------------------------------------------------------------------------
# image payloads

def encode_tile(t: Tile) -> dict:
    arr = np.round(t.data * 255.0).astype(np.uint8)
    return {
        "width": t.width,
        "height": t.height,
        "channels": t.channels,
        "data": base64.b64encode(arr.tobytes()).decode("ascii"),
    }


def decode_tile(payload: dict) -> Tile:
    try:
        w = int(payload["width"])
        h = int(payload["height"])
        c = int(payload["channels"])
        raw = base64.b64decode(payload["data"], validate=True)
    except (KeyError, TypeError, ValueError) as exc:
        raise ProtocolError(f"bad image payload: {exc}") from exc
    if c not in (1, 3):
        raise ProtocolError(f"unsupported channel count {c}")
    if len(raw) != w * h * c:
        raise ProtocolError(f"image payload holds {len(raw)} bytes, "
                            f"expected {w * h * c}")
    shape = (h, w) if c == 1 else (h, w, c)
    arr = np.frombuffer(raw, dtype=np.uint8).reshape(shape)
    return Tile(arr.astype(np.float32) / 255.0)


# ---------------------------------------------------------------------------
# transports

class Transport:
    """Reliable ordered byte stream with framed send/receive."""

    def send(self, message: dict) -> None:
        raise NotImplementedError

    def receive(self) -> Optional[dict]:
        raise NotImplementedError

    def close(self) -> None:
        raise NotImplementedError


class StreamTransport(Transport):
    def __init__(self, reader: BinaryIO, writer: BinaryIO):
        self.reader = reader
        self.writer = writer

    def send(self, message: dict) -> None:
        self.writer.write(encode_frame(message))
        self.writer.flush()

    def receive(self) -> Optional[dict]:
        msg = read_frame(self.reader)
        return None if msg is None else validate_message(msg)

    def close(self) -> None:
        for stream in (self.writer, self.reader):
            try:
                stream.close()
            except OSError:
                pass


class SubprocessTransport(StreamTransport):
    """Child process speaking the protocol on its standard streams."""

    def __init__(self, command: list[str]):
        self.proc = subprocess.Popen(command, stdin=subprocess.PIPE,
                                     stdout=subprocess.PIPE)
        super().__init__(self.proc.stdout, self.proc.stdin)

    def close(self) -> None:
        super().close()
        try:
            self.proc.wait(timeout=10)
        except subprocess.TimeoutExpired:
            self.proc.kill()
            self.proc.wait()


class SocketTransport(Transport):
    """Localhost TCP peer; ``connect`` dials, ``accept`` serves one session."""

    def __init__(self, sock: socket.socket):
        self.sock = sock
        self._file = sock.makefile("rb")

    @classmethod
    def connect(cls, port: int, host: str = "127.0.0.1") -> "SocketTransport":
        return cls(socket.create_connection((host, port)))

    def send(self, message: dict) -> None:
        self.sock.sendall(encode_frame(message))

    def receive(self) -> Optional[dict]:
        msg = read_frame(self._file)
        return None if msg is None else validate_message(msg)

    def close(self) -> None:
        try:
            self._file.close()
        finally:
            self.sock.close()


# ---------------------------------------------------------------------------
# session

@dataclass
class Session:
    transport: Transport
    roi_side: int
    extensions: dict = field(default_factory=dict)
    _next_id: int = 0
    _closed: bool = False

    def request(self, kind: str, payload: dict, expect: str) -> dict:
        """One strict request/response round trip."""
        if self._closed:
            raise ProtocolError("session is closed")
        self._next_id += 1
        rid = self._next_id
        self.transport.send({"kind": kind, "id": rid, **payload})
        reply = self.transport.receive()
        if reply is None:
            raise ProtocolError("peer closed the stream mid-session")
        if reply["kind"] == "Error":
            raise ProtocolError(f"peer error: {reply.get('code', '?')} "
                                f"{reply.get('message', '')}")
        if reply["kind"] != expect:
            raise ProtocolError(f"expected {expect}, got {reply['kind']}")
        if reply["id"] != rid:
            raise ProtocolError(f"response id {reply['id']} does not echo "
                                f"request id {rid}")
        return reply

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        try:
            self.transport.send({"kind": "Bye", "id": self._next_id + 1})
        except (OSError, ProtocolError, ValueError):
            pass
        self.transport.close()


def serve_handshake(transport: Transport, cfg: EngineConfig,
                    extensions: Optional[dict] = None,
                    timeout: float = HANDSHAKE_TIMEOUT) -> Session:
    """Negotiate a v1 session from the host side.

    The host speaks first: Hello with the protocol version, ROI side and
    extension values; the client must echo a Hello with a matching version.
    A version mismatch gets an Error frame before the stream closes.
    """
    hello = {
        "kind": "Hello",
        "id": 0,
        "version": PROTOCOL_VERSION,
        "roi_side": cfg.roi_side,
        "n_queries": cfg.n_queries,
        "extensions": dict(extensions or {}),
    }
    deadline = time.monotonic() + timeout
    transport.send(hello)
    reply = transport.receive()
    if time.monotonic() > deadline:
        transport.close()
        raise ProtocolError("handshake timed out")
    if reply is None:
        transport.close()
        raise ProtocolError("peer closed the stream during the handshake")
    if reply["kind"] != "Hello":
        transport.close()
        raise ProtocolError(f"expected Hello, got {reply['kind']}")
    if reply.get("version") != PROTOCOL_VERSION:
        try:
            transport.send({"kind": "Error", "id": reply["id"],
                            "code": "version",
                            "message": f"host speaks version {PROTOCOL_VERSION}"})
        finally:
            transport.close()
        raise ProtocolError(f"protocol version mismatch: {reply.get('version')}")
    return Session(transport=transport, roi_side=cfg.roi_side,
                   extensions=dict(reply.get("extensions", {})))


# ---------------------------------------------------------------------------
# engine adapters

def remote_segmenter(session: Session):
    """Segmentation provider that round-trips the full tile to the peer."""

    def provider(image: Tile) -> tuple[Tile, Tile]:
        reply = session.request("Segment", {"image": encode_tile(image)},
                                "SegmentResult")
        try:
            road = decode_tile(reply["road"])
            inter = decode_tile(reply["intersection"])
        except KeyError as exc:
            raise ProtocolError(f"SegmentResult missing field {exc}") from exc
        for t in (road, inter):
            if t.channels != 1 or (t.height, t.width) != (image.height, image.width):
                raise ProtocolError("segmentation map dimensions do not match "
                                    "the input tile")
        return road, inter

    return provider


def remote_policy(session: Session, cfg: EngineConfig):
    """Engine policy that forwards each step as one Predict round trip.

    Schema or invariant violations surface as PolicyError so the engine
    aborts the probe with the truncation flag instead of crashing.
    """

    def policy(request: PolicyRequest) -> PolicyResponse:
        payload = {
            "roi": encode_tile(request.roi_rgb),
            "history": encode_tile(request.history_raster),
            "center": {"x": request.center.x, "y": request.center.y},
        }
        try:
            reply = session.request("Predict", payload, "PredictResult")
            preds = reply["predictions"]
            if not isinstance(preds, list):
                raise ProtocolError("predictions must be a list")
            parsed = tuple(
                VertexPrediction(Point(float(p["dx"]), float(p["dy"])),
                                 float(p["prob"]))
                for p in preds)
        except (ProtocolError, KeyError, TypeError, ValueError) as exc:
            raise PolicyError(str(exc)) from exc
        response = PolicyResponse(parsed)
        validate_response(response, cfg)
        return response

    return policy
