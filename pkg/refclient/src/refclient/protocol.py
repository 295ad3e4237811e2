"""v1 wire framing: 4-byte big-endian length prefix + one UTF-8 JSON object.

This mirrors the host's framing exactly; the golden fixtures shipped with
the host test suite must parse and re-encode byte-identically here.
"""
from __future__ import annotations

import base64
import json
import struct
from typing import BinaryIO, Optional

PROTOCOL_VERSION = 1
MAX_FRAME_BYTES = 64 * 1024 * 1024

KINDS = ("Hello", "Segment", "SegmentResult", "Predict", "PredictResult",
         "Error", "Bye")


class ProtocolError(RuntimeError):
    """Malformed frame, schema violation, or broken session discipline."""


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


def encode_image(width: int, height: int, channels: int,
                 pixels: bytes) -> dict:
    """Row-major 8-bit pixel buffer to the wire image payload."""
    if len(pixels) != width * height * channels:
        raise ProtocolError(f"image buffer holds {len(pixels)} bytes, "
                            f"expected {width * height * channels}")
    return {
        "width": width,
        "height": height,
        "channels": channels,
        "data": base64.b64encode(pixels).decode("ascii"),
    }


def decode_image(payload: dict) -> tuple[int, int, int, bytes]:
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
    return w, h, c, raw
