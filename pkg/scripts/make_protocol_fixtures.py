#!/usr/bin/env python3
"""Regenerate the golden protocol frame fixtures.

The fixtures pin the v1 wire format: any implementation (host or client,
any language) must parse these bytes into the documented messages and
re-encode them identically. Run from the repository root:

    python3 scripts/make_protocol_fixtures.py
"""
from __future__ import annotations

import base64
from pathlib import Path

from roadgraph.bridge import encode_frame

OUT = Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "protocol"

# a 2x2 single-channel tile and a 2x2 RGB tile, row-major 8-bit
GRAY = base64.b64encode(bytes([0, 64, 128, 255])).decode("ascii")
RGB = base64.b64encode(bytes(range(12))).decode("ascii")

MESSAGES = {
    "hello_host": {
        "kind": "Hello", "id": 0, "version": 1, "roi_side": 256,
        "n_queries": 10, "extensions": {"tau": 40.0, "tau_prime": 20.0},
    },
    "hello_client": {"kind": "Hello", "id": 0, "version": 1,
                     "extensions": {}},
    "segment": {
        "kind": "Segment", "id": 1,
        "image": {"width": 2, "height": 2, "channels": 3, "data": RGB},
    },
    "segment_result": {
        "kind": "SegmentResult", "id": 1,
        "road": {"width": 2, "height": 2, "channels": 1, "data": GRAY},
        "intersection": {"width": 2, "height": 2, "channels": 1, "data": GRAY},
    },
    "predict": {
        "kind": "Predict", "id": 2,
        "roi": {"width": 2, "height": 2, "channels": 3, "data": RGB},
        "history": {"width": 2, "height": 2, "channels": 1, "data": GRAY},
        "center": {"x": 128.5, "y": 300.25},
    },
    "predict_result": {
        "kind": "PredictResult", "id": 2,
        "predictions": [{"dx": 40.0, "dy": -3.5, "prob": 1.0},
                        {"dx": -12.25, "dy": 17.0, "prob": 0.75}],
    },
    "error": {"kind": "Error", "id": 3, "code": "version",
              "message": "host speaks version 1"},
    "bye": {"kind": "Bye", "id": 4},
}


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    for name, message in MESSAGES.items():
        (OUT / f"{name}.bin").write_bytes(encode_frame(message))
    print(f"wrote {len(MESSAGES)} fixtures to {OUT}")


if __name__ == "__main__":
    main()
