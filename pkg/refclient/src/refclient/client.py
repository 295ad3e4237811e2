"""Client main loop: handshake, then answer Segment/Predict requests."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .expert import (ExpertConfig, ExplorationState, OffTrackError,
                     expert_next)
from .png import PngError, read_png
from .protocol import (PROTOCOL_VERSION, ProtocolError, encode_frame,
                       encode_image, read_frame, validate_message)
from .roadnet import DataError, Point, load_graph

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class StubHandler:
    """Answers every request with an empty result; pins the protocol."""

    def segment(self, request: dict) -> dict:
        image = request["image"]
        blank = bytes(int(image["width"]) * int(image["height"]))
        payload = encode_image(int(image["width"]), int(image["height"]),
                               1, blank)
        return {"kind": "SegmentResult", "id": request["id"],
                "road": payload, "intersection": payload}

    def predict(self, request: dict) -> dict:
        return {"kind": "PredictResult", "id": request["id"],
                "predictions": []}

    def configure(self, hello: dict) -> None:
        pass


class CheatHandler:
    """Serves ground truth from a benchmark world directory.

    Segmentations come from the stored mask rasters and predictions from
    the deterministic expert, so a session reproduces the host's
    in-process reference run exactly.
    """

    def __init__(self, world_dir: Path):
        self.gt = load_graph(world_dir / "gt.json")
        self.road = read_png(world_dir / "road_mask.png")
        self.intersection = read_png(world_dir / "int_mask.png")
        self.state = ExplorationState.for_graph(self.gt)
        self.cfg = ExpertConfig()

    def configure(self, hello: dict) -> None:
        ext = hello.get("extensions") or {}
        self.cfg = ExpertConfig(
            tau=float(ext.get("tau", self.cfg.tau)),
            tau_prime=float(ext.get("tau_prime", self.cfg.tau_prime)))

    def segment(self, request: dict) -> dict:
        def payload(mask):
            w, h, c, pixels = mask
            if c != 1:
                raise DataError("mask rasters must be single channel")
            return encode_image(w, h, 1, pixels)

        return {"kind": "SegmentResult", "id": request["id"],
                "road": payload(self.road),
                "intersection": payload(self.intersection)}

    def predict(self, request: dict) -> dict:
        center = Point(float(request["center"]["x"]),
                       float(request["center"]["y"]))
        half = request["roi"]["width"] / 2
        try:
            label = expert_next(self.gt, self.state, center, self.cfg)
            vertices = label.vertices
        except OffTrackError:
            vertices = ()
        preds = []
        for v in vertices:
            dx = v.x - center.x
            dy = v.y - center.y
            if half:
                dx = max(-half, min(half, dx))
                dy = max(-half, min(half, dy))
            preds.append({"dx": dx, "dy": dy, "prob": 1.0})
        return {"kind": "PredictResult", "id": request["id"],
                "predictions": preds}


def serve(reader, writer, handler) -> int:
    def send(message: dict) -> None:
        writer.write(encode_frame(message))
        writer.flush()

    hello = read_frame(reader)
    if hello is None:
        raise ProtocolError("host closed the stream before Hello")
    validate_message(hello)
    if hello["kind"] != "Hello":
        send({"kind": "Error", "id": hello["id"], "code": "handshake",
              "message": f"expected Hello, got {hello['kind']}"})
        return EXIT_DATA
    if hello.get("version") != PROTOCOL_VERSION:
        send({"kind": "Error", "id": hello["id"], "code": "version",
              "message": f"client speaks version {PROTOCOL_VERSION}"})
        return EXIT_DATA
    handler.configure(hello)
    send({"kind": "Hello", "id": hello["id"], "version": PROTOCOL_VERSION,
          "extensions": {"client": "refclient"}})

    while True:
        request = read_frame(reader)
        if request is None:
            return EXIT_OK
        validate_message(request)
        kind = request["kind"]
        if kind == "Bye":
            return EXIT_OK
        if kind == "Segment":
            send(handler.segment(request))
        elif kind == "Predict":
            send(handler.predict(request))
        else:
            send({"kind": "Error", "id": request["id"], "code": "unexpected",
                  "message": f"cannot serve {kind} requests"})
            return EXIT_DATA


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="refclient",
        description="Reference client for the road-graph wire protocol; "
                    "speaks v1 frames on stdin/stdout.")
    parser.add_argument("--cheat", metavar="WORLD_DIR", type=Path,
                        help="serve ground truth from this world directory")
    parser.add_argument("--stub", action="store_true",
                        help="answer every request with an empty result")
    try:
        args = parser.parse_args(argv)
    except SystemExit:
        return EXIT_USAGE
    try:
        if args.cheat:
            handler = CheatHandler(args.cheat)
        else:
            handler = StubHandler()
    except (DataError, PngError, OSError) as exc:
        print(f"refclient: {exc}", file=sys.stderr)
        return EXIT_DATA
    try:
        return serve(sys.stdin.buffer, sys.stdout.buffer, handler)
    except (ProtocolError, DataError, BrokenPipeError, KeyError) as exc:
        print(f"refclient: protocol failure: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
