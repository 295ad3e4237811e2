"""Wire protocol: framing, handshake, adapters, golden fixtures."""
from __future__ import annotations

import io
import json
import socket
import struct
import threading
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from roadgraph import EngineConfig, PolicyError, Tile
from roadgraph.bridge import (KINDS, MAX_FRAME_BYTES, PROTOCOL_VERSION,
                              ProtocolError, Session, StreamTransport,
                              decode_tile, encode_frame, encode_tile,
                              read_frame, remote_policy, remote_segmenter,
                              serve_handshake, validate_message)
from roadgraph.engine import PolicyRequest
from roadgraph.graph import Point

FIXTURES = Path(__file__).parent / "fixtures" / "protocol"


def socket_pair():
    a, b = socket.socketpair()
    ta = StreamTransport(a.makefile("rb"), a.makefile("wb"))
    tb = StreamTransport(b.makefile("rb"), b.makefile("wb"))
    return ta, tb


# -- framing -------------------------------------------------------------------

json_values = st.recursive(
    st.none() | st.booleans() | st.integers(-2**31, 2**31)
    | st.floats(allow_nan=False, allow_infinity=False, width=32)
    | st.text(max_size=20),
    lambda children: st.lists(children, max_size=4)
    | st.dictionaries(st.text(max_size=8), children, max_size=4),
    max_leaves=20)


@settings(max_examples=100)
@given(st.dictionaries(st.text(max_size=10), json_values, max_size=6))
def test_framing_round_trip(message):
    frame = encode_frame(message)
    got = read_frame(io.BytesIO(frame))
    assert got == json.loads(json.dumps(message))


def test_read_frame_clean_eof():
    assert read_frame(io.BytesIO(b"")) is None


def test_read_frame_truncated_prefix():
    with pytest.raises(ProtocolError):
        read_frame(io.BytesIO(b"\x00\x00"))


def test_read_frame_truncated_body():
    frame = encode_frame({"kind": "Bye", "id": 1})
    with pytest.raises(ProtocolError):
        read_frame(io.BytesIO(frame[:-2]))


def test_read_frame_rejects_non_object():
    body = b"[1,2,3]"
    frame = struct.pack(">I", len(body)) + body
    with pytest.raises(ProtocolError):
        read_frame(io.BytesIO(frame))


def test_read_frame_rejects_oversized_declaration():
    with pytest.raises(ProtocolError):
        read_frame(io.BytesIO(struct.pack(">I", MAX_FRAME_BYTES + 1)))


def test_validate_message_unknown_kind():
    with pytest.raises(ProtocolError):
        validate_message({"kind": "Nope", "id": 1})
    with pytest.raises(ProtocolError):
        validate_message({"kind": "Bye", "id": "one"})
    for kind in KINDS:
        validate_message({"kind": kind, "id": 0})


# -- image payloads ----------------------------------------------------------------

def test_tile_codec_round_trip():
    rng = np.random.default_rng(0)
    for shape in ((5, 7), (4, 6, 3)):
        data = rng.integers(0, 256, size=shape).astype(np.float32) / 255.0
        t = Tile(data)
        back = decode_tile(encode_tile(t))
        assert np.array_equal(back.data, t.data)


def test_decode_tile_length_mismatch():
    payload = encode_tile(Tile(np.zeros((4, 4))))
    payload["width"] = 5
    with pytest.raises(ProtocolError):
        decode_tile(payload)


def test_decode_tile_bad_channels():
    payload = encode_tile(Tile(np.zeros((4, 4))))
    payload["channels"] = 2
    with pytest.raises(ProtocolError):
        decode_tile(payload)


# -- handshake -----------------------------------------------------------------------

def run_client(transport, reply_version=PROTOCOL_VERSION, script=()):
    """Minimal scripted peer: answer Hello, then serve scripted replies."""
    hello = transport.receive()
    assert hello["kind"] == "Hello"
    transport.send({"kind": "Hello", "id": hello["id"],
                    "version": reply_version, "extensions": {"client": "test"}})
    for responder in script:
        request = transport.receive()
        if request is None or request["kind"] == "Bye":
            break
        transport.send(responder(request))


def test_handshake_success():
    host, client = socket_pair()
    t = threading.Thread(target=run_client, args=(client,))
    t.start()
    session = serve_handshake(host, EngineConfig(), {"tau": 40.0})
    assert session.roi_side == 256
    assert session.extensions == {"client": "test"}
    session.close()
    t.join()


def test_handshake_version_mismatch():
    host, client = socket_pair()
    received = {}

    def peer():
        hello = client.receive()
        client.send({"kind": "Hello", "id": hello["id"], "version": 99})
        received["error"] = client.receive()

    t = threading.Thread(target=peer)
    t.start()
    with pytest.raises(ProtocolError):
        serve_handshake(host, EngineConfig())
    t.join()
    assert received["error"]["kind"] == "Error"
    assert received["error"]["code"] == "version"


@settings(max_examples=100, deadline=None)
@given(st.binary(min_size=0, max_size=64))
def test_handshake_fuzz_random_prefixes(prefix):
    # a peer spewing random bytes must produce a protocol error, not a crash
    a, b = socket.socketpair()
    host = StreamTransport(a.makefile("rb"), a.makefile("wb"))

    def peer():
        b.recv(65536)  # drain the host Hello
        b.sendall(prefix)
        b.shutdown(socket.SHUT_WR)

    t = threading.Thread(target=peer)
    t.start()
    try:
        with pytest.raises(ProtocolError):
            serve_handshake(host, EngineConfig())
    finally:
        t.join()
        a.close()
        b.close()


# -- adapters ------------------------------------------------------------------------

def make_request(side=8):
    rgb = Tile(np.zeros((side, side, 3), dtype=np.float32))
    hist = Tile(np.zeros((side, side), dtype=np.float32))
    return PolicyRequest(roi_rgb=rgb, history_raster=hist,
                        center=Point(100.0, 50.0))


def scripted_session(script):
    host, client = socket_pair()
    t = threading.Thread(target=run_client, args=(client,),
                         kwargs={"script": script})
    t.start()
    session = serve_handshake(host, EngineConfig(), {})
    return session, t


def test_remote_policy_round_trip():
    def respond(req):
        assert req["kind"] == "Predict"
        assert req["center"] == {"x": 100.0, "y": 50.0}
        return {"kind": "PredictResult", "id": req["id"],
                "predictions": [{"dx": 4.0, "dy": -2.0, "prob": 0.9}]}

    session, t = scripted_session([respond])
    policy = remote_policy(session, EngineConfig())
    resp = policy(make_request())
    session.close()
    t.join()
    (p,) = resp.predictions
    assert (p.offset, p.prob) == (Point(4.0, -2.0), 0.9)


def test_remote_policy_rejects_eleven_predictions():
    def respond(req):
        return {"kind": "PredictResult", "id": req["id"],
                "predictions": [{"dx": float(i), "dy": 0.0, "prob": 1.0}
                                for i in range(11)]}

    session, t = scripted_session([respond])
    policy = remote_policy(session, EngineConfig())
    with pytest.raises(PolicyError):
        policy(make_request())
    session.close()
    t.join()


def test_remote_policy_rejects_bad_probability():
    def respond(req):
        return {"kind": "PredictResult", "id": req["id"],
                "predictions": [{"dx": 0.0, "dy": 4.0, "prob": 1.5}]}

    session, t = scripted_session([respond])
    policy = remote_policy(session, EngineConfig())
    with pytest.raises(PolicyError):
        policy(make_request())
    session.close()
    t.join()


def test_remote_policy_rejects_wrong_id_echo():
    def respond(req):
        return {"kind": "PredictResult", "id": req["id"] + 7,
                "predictions": []}

    session, t = scripted_session([respond])
    policy = remote_policy(session, EngineConfig())
    with pytest.raises(PolicyError):
        policy(make_request())
    session.close()
    t.join()


def test_remote_segmenter_checks_dimensions():
    def respond(req):
        wrong = encode_tile(Tile(np.zeros((4, 4))))
        return {"kind": "SegmentResult", "id": req["id"],
                "road": wrong, "intersection": wrong}

    session, t = scripted_session([respond])
    provider = remote_segmenter(session)
    with pytest.raises(ProtocolError):
        provider(Tile(np.zeros((8, 8, 3))))
    session.close()
    t.join()


# -- golden fixtures ---------------------------------------------------------------------

def test_golden_fixtures_parse_and_reencode():
    fixtures = sorted(FIXTURES.glob("*.bin"))
    assert len(fixtures) == 8
    for path in fixtures:
        raw = path.read_bytes()
        message = read_frame(io.BytesIO(raw))
        validate_message(message)
        assert encode_frame(message) == raw


def test_golden_predict_result_values():
    message = read_frame(io.BytesIO((FIXTURES / "predict_result.bin").read_bytes()))
    assert message["predictions"][0] == {"dx": 40.0, "dy": -3.5, "prob": 1.0}


def test_golden_hello_extensions():
    message = read_frame(io.BytesIO((FIXTURES / "hello_host.bin").read_bytes()))
    assert message["extensions"] == {"tau": 40.0, "tau_prime": 20.0}
    assert message["version"] == PROTOCOL_VERSION
