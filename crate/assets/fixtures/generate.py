"""Writes the golden wire fixtures in this directory.

Encodes frames straight from the wire format with `struct`, independently of
the Rust codec. Run from anywhere: `python3 assets/fixtures/generate.py`.
"""

import json
import math
import struct
from pathlib import Path

HERE = Path(__file__).resolve().parent
HEADER = 13
KIND = {"hello": 1, "obs": 2, "act": 3, "reset": 4, "event": 5, "bye": 6, "err": 7}


def frame(kind, tick, payload):
    return struct.pack("<IBQ", HEADER + len(payload), KIND[kind], tick) + payload


def f32s(values):
    return b"".join(struct.pack("<f", v) for v in values)


def str16(s):
    raw = s.encode()
    return struct.pack("<H", len(raw)) + raw


def hello(versions, magic=b"SDRO"):
    return magic + struct.pack("<B", len(versions)) + b"".join(struct.pack("<H", v) for v in versions)


def observation():
    fovea = bytes((i * 7 + 3) % 256 for i in range(32 * 32 * 3))
    periphery = bytes((i * 13 + 1) % 256 for i in range(16 * 16 * 3))
    touch = bytes((i * 37) % 256 for i in range(16))
    proprio = [(k - 53) / 8 for k in range(106)]
    eye = [0.25, -0.5, 0.125]
    vestibular = [0.0, 0.0, 9.81, 0.5, -0.25, 1.0]
    intero = [0.75, 0.0, 0.0, 0.0]
    payload = fovea + periphery + touch + f32s(proprio + eye + vestibular + intero)
    assert len(payload) == 4332
    return payload


def action(values=None):
    values = values or [((k % 9) - 4) / 4 for k in range(56)]
    payload = f32s(values)
    assert len(payload) == 224
    return payload


EVENTS = {
    "birth": b"\x01",
    "stage_change": b"\x02" + str16("newborn"),
    "utterance": b"\x03" + struct.pack("<H4I", 4, 101, 7, 7, 42),
    "scene_change": b"\x04" + str16("nursery"),
    "stimulus_on": b"\x05" + struct.pack("<IB", 2, 2) + str16("stimulus") + str16("rod"),
    "stimulus_off": b"\x06" + struct.pack("<I", 2),
    "gaze_target": b"\x07" + struct.pack("<Iff", 2, 0.125, -0.25),
    "caregiver_behavior": b"\x08\x03",
}


def main():
    valid = []
    malformed = []

    def put(name, data):
        (HERE / name).write_bytes(data)

    def ok(name, kind, tick, data, **extra):
        put(name, data)
        valid.append({"file": name, "kind": kind, "tick": tick, **extra})

    def bad(name, stage, code, data, message=None):
        put(name, data)
        entry = {"file": name, "stage": stage, "code": code}
        if message:
            entry["message"] = message
        malformed.append(entry)

    ok("hello_v1.bin", "hello", 0, frame("hello", 0, hello([1])), versions=[1])
    ok("hello_v1_v2.bin", "hello", 0, frame("hello", 0, hello([1, 2])), versions=[1, 2])
    ok("obs_tick42.bin", "obs", 42, frame("obs", 42, observation()))
    ok("act_tick42.bin", "act", 42, frame("act", 42, action()))
    ok("act_zero_tick7.bin", "act", 7, frame("act", 7, action([0.0] * 56)))
    for i, (name, payload) in enumerate(EVENTS.items()):
        ok(f"event_{name}.bin", "event", 100 + i, frame("event", 100 + i, payload), event=name)
    ok("bye_tick100.bin", "bye", 100, frame("bye", 100, b"\x00"))
    msg = "bad magic"
    ok("err_bad_magic.bin", "err", 0, frame("err", 0, struct.pack("<H", 1) + msg.encode()), code=1, message=msg)

    bad("unknown_type.bin", "frame", "BadFrame", struct.pack("<IBQ", HEADER, 9, 0))
    bad("short_length.bin", "frame", "BadFrame", struct.pack("<IBQ", 5, 2, 0))
    bad("too_large.bin", "frame", "PayloadSize", struct.pack("<IBQ", 0xFFFFFFFF, 2, 0))
    bad("truncated_payload.bin", "frame", "BadFrame", frame("act", 0, action())[:100])
    bad("trailing_bytes.bin", "frame", "BadFrame", frame("bye", 3, b"\x00") + b"\xff")
    bad("hello_bad_magic.bin", "hello", "BadMagic", frame("hello", 0, hello([1], magic=b"XXXX")))
    bad("act_223.bin", "action", "PayloadSize", frame("act", 0, action()[:223]), "expected 224")
    nan = [0.0] * 56
    nan[5] = math.nan
    bad("act_nan.bin", "action", "InvalidAction", frame("act", 0, action(nan)))
    bad("obs_short.bin", "observation", "PayloadSize", frame("obs", 0, observation()[:-1]), "expected 4332")
    bad("event_unknown_kind.bin", "event", "BadFrame", frame("event", 0, b"\x63"))
    bad("event_trailing.bin", "event", "BadFrame", frame("event", 0, b"\x01\x00"))

    manifest = {"valid": valid, "malformed": malformed}
    (HERE / "fixtures.json").write_text(json.dumps(manifest, indent=2) + "\n")


if __name__ == "__main__":
    main()
