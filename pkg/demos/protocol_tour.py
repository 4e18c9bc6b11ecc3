#!/usr/bin/env python3
"""Walk through the wire protocol: build, encode, and decode every message.

Run: python3 demos/protocol_tour.py
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from vis_presence import protocol as P


def show(label, msg):
    encoded = P.encode(msg)
    print(f"--- {label}")
    print(f"  bytes : {encoded.decode()}")
    assert P.decode(encoded) == msg
    print("  decode(encode(m)) == m")


def main():
    state = P.InteractionState(
        {
            "brush": P.IntervalExtents({"x": [40, 160]}),
            "picked": P.PointTuples([{"Origin": "Japan"}]),
            "m": P.MousePosition(312.5, 140),
        }
    )

    show("client joins a room", P.join("cars-review", "alice"))
    show("server assigns identity + color", P.welcome("cars-review", "u1", "#4c78a8"))
    show(
        "server snapshots everyone",
        P.roster(
            "cars-review",
            [
                P.RosterEntry("u1", "alice", "#4c78a8", 0, P.InteractionState()),
                P.RosterEntry("u2", "bob", "#f58518", 4, state),
            ],
        ),
    )
    show("a local interaction goes out", P.state_update("cars-review", "u1", 0, state))
    show("keepalive", P.ping("cars-review"))
    show("a collaborator disconnects", P.user_left("cars-review", "u2"))

    print("--- strict decoding")
    for bad in [
        '{"kind":"telepathy","room":"r"}',
        '{"kind":"ping","room":"r","extra":1}',
        "not json at all",
    ]:
        try:
            P.decode(bad)
        except P.ProtocolError as e:
            print(f"  {bad!r:50} -> {type(e).__name__}")


if __name__ == "__main__":
    main()
