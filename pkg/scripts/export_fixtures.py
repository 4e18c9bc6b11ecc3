#!/usr/bin/env python3
"""Export cross-language conformance fixtures.

Writes two JSON files under tests/fixtures/ that pin down behavior any
alternate implementation (e.g. the web client) must reproduce:

- wire_messages.json: canonical encodings, key-permuted variants that must
  decode to the same message, and inputs that must be rejected with a
  specific error class.
- presence_transitions.json: scripted walks through the peek/track/fork
  state machine with the expected mode, local state, effective view, and
  emission after every step.

Run from the repository root: python3 scripts/export_fixtures.py
"""

import json
import random
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from vis_presence import protocol as P  # noqa: E402
from vis_presence.presence import (  # noqa: E402
    ClientPresence,
    Independent,
    NotPeeking,
    Peeking,
    Tracking,
    UnknownTarget,
)

FIXTURES = REPO / "tests" / "fixtures"


# ---------------------------------------------------------------------------
# wire messages


def _permutations_of(encoded: str, rng: random.Random, count: int = 3):
    """Same JSON value with shuffled key order (recursively), as text."""

    def shuffle(obj):
        if isinstance(obj, dict):
            keys = list(obj)
            rng.shuffle(keys)
            return {k: shuffle(obj[k]) for k in keys}
        if isinstance(obj, list):
            return [shuffle(v) for v in obj]
        return obj

    value = json.loads(encoded)
    out = []
    for _ in range(count):
        out.append(json.dumps(shuffle(value), ensure_ascii=False))
    return out


def wire_message_fixtures() -> dict:
    rng = random.Random(1234)
    state = P.InteractionState(
        {
            "brush": P.IntervalExtents({"x": [0, 10], "y": [-2.5, 7.25]}),
            "picked": P.PointTuples([{"hp": 110, "origin": "Japan"}]),
            "m": P.MousePosition(120.5, 88),
        },
        view_epoch=2,
    )
    messages = [
        ("ping", P.ping("r1")),
        ("pong", P.pong("r1")),
        ("join", P.join("demo", "alice")),
        ("join_unicode_name", P.join("demo", "Zoë")),
        ("welcome", P.welcome("demo", "u1", "#4c78a8")),
        ("user_left", P.user_left("demo", "u2")),
        ("state_update_empty", P.state_update("demo", "u1", 0, P.InteractionState())),
        ("state_update_mixed", P.state_update("demo", "u1", 7, state)),
        (
            "state_update_widgets_scales",
            P.state_update(
                "demo",
                "u3",
                12,
                P.InteractionState(
                    {
                        "max_hp": P.WidgetBindings({"max_hp": 150}),
                        "grid": P.ScaleDomains({"x": [3, 8], "y": [0, 250]}),
                    }
                ),
            ),
        ),
        (
            "roster",
            P.roster(
                "demo",
                [
                    P.RosterEntry("u1", "alice", "#4c78a8", 3, state),
                    P.RosterEntry("u2", "bob", "#f58518", 0, P.InteractionState()),
                ],
            ),
        ),
    ]
    canonical = []
    for name, msg in messages:
        encoded = P.encode(msg).decode()
        canonical.append(
            {
                "name": name,
                "encoded": encoded,
                "variants": _permutations_of(encoded, rng),
            }
        )

    invalid = [
        {"name": "not_json", "input": "~~ not json ~~", "error": "MalformedInput"},
        {"name": "json_array", "input": "[1,2,3]", "error": "MalformedInput"},
        {"name": "no_kind", "input": '{"room":"r1"}', "error": "SchemaViolation"},
        {
            "name": "unknown_kind",
            "input": '{"kind":"telepathy","room":"r1"}',
            "error": "UnknownKind",
        },
        {
            "name": "missing_field",
            "input": '{"kind":"join","room":"r1"}',
            "error": "SchemaViolation",
        },
        {
            "name": "extra_field",
            "input": '{"kind":"ping","room":"r1","debug":true}',
            "error": "SchemaViolation",
        },
        {
            "name": "bad_seq",
            "input": '{"kind":"state_update","room":"r1","user_id":"u1",'
            '"seq":-1,"state":{"view_epoch":0,"entries":{}}}',
            "error": "SchemaViolation",
        },
        {
            "name": "interval_lo_gt_hi",
            "input": '{"kind":"state_update","room":"r1","user_id":"u1","seq":0,'
            '"state":{"view_epoch":0,"entries":{"b":{"type":"interval",'
            '"value":{"x":[10,0]}}}}}',
            "error": "SchemaViolation",
        },
        {
            "name": "unknown_selection_type",
            "input": '{"kind":"state_update","room":"r1","user_id":"u1","seq":0,'
            '"state":{"view_epoch":0,"entries":{"b":{"type":"laser",'
            '"value":{}}}}}',
            "error": "SchemaViolation",
        },
        {
            "name": "bad_color",
            "input": '{"kind":"welcome","room":"r1","user_id":"u1","color":"red"}',
            "error": "SchemaViolation",
        },
    ]
    # keep the invalid cases honest against the reference implementation
    for case in invalid:
        try:
            P.decode(case["input"])
        except P.ProtocolError as e:
            actual = type(e).__name__
            if actual != case["error"]:
                raise SystemExit(
                    f"fixture {case['name']}: expected {case['error']}, got {actual}"
                )
        else:
            raise SystemExit(f"fixture {case['name']}: decode did not fail")
    return {"canonical": canonical, "invalid": invalid}


# ---------------------------------------------------------------------------
# presence transitions


def _state(tag: float) -> P.InteractionState:
    return P.InteractionState({"m": P.MousePosition(tag, tag)})


def _mode_wire(mode) -> dict:
    if isinstance(mode, Independent):
        return {"type": "independent"}
    if isinstance(mode, Peeking):
        return {
            "type": "peeking",
            "target": mode.target,
            "saved": None if mode.saved is None else mode.saved.to_wire(),
            "prior_track": mode.prior_track,
        }
    if isinstance(mode, Tracking):
        return {"type": "tracking", "target": mode.target}
    raise TypeError(mode)


def _apply(client: ClientPresence, op: dict):
    """Apply one serialized op; returns (emitted_or_None, error_name_or_None)."""
    kind = op["op"]
    try:
        if kind == "welcome":
            client.on_welcome(op["user_id"], op["color"])
        elif kind == "remote_update":
            client.on_remote_update(
                op["user_id"], op["seq"], P.InteractionState.from_wire(op["state"])
            )
        elif kind == "roster":
            client.on_roster(
                [
                    P.RosterEntry(
                        u["user_id"],
                        u["name"],
                        u["color"],
                        u["seq"],
                        P.InteractionState.from_wire(u["state"]),
                    )
                    for u in op["users"]
                ]
            )
        elif kind == "user_left":
            client.on_user_left(op["user_id"])
        elif kind == "peek":
            client.begin_peek(op["target"])
        elif kind == "end_peek":
            client.end_peek()
        elif kind == "track":
            client.begin_track(op["target"])
        elif kind == "local":
            seq, emitted = client.on_local_interaction(
                P.InteractionState.from_wire(op["state"])
            )
            return {"seq": seq, "state": emitted.to_wire()}, None
        else:
            raise ValueError(f"unknown op {kind}")
    except (UnknownTarget, NotPeeking) as e:
        return None, type(e).__name__
    return None, None


def _random_op(rng: random.Random, peers) -> dict:
    c = rng.randrange(8)
    if c == 0:
        return {"op": "local", "state": _state(rng.randint(0, 50)).to_wire()}
    if c == 1:
        return {"op": "peek", "target": rng.choice(peers)}
    if c == 2:
        return {"op": "end_peek"}
    if c == 3:
        return {"op": "track", "target": rng.choice(peers)}
    if c == 4:
        return {
            "op": "remote_update",
            "user_id": rng.choice(peers),
            "seq": rng.randint(0, 30),
            "state": _state(rng.randint(100, 200)).to_wire(),
        }
    if c == 5:
        return {"op": "user_left", "user_id": rng.choice(peers)}
    if c == 6:
        return {
            "op": "roster",
            "users": [
                {
                    "user_id": uid,
                    "name": uid,
                    "color": "#f58518",
                    "seq": rng.randint(0, 5),
                    "state": _state(rng.randint(0, 9)).to_wire(),
                }
                for uid in rng.sample(peers, rng.randint(1, len(peers)))
            ],
        }
    return {
        "op": "remote_update",
        "user_id": f"u{rng.randint(5, 9)}",  # a user never seen before
        "seq": 0,
        "state": _state(rng.randint(100, 200)).to_wire(),
    }


def _scripted_cases():
    """Hand-written walks covering every transition edge."""
    s = lambda tag: _state(tag).to_wire()
    welcome = {"op": "welcome", "user_id": "u1", "color": "#4c78a8"}
    seed_peers = [
        {"op": "remote_update", "user_id": "u2", "seq": 0, "state": s(10)},
        {"op": "remote_update", "user_id": "u3", "seq": 0, "state": s(11)},
    ]
    return [
        ("peek_and_restore", [welcome, *seed_peers,
            {"op": "local", "state": s(1)},
            {"op": "peek", "target": "u2"},
            {"op": "remote_update", "user_id": "u2", "seq": 9, "state": s(99)},
            {"op": "end_peek"}]),
        ("peek_retarget_keeps_restore_point", [welcome, *seed_peers,
            {"op": "local", "state": s(1)},
            {"op": "peek", "target": "u2"},
            {"op": "peek", "target": "u3"},
            {"op": "end_peek"}]),
        ("peek_from_tracking_returns_to_tracking", [welcome, *seed_peers,
            {"op": "track", "target": "u2"},
            {"op": "peek", "target": "u3"},
            {"op": "end_peek"}]),
        ("fork_from_tracking", [welcome, *seed_peers,
            {"op": "track", "target": "u2"},
            {"op": "remote_update", "user_id": "u2", "seq": 1, "state": s(42)},
            {"op": "local", "state": s(5)},
            {"op": "remote_update", "user_id": "u2", "seq": 2, "state": s(77)}]),
        ("fork_from_peek", [welcome, *seed_peers,
            {"op": "local", "state": s(1)},
            {"op": "peek", "target": "u2"},
            {"op": "local", "state": s(7)}]),
        ("tracked_target_leaves", [welcome, *seed_peers,
            {"op": "track", "target": "u2"},
            {"op": "user_left", "user_id": "u2"}]),
        ("peeked_target_leaves", [welcome, *seed_peers,
            {"op": "local", "state": s(1)},
            {"op": "peek", "target": "u2"},
            {"op": "user_left", "user_id": "u2"}]),
        ("stale_update_ignored", [welcome, *seed_peers,
            {"op": "remote_update", "user_id": "u2", "seq": 3, "state": s(3)},
            {"op": "remote_update", "user_id": "u2", "seq": 2, "state": s(2)}]),
        ("roster_seed_allows_equal_seq", [welcome,
            {"op": "roster", "users": [{
                "user_id": "u2", "name": "bob", "color": "#f58518",
                "seq": 0, "state": P.InteractionState().to_wire()}]},
            {"op": "remote_update", "user_id": "u2", "seq": 0, "state": s(1)},
            {"op": "remote_update", "user_id": "u2", "seq": 0, "state": s(2)}]),
        ("errors", [welcome, *seed_peers,
            {"op": "peek", "target": "u9"},
            {"op": "end_peek"},
            {"op": "track", "target": "u9"}]),
    ]


def presence_transition_fixtures() -> dict:
    cases = []

    def run_case(name, ops):
        client = ClientPresence(name="me")
        steps = []
        for op in ops:
            emitted, error = _apply(client, op)
            steps.append(
                {
                    "op": op,
                    "expect": {
                        "mode": _mode_wire(client.mode),
                        "local": client.local.to_wire(),
                        "effective_view": client.effective_view().to_wire(),
                        "emitted": emitted,
                        "error": error,
                        "remotes": {
                            uid: {
                                "seq": r.seq,
                                "state": r.state.to_wire(),
                            }
                            for uid, r in sorted(client.remotes.items())
                        },
                    },
                }
            )
        cases.append({"name": name, "steps": steps})

    for name, ops in _scripted_cases():
        run_case(name, ops)

    rng = random.Random(2718)
    peers = ["u2", "u3", "u4"]
    for i in range(40):
        ops = [{"op": "welcome", "user_id": "u1", "color": "#4c78a8"}]
        for uid in peers:
            ops.append(
                {
                    "op": "remote_update",
                    "user_id": uid,
                    "seq": 0,
                    "state": _state(rng.randint(0, 9)).to_wire(),
                }
            )
        ops.extend(_random_op(rng, peers) for _ in range(rng.randint(4, 14)))
        run_case(f"walk_{i:02d}", ops)

    return {"cases": cases}


def build_all() -> dict:
    return {
        "wire_messages.json": wire_message_fixtures(),
        "presence_transitions.json": presence_transition_fixtures(),
    }


def main() -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    for filename, payload in build_all().items():
        path = FIXTURES / filename
        # one step per line keeps diffs reviewable without a 700 kB pretty-print
        indent = 1 if filename == "wire_messages.json" else None
        path.write_text(
            json.dumps(payload, ensure_ascii=False, indent=indent, sort_keys=True)
            + "\n",
            encoding="utf-8",
        )
        print(f"wrote {path.relative_to(REPO)}")


if __name__ == "__main__":
    main()
