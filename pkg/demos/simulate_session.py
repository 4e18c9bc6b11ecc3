#!/usr/bin/env python3
"""Simulate a three-person session: interact, peek, track, fork.

Prints each client's mode per tick and the property-check report.

Run: python3 demos/simulate_session.py
"""

import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from vis_presence import simulator as S


def brush(lo, hi):
    return {
        "view_epoch": 0,
        "entries": {"brush": {"type": "interval", "value": {"x": [lo, hi]}}},
    }


SCENARIO = {
    "seed": 7,
    "network": {"latency_ms": [1, 4], "reorder_prob": 0.2, "drop_prob": 0.0},
    "duration_ticks": 60,
    "clients": [
        {
            "name": "alice",
            "script": [
                {"at_tick": 6 + 6 * i, "action": "interact", "state": brush(i, i + 20)}
                for i in range(6)
            ],
        },
        {
            "name": "bob",
            "script": [
                {"at_tick": 14, "action": "peek", "target": "alice"},
                {"at_tick": 20, "action": "end_peek"},
                {"at_tick": 26, "action": "track", "target": "alice"},
                {"at_tick": 40, "action": "interact", "state": brush(100, 120)},
            ],
        },
        {"name": "carol", "script": []},
    ],
}


def main():
    trace = S.run(S.Scenario.from_json(SCENARIO))

    print("tick  client  mode        effective view")
    last = {}
    for e in trace:
        if e["event"] != "snapshot":
            continue
        key = (json.dumps(e["mode"], sort_keys=True),
               json.dumps(e["effective"], sort_keys=True))
        if last.get(e["client"]) == key:
            continue  # only print changes
        last[e["client"]] = key
        view = e["effective"]["entries"].get("brush", {}).get("value", "-")
        mode = e["mode"] if isinstance(e["mode"], str) else e["mode"].get("type", "?")
        print(f"{e['tick']:4}  {e['client']:6}  {mode:10}  {view}")

    print("\nproperty checks:")
    for name, result in S.check(trace, list(S.CHECKS)).items():
        status = "PASS" if result["pass"] else "FAIL"
        print(f"  {status} {name}: {result['detail']}")


if __name__ == "__main__":
    main()
