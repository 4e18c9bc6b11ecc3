"""Command-line entry points: relay server, spec annotator, simulator."""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import annotator, simulator
from .annotator import AlreadyAnnotated, RepresentationMode, UnsupportedSpec
from .server import ServerConfig, serve
from .simulator import CHECKS, Scenario

EXIT_UNSUPPORTED = 2
EXIT_ANNOTATED = 3

_MODES = {m.value: m for m in RepresentationMode}


def server_main(argv=None) -> None:
    parser = argparse.ArgumentParser(
        prog="vis-presence-server", description="Presence relay server"
    )
    parser.add_argument(
        "--bind", default=os.environ.get("VIS_PRESENCE_BIND", "127.0.0.1:9870")
    )
    parser.add_argument(
        "--max-users",
        type=int,
        default=int(os.environ.get("VIS_PRESENCE_MAX_USERS", "32")),
    )
    parser.add_argument("--idle-timeout", type=float, default=30.0)
    parser.add_argument("--ping-interval", type=float, default=10.0)
    args = parser.parse_args(argv)
    config = ServerConfig(
        bind_address=args.bind,
        max_users_per_room=args.max_users,
        idle_timeout_s=args.idle_timeout,
        ping_interval_s=args.ping_interval,
    )
    serve(config)


def annotate_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="vis-presence-annotate",
        description="Add remote-user cursor machinery to a Vega-Lite spec",
    )
    parser.add_argument("--mode", choices=sorted(_MODES), required=True)
    parser.add_argument("--in", dest="infile", required=True)
    parser.add_argument("--out", dest="outfile", required=True)
    args = parser.parse_args(argv)
    with open(args.infile, encoding="utf-8") as f:
        doc = json.load(f)
    try:
        out = annotator.annotate(doc, _MODES[args.mode])
    except UnsupportedSpec as e:
        print(f"unsupported spec: {e}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except AlreadyAnnotated as e:
        print(f"already annotated: {e}", file=sys.stderr)
        return EXIT_ANNOTATED
    with open(args.outfile, "w", encoding="utf-8") as f:
        json.dump(out, f, indent=2)
        f.write("\n")
    return 0


def sim_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="vis-presence-sim", description="Deterministic presence simulator"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="run a scenario and check properties")
    run_p.add_argument("scenario")
    run_p.add_argument("--seed", type=int, default=None)
    run_p.add_argument("--check", default="all")
    run_p.add_argument("--trace", default=None)
    args = parser.parse_args(argv)

    with open(args.scenario, encoding="utf-8") as f:
        obj = json.load(f)
    if args.seed is not None:
        obj["seed"] = args.seed
    scenario = Scenario.from_json(obj)
    trace = simulator.run(scenario)
    if args.trace:
        with open(args.trace, "w", encoding="utf-8") as f:
            f.write(trace.to_jsonl())
    names = list(CHECKS) if args.check == "all" else args.check.split(",")
    report = simulator.check(trace, names)
    ok = True
    for name, result in report.items():
        status = "PASS" if result["pass"] else "FAIL"
        ok = ok and result["pass"]
        line = f"{status} {name}: {result['detail']}"
        if not result["pass"]:
            line += f" (first violation at tick {result['first_violation_tick']})"
        print(line)
    return 0 if ok else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(sim_main())
