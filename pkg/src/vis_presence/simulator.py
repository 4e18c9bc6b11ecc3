"""Deterministic multi-client simulator.

Replays scripted scenarios over a virtual network with seeded latency,
reordering, and loss, driving the real protocol, session, and presence
modules, and checks system-level properties over the recorded trace.

Simulation is discrete-tick and single-threaded; given the same scenario
and seed, the trace is byte-identical across runs.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

from . import protocol
from .presence import ClientPresence, Independent, Peeking, Tracking
from .protocol import InteractionState, MessageKind
from .session import PALETTE, SessionStore

ROOM = "sim"
CHECKS = (
    "convergence",
    "peek-roundtrip",
    "track-mirror",
    "fork-isolation",
    "color-uniqueness",
)

_ACTIONS = ("interact", "peek", "end_peek", "track", "leave")


class SimulatorError(Exception):
    pass


class InvalidScenario(SimulatorError):
    pass


class UnknownProperty(SimulatorError):
    pass


@dataclass(frozen=True)
class NetworkParams:
    latency: Tuple[int, int] = (1, 1)
    reorder_prob: float = 0.0
    drop_prob: float = 0.0


@dataclass(frozen=True)
class ScriptStep:
    at_tick: int
    action: str
    target: Optional[str] = None
    state: Optional[InteractionState] = None


@dataclass(frozen=True)
class ClientScript:
    name: str
    script: Tuple[ScriptStep, ...] = ()


@dataclass(frozen=True)
class Scenario:
    seed: int
    network: NetworkParams
    clients: Tuple[ClientScript, ...]
    duration_ticks: int

    @staticmethod
    def from_json(obj: dict) -> "Scenario":
        try:
            return _scenario_from_json(obj)
        except (KeyError, TypeError, ValueError, protocol.ProtocolError) as e:
            raise InvalidScenario(str(e)) from None

    def validate(self) -> None:
        net = self.network
        lo, hi = net.latency
        if lo < 0 or lo > hi:
            raise InvalidScenario("latency bounds must satisfy 0 <= lo <= hi")
        for p in (net.reorder_prob, net.drop_prob):
            if not 0.0 <= p <= 1.0:
                raise InvalidScenario("probabilities must lie in [0, 1]")
        if self.duration_ticks <= 0:
            raise InvalidScenario("duration_ticks must be positive")
        names = [c.name for c in self.clients]
        if len(set(names)) != len(names):
            raise InvalidScenario("client names must be unique")
        for client in self.clients:
            last = -1
            for step in client.script:
                if step.action not in _ACTIONS:
                    raise InvalidScenario(f"unknown action {step.action!r}")
                if step.at_tick < last:
                    raise InvalidScenario(
                        f"script for {client.name} is not tick-ordered"
                    )
                last = step.at_tick
                if step.at_tick > self.duration_ticks:
                    raise InvalidScenario("script step beyond duration_ticks")
                if step.action in ("peek", "track"):
                    if step.target not in names or step.target == client.name:
                        raise InvalidScenario(
                            f"step targets undeclared client {step.target!r}"
                        )
                if step.action == "interact" and step.state is None:
                    raise InvalidScenario("interact step needs a state")


def _scenario_from_json(obj: dict) -> Scenario:
    net = obj.get("network", {})
    lat = net.get("latency_ms", [1, 1])
    network = NetworkParams(
        latency=(int(lat[0]), int(lat[1])),
        reorder_prob=float(net.get("reorder_prob", 0.0)),
        drop_prob=float(net.get("drop_prob", 0.0)),
    )
    clients = []
    for c in obj["clients"]:
        steps = []
        for s in c.get("script", []):
            state = None
            if "state" in s:
                state = InteractionState.from_wire(s["state"])
            steps.append(
                ScriptStep(
                    at_tick=int(s["at_tick"]),
                    action=str(s["action"]),
                    target=s.get("target"),
                    state=state,
                )
            )
        clients.append(ClientScript(name=str(c["name"]), script=tuple(steps)))
    scenario = Scenario(
        seed=int(obj.get("seed", 0)),
        network=network,
        clients=tuple(clients),
        duration_ticks=int(obj["duration_ticks"]),
    )
    scenario.validate()
    return scenario


@dataclass
class _Flight:
    deliver_tick: int
    send_tick: int
    sender_order: int
    send_index: int
    to: str  # client name, or "server"
    frame: Optional[bytes]  # None models a transport disconnect
    from_name: str

    def sort_key(self):
        return (self.deliver_tick, self.send_tick, self.sender_order, self.send_index)


class Trace:
    """Recorded simulator events, serializable as JSON lines."""

    def __init__(self, events: Optional[List[dict]] = None):
        self.events: List[dict] = events if events is not None else []

    def add(self, **event: Any) -> None:
        self.events.append(event)

    def to_jsonl(self) -> str:
        return "".join(
            json.dumps(e, sort_keys=True, separators=(",", ":")) + "\n"
            for e in self.events
        )

    @staticmethod
    def from_jsonl(text: str) -> "Trace":
        return Trace([json.loads(line) for line in text.splitlines() if line])

    def __iter__(self):
        return iter(self.events)


def _mode_info(client: ClientPresence) -> dict:
    mode = client.mode
    if isinstance(mode, Peeking):
        return {"mode": "peeking", "target": mode.target}
    if isinstance(mode, Tracking):
        return {"mode": "tracking", "target": mode.target}
    return {"mode": "independent"}


class _SimClient:
    def __init__(self, script: ClientScript, order: int):
        self.name = script.name
        self.order = order
        self.script = list(script.script)
        self.presence = ClientPresence(name=script.name)
        self.connected = True
        self.welcomed = False
        self.pending: List[Tuple[int, InteractionState]] = []


class Simulator:
    def __init__(self, scenario: Scenario):
        scenario.validate()
        self.scenario = scenario
        self.rng = random.Random(scenario.seed)
        self.session = SessionStore()
        self.clients = [
            _SimClient(c, i) for i, c in enumerate(scenario.clients)
        ]
        self.by_name = {c.name: c for c in self.clients}
        self.flights: List[_Flight] = []
        self.trace = Trace()
        self.send_index = 0
        self.uid_to_name: Dict[str, str] = {}

    # -- network ---------------------------------------------------------

    def _latency(self) -> int:
        lo, hi = self.scenario.network.latency
        return self.rng.randint(lo, hi)

    def _schedule(
        self,
        tick: int,
        from_name: str,
        sender_order: int,
        to: str,
        frame: Optional[bytes],
    ) -> None:
        lat = self._latency()
        kind = None
        if frame is not None:
            kind = json.loads(frame)["kind"]
        if kind == "state_update":
            if self.rng.random() < self.scenario.network.drop_prob:
                self.trace.add(
                    event="drop",
                    tick=tick,
                    frm=from_name,
                    to=to,
                    frame=frame.decode("utf-8"),
                )
                return
            if self.rng.random() < self.scenario.network.reorder_prob:
                lat += self.rng.randint(1, 5)
        flight = _Flight(
            deliver_tick=tick + 1 + lat,
            send_tick=tick,
            sender_order=sender_order,
            send_index=self.send_index,
            to=to,
            frame=frame,
            from_name=from_name,
        )
        self.send_index += 1
        self.flights.append(flight)
        self.trace.add(
            event="send",
            tick=tick,
            frm=from_name,
            to=to,
            frame=frame.decode("utf-8") if frame is not None else None,
        )

    # -- server ----------------------------------------------------------

    def _members(self) -> List[Tuple[str, str]]:
        room = self.session.rooms.get(ROOM)
        if room is None:
            return []
        return [(uid, self.uid_to_name[uid]) for uid in sorted(room.users)]

    def _broadcast_roster(self, tick: int) -> None:
        entries = [u.roster_entry() for u in self.session.roster(ROOM)]
        frame = protocol.encode(protocol.roster(ROOM, entries))
        for _, name in self._members():
            self._schedule(tick, "server", -1, name, frame)

    def _server_receive(self, tick: int, flight: _Flight) -> None:
        sender = self.by_name[flight.from_name]
        if flight.frame is None:
            self._server_disconnect(tick, sender)
            return
        msg = protocol.decode(flight.frame)
        if msg.kind is MessageKind.JOIN:
            presence, _others = self.session.join(ROOM, msg.name, now=tick)
            self.uid_to_name[presence.user_id] = sender.name
            welcome = protocol.encode(
                protocol.welcome(ROOM, presence.user_id, presence.color)
            )
            self._schedule(tick, "server", -1, sender.name, welcome)
            self._broadcast_roster(tick)
        elif msg.kind is MessageKind.STATE_UPDATE:
            result = self.session.apply_update(
                ROOM, msg.user_id, msg.seq, msg.state, now=tick
            )
            if result.value == "applied":
                for uid, name in self._members():
                    if uid != msg.user_id:
                        self._schedule(tick, "server", -1, name, flight.frame)
        elif msg.kind is MessageKind.PING:
            self._schedule(
                tick, "server", -1, sender.name, protocol.encode(protocol.pong(ROOM))
            )

    def _server_disconnect(self, tick: int, client: _SimClient) -> None:
        uid = client.presence.user_id
        if uid is None or uid not in self.uid_to_name:
            return
        self.session.leave(ROOM, uid)
        del self.uid_to_name[uid]
        frame = protocol.encode(protocol.user_left(ROOM, uid))
        for _, name in self._members():
            self._schedule(tick, "server", -1, name, frame)

    # -- client ----------------------------------------------------------

    def _client_receive(self, tick: int, flight: _Flight) -> None:
        client = self.by_name[flight.to]
        if not client.connected:
            self.trace.add(
                event="deliver",
                tick=tick,
                to=flight.to,
                frame=flight.frame.decode("utf-8"),
                discarded=True,
            )
            return
        self.trace.add(
            event="deliver",
            tick=tick,
            to=flight.to,
            frame=flight.frame.decode("utf-8"),
        )
        msg = protocol.decode(flight.frame)
        p = client.presence
        if msg.kind is MessageKind.WELCOME:
            p.on_welcome(msg.user_id, msg.color)
            client.welcomed = True
            for seq, state in client.pending:
                frame = protocol.encode(
                    protocol.state_update(ROOM, p.user_id, seq, state)
                )
                self._schedule(tick, client.name, client.order, "server", frame)
            client.pending.clear()
        elif msg.kind is MessageKind.ROSTER:
            p.on_roster(msg.users)
        elif msg.kind is MessageKind.STATE_UPDATE:
            p.on_remote_update(msg.user_id, msg.seq, msg.state)
        elif msg.kind is MessageKind.USER_LEFT:
            p.on_user_left(msg.user_id)

    def _resolve_target(self, client: _SimClient, target_name: str) -> str:
        for uid, remote in client.presence.remotes.items():
            if remote.name == target_name:
                return uid
        raise SimulatorError(
            f"{client.name} does not yet know a collaborator named {target_name!r}"
        )

    def _run_step(self, tick: int, client: _SimClient, step: ScriptStep) -> None:
        p = client.presence
        info: dict = {
            "event": "action",
            "tick": tick,
            "client": client.name,
            "action": step.action,
        }
        info.update({f"mode_before_{k}": v for k, v in _mode_info(p).items()})
        try:
            info["pre_effective"] = p.effective_view().to_wire()
        except Exception:
            info["pre_effective"] = None
        if step.action == "interact":
            info["delta"] = step.state.to_wire()
            seq, state = p.on_local_interaction(step.state)
            info["emitted_seq"] = seq
            info["emitted_state"] = state.to_wire()
            self.trace.add(**info)
            if client.welcomed:
                frame = protocol.encode(
                    protocol.state_update(ROOM, p.user_id, seq, state)
                )
                self._schedule(tick, client.name, client.order, "server", frame)
            else:
                client.pending.append((seq, state))
            return
        if step.action == "peek":
            info["target"] = step.target
            p.begin_peek(self._resolve_target(client, step.target))
        elif step.action == "end_peek":
            p.end_peek()
        elif step.action == "track":
            info["target"] = step.target
            p.begin_track(self._resolve_target(client, step.target))
        elif step.action == "leave":
            client.connected = False
            self._schedule(tick, client.name, client.order, "server", None)
        self.trace.add(**info)

    # -- main loop --------------------------------------------------------

    def run(self) -> Trace:
        for client in self.clients:
            frame = protocol.encode(protocol.join(ROOM, client.name))
            self._schedule(0, client.name, client.order, "server", frame)
        tick = 0
        while tick <= self.scenario.duration_ticks or self.flights:
            if tick > self.scenario.duration_ticks + 100000:
                raise SimulatorError("simulation failed to quiesce")
            due = sorted(
                (f for f in self.flights if f.deliver_tick <= tick),
                key=_Flight.sort_key,
            )
            self.flights = [f for f in self.flights if f.deliver_tick > tick]
            for flight in due:
                if flight.to == "server":
                    self._server_receive(tick, flight)
                else:
                    self._client_receive(tick, flight)
            if tick <= self.scenario.duration_ticks:
                for client in self.clients:
                    while client.script and client.script[0].at_tick == tick:
                        step = client.script.pop(0)
                        self._run_step(tick, client, step)
            for client in self.clients:
                if not client.connected:
                    continue
                p = client.presence
                snap = {
                    "event": "snapshot",
                    "tick": tick,
                    "client": client.name,
                    "user_id": p.user_id,
                    "local": p.local.to_wire(),
                    "remotes": {
                        uid: {"seq": r.seq, "state": r.state.to_wire()}
                        for uid, r in sorted(p.remotes.items())
                    },
                }
                snap.update(_mode_info(p))
                try:
                    snap["effective"] = p.effective_view().to_wire()
                except Exception:
                    snap["effective"] = None
                self.trace.add(**snap)
            self.trace.add(event="tick_end", tick=tick, in_flight=len(self.flights))
            tick += 1
        return self.trace


def run(scenario: Scenario) -> Trace:
    """Execute ``scenario`` deterministically and return its trace."""
    return Simulator(scenario).run()


# ---------------------------------------------------------------------------
# trace checks


def _last_snapshots(trace: Trace) -> Dict[str, dict]:
    snaps: Dict[str, dict] = {}
    for e in trace:
        if e["event"] == "snapshot":
            snaps[e["client"]] = e
    return snaps


def _emissions(trace: Trace) -> Dict[str, List[dict]]:
    """Per-client emitted updates (what each client intended to share)."""
    out: Dict[str, List[dict]] = {}
    for e in trace:
        if e["event"] == "action" and e["action"] == "interact":
            out.setdefault(e["client"], []).append(
                {
                    "tick": e["tick"],
                    "seq": e["emitted_seq"],
                    "state": e["emitted_state"],
                }
            )
    return out


def _quiescent_ticks(trace: Trace) -> set:
    return {
        e["tick"] for e in trace if e["event"] == "tick_end" and e["in_flight"] == 0
    }


def _snapshots_by_tick(trace: Trace) -> Dict[int, Dict[str, dict]]:
    out: Dict[int, Dict[str, dict]] = {}
    for e in trace:
        if e["event"] == "snapshot":
            out.setdefault(e["tick"], {})[e["client"]] = e
    return out


def _check_convergence(trace: Trace) -> Tuple[bool, Optional[int], str]:
    finals = _last_snapshots(trace)
    emissions = _emissions(trace)
    final_tick = max((e["tick"] for e in trace), default=0)
    uid_of = {s["user_id"]: c for c, s in finals.items() if s["user_id"]}
    for viewer, snap in finals.items():
        for uid, owner in uid_of.items():
            if owner == viewer:
                continue
            sent = emissions.get(owner, [])
            if not sent:
                continue
            last = max(sent, key=lambda m: m["seq"])
            remote = snap["remotes"].get(uid)
            if remote is None or remote["seq"] != last["seq"] or remote["state"] != last["state"]:
                return (
                    False,
                    final_tick,
                    f"{viewer} has not converged on {owner}'s final state",
                )
    return True, None, "all clients agree on every user's max-seq state"


def _check_peek_roundtrip(trace: Trace) -> Tuple[bool, Optional[int], str]:
    snaps = _snapshots_by_tick(trace)
    pending: Dict[str, dict] = {}
    for e in trace:
        if e["event"] != "action":
            continue
        client = e["client"]
        if e["action"] == "peek":
            if e.get("mode_before_mode") == "independent":
                pending[client] = {"expected": e["pre_effective"]}
            # peeks from tracking or retargeting keep any prior restore point
        elif e["action"] == "end_peek":
            rec = pending.pop(client, None)
            if rec is not None:
                snap = snaps[e["tick"]][client]
                if snap["effective"] != rec["expected"]:
                    return (
                        False,
                        e["tick"],
                        f"{client}'s view not restored after end_peek",
                    )
        elif e["action"] in ("interact", "track"):
            pending.pop(client, None)
    return True, None, "every peek restored the pre-peek view exactly"


def _check_track_mirror(trace: Trace) -> Tuple[bool, Optional[int], str]:
    snaps = _snapshots_by_tick(trace)
    quiescent = _quiescent_ticks(trace)
    emissions = _emissions(trace)
    empty = InteractionState().to_wire()
    for tick in sorted(quiescent):
        per_client = snaps.get(tick, {})
        uid_of = {
            s["user_id"]: c for c, s in per_client.items() if s["user_id"]
        }
        for client, snap in per_client.items():
            if snap["mode"] != "tracking":
                continue
            target_client = uid_of.get(snap["target"])
            if target_client is None:
                continue
            sent = [
                m for m in emissions.get(target_client, []) if m["tick"] <= tick
            ]
            expected = max(sent, key=lambda m: m["seq"])["state"] if sent else empty
            if snap["effective"] != expected:
                return (
                    False,
                    tick,
                    f"{client} is tracking {target_client} but does not mirror it",
                )
    return True, None, "trackers mirror their targets at every quiescent tick"


def _check_fork_isolation(trace: Trace) -> Tuple[bool, Optional[int], str]:
    snaps = _snapshots_by_tick(trace)
    actions_by_client: Dict[str, List[dict]] = {}
    for e in trace:
        if e["event"] == "action":
            actions_by_client.setdefault(e["client"], []).append(e)
    for client, actions in actions_by_client.items():
        for i, act in enumerate(actions):
            if act["action"] != "interact" or act.get("mode_before_mode") not in (
                "tracking",
                "peeking",
            ):
                continue
            # the fork emission must seed from the remote state
            seed = InteractionState.from_wire(act["pre_effective"])
            delta = InteractionState.from_wire(act["delta"])
            expected = seed.merged_with(delta).to_wire()
            if act["emitted_state"] != expected:
                return (
                    False,
                    act["tick"],
                    f"{client}'s fork emission is not seed+interaction",
                )
            until = (
                actions[i + 1]["tick"] if i + 1 < len(actions) else None
            )
            frozen = act["emitted_state"]
            for tick in sorted(snaps):
                if tick < act["tick"] or (until is not None and tick >= until):
                    continue
                snap = snaps[tick].get(client)
                if snap is None:
                    continue
                if snap["mode"] != "independent" or snap["effective"] != frozen:
                    return (
                        False,
                        tick,
                        f"{client}'s post-fork view was disturbed",
                    )
    return True, None, "forked views stay isolated from former targets"


def _check_color_uniqueness(trace: Trace) -> Tuple[bool, Optional[int], str]:
    active: Dict[str, str] = {}
    for e in trace:
        if e["event"] != "send" or e["frm"] != "server" or not e["frame"]:
            continue
        frame = json.loads(e["frame"])
        if frame["kind"] == "welcome":
            active[frame["user_id"]] = frame["color"]
        elif frame["kind"] == "user_left":
            active.pop(frame["user_id"], None)
        else:
            continue
        if len(active) <= len(PALETTE):
            colors = list(active.values())
            if len(set(colors)) != len(colors):
                return False, e["tick"], "two concurrent users share a color"
    return True, None, "concurrent users always had distinct colors"


_CHECKS = {
    "convergence": _check_convergence,
    "peek-roundtrip": _check_peek_roundtrip,
    "track-mirror": _check_track_mirror,
    "fork-isolation": _check_fork_isolation,
    "color-uniqueness": _check_color_uniqueness,
}


def check(trace: Trace, properties: Sequence[str]) -> Dict[str, dict]:
    """Evaluate named properties against a trace; report first violations."""
    report: Dict[str, dict] = {}
    for name in properties:
        fn = _CHECKS.get(name)
        if fn is None:
            raise UnknownProperty(name)
        ok, tick, detail = fn(trace)
        report[name] = {"pass": ok, "first_violation_tick": tick, "detail": detail}
    return report
