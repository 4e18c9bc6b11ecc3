"""Wire protocol: message types and canonical JSON encoding.

Every frame exchanged between a client and the relay server is one UTF-8
JSON object. Encoding is canonical (fixed top-level key order, nested maps
sorted by key) so that identical messages always serialize to identical
bytes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping, Optional, Sequence, Union

MAX_ROOM_LEN = 128
MAX_NAME_LEN = 64


class ProtocolError(Exception):
    """Base class for every protocol-level failure."""


class MalformedInput(ProtocolError):
    """Input is not valid UTF-8 JSON object text."""


class UnknownKind(ProtocolError):
    """The message carries a `kind` this protocol does not define."""


class SchemaViolation(ProtocolError):
    """Valid JSON, but fields are missing, extraneous, or mistyped."""


class InvalidMessage(ProtocolError):
    """An in-memory message violates its own invariants."""


class MessageKind(str, Enum):
    JOIN = "join"
    WELCOME = "welcome"
    ROSTER = "roster"
    STATE_UPDATE = "state_update"
    USER_LEFT = "user_left"
    PING = "ping"
    PONG = "pong"


Scalar = Union[int, float, str, bool, None]


def _is_number(v: Any) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _check_pair(channel: str, pair: Any, ctx: str, exc: type) -> list:
    if (
        not isinstance(pair, (list, tuple))
        or len(pair) != 2
        or not all(_is_number(p) for p in pair)
    ):
        raise exc(f"{ctx}: channel {channel!r} needs a [lo, hi] numeric pair")
    lo, hi = pair
    if lo > hi:
        raise exc(f"{ctx}: channel {channel!r} has lo > hi ({lo} > {hi})")
    return [lo, hi]


@dataclass(frozen=True)
class PointTuples:
    """A point selection: the list of selected data tuples."""

    tuples: tuple

    def __init__(self, tuples: Sequence[Mapping[str, Scalar]]):
        object.__setattr__(
            self, "tuples", tuple(dict(t) for t in tuples)
        )

    type_tag = "point"

    def validate(self, exc: type = InvalidMessage) -> None:
        for t in self.tuples:
            if not isinstance(t, dict):
                raise exc("point tuples must be field->value maps")
            for k, v in t.items():
                if not isinstance(k, str):
                    raise exc("point tuple fields must be strings")
                if not (v is None or isinstance(v, (int, float, str, bool))):
                    raise exc(f"point tuple value for {k!r} is not a scalar")

    def to_wire(self) -> Any:
        return [dict(sorted(t.items())) for t in self.tuples]


@dataclass(frozen=True)
class IntervalExtents:
    """An interval brush: per-channel [lo, hi] extents."""

    extents: tuple

    def __init__(self, extents: Mapping[str, Sequence[float]]):
        object.__setattr__(
            self,
            "extents",
            tuple(sorted((k, tuple(v)) for k, v in extents.items())),
        )

    type_tag = "interval"

    def validate(self, exc: type = InvalidMessage) -> None:
        for ch, pair in self.extents:
            if not isinstance(ch, str) or not ch:
                raise exc("interval channel names must be non-empty strings")
            _check_pair(ch, pair, "interval extents", exc)

    def to_wire(self) -> Any:
        return {ch: list(pair) for ch, pair in self.extents}

    def as_dict(self) -> dict:
        return {ch: list(pair) for ch, pair in self.extents}


@dataclass(frozen=True)
class WidgetBindings:
    """Dynamic-query widget values: field -> scalar."""

    bindings: tuple

    def __init__(self, bindings: Mapping[str, Scalar]):
        object.__setattr__(self, "bindings", tuple(sorted(bindings.items())))

    type_tag = "widgets"

    def validate(self, exc: type = InvalidMessage) -> None:
        for k, v in self.bindings:
            if not isinstance(k, str) or not k:
                raise exc("widget fields must be non-empty strings")
            if not (v is None or isinstance(v, (int, float, str, bool))):
                raise exc(f"widget value for {k!r} is not a scalar")

    def to_wire(self) -> Any:
        return dict(self.bindings)

    def as_dict(self) -> dict:
        return dict(self.bindings)


@dataclass(frozen=True)
class ScaleDomains:
    """Pan/zoom state: per-channel visible [lo, hi] domains."""

    domains: tuple

    def __init__(self, domains: Mapping[str, Sequence[float]]):
        object.__setattr__(
            self,
            "domains",
            tuple(sorted((k, tuple(v)) for k, v in domains.items())),
        )

    type_tag = "scales"

    def validate(self, exc: type = InvalidMessage) -> None:
        for ch, pair in self.domains:
            if not isinstance(ch, str) or not ch:
                raise exc("scale channel names must be non-empty strings")
            _check_pair(ch, pair, "scale domains", exc)

    def to_wire(self) -> Any:
        return {ch: list(pair) for ch, pair in self.domains}

    def as_dict(self) -> dict:
        return {ch: list(pair) for ch, pair in self.domains}


@dataclass(frozen=True)
class MousePosition:
    """Fallback cursor location in view pixels."""

    x: float
    y: float

    type_tag = "mouse"

    def validate(self, exc: type = InvalidMessage) -> None:
        for v in (self.x, self.y):
            if not _is_number(v) or not math.isfinite(v):
                raise exc("mouse position coordinates must be finite numbers")

    def to_wire(self) -> Any:
        return {"x": self.x, "y": self.y}


SelectionValue = Union[
    PointTuples, IntervalExtents, WidgetBindings, ScaleDomains, MousePosition
]

_VALUE_TYPES = {
    "point": PointTuples,
    "interval": IntervalExtents,
    "widgets": WidgetBindings,
    "scales": ScaleDomains,
    "mouse": MousePosition,
}


@dataclass(frozen=True)
class InteractionState:
    """One user's selection values, keyed by selection name."""

    entries: tuple = ()
    view_epoch: int = 0

    def __init__(
        self,
        entries: Mapping[str, SelectionValue] | Sequence = (),
        view_epoch: int = 0,
    ):
        if isinstance(entries, Mapping):
            items = entries.items()
        else:
            items = entries
        object.__setattr__(
            self, "entries", tuple(sorted(items, key=lambda kv: kv[0]))
        )
        object.__setattr__(self, "view_epoch", view_epoch)

    def validate(self, exc: type = InvalidMessage) -> None:
        if not isinstance(self.view_epoch, int) or isinstance(self.view_epoch, bool):
            raise exc("view_epoch must be an integer")
        if self.view_epoch < 0:
            raise exc("view_epoch must be non-negative")
        seen = set()
        for name, value in self.entries:
            if not isinstance(name, str) or not name:
                raise exc("selection names must be non-empty strings")
            if name in seen:
                raise exc(f"duplicate selection name {name!r}")
            seen.add(name)
            if not isinstance(value, tuple(_VALUE_TYPES.values())):
                raise exc(f"entry {name!r} is not a SelectionValue")
            value.validate(exc)

    def as_dict(self) -> dict:
        return dict(self.entries)

    def get(self, name: str) -> Optional[SelectionValue]:
        return dict(self.entries).get(name)

    def merged_with(self, other: "InteractionState") -> "InteractionState":
        """Overlay ``other``'s entries on this state (per-name overwrite)."""
        merged = dict(self.entries)
        merged.update(dict(other.entries))
        return InteractionState(merged, view_epoch=other.view_epoch)

    def to_wire(self) -> dict:
        return {
            "view_epoch": self.view_epoch,
            "entries": {
                name: {"type": value.type_tag, "value": value.to_wire()}
                for name, value in self.entries
            },
        }

    @staticmethod
    def from_wire(obj: Any) -> "InteractionState":
        if not isinstance(obj, dict):
            raise SchemaViolation("state must be an object")
        extra = set(obj) - {"view_epoch", "entries"}
        if extra:
            raise SchemaViolation(f"unexpected state fields: {sorted(extra)}")
        if "view_epoch" not in obj or "entries" not in obj:
            raise SchemaViolation("state requires view_epoch and entries")
        entries_obj = obj["entries"]
        if not isinstance(entries_obj, dict):
            raise SchemaViolation("state entries must be an object")
        entries = {}
        for name, entry in entries_obj.items():
            if not isinstance(entry, dict) or set(entry) != {"type", "value"}:
                raise SchemaViolation(f"entry {name!r} must have type and value")
            cls = _VALUE_TYPES.get(entry["type"])
            if cls is None:
                raise SchemaViolation(f"unknown selection value type {entry['type']!r}")
            entries[name] = _value_from_wire(cls, entry["value"])
        state = InteractionState(entries, view_epoch=obj["view_epoch"])
        state.validate(SchemaViolation)
        return state


def _value_from_wire(cls: type, raw: Any) -> SelectionValue:
    try:
        if cls is PointTuples:
            return PointTuples(raw)
        if cls is MousePosition:
            if not isinstance(raw, dict) or set(raw) != {"x", "y"}:
                raise SchemaViolation("mouse value must be {x, y}")
            return MousePosition(raw["x"], raw["y"])
        if not isinstance(raw, dict):
            raise SchemaViolation(f"{cls.type_tag} value must be an object")
        return cls(raw)
    except (TypeError, AttributeError) as e:
        raise SchemaViolation(f"bad {cls.type_tag} value: {e}") from None


@dataclass(frozen=True)
class RosterEntry:
    """One user's row in a roster snapshot."""

    user_id: str
    name: str
    color: str
    seq: int
    state: InteractionState


@dataclass(frozen=True)
class WireMessage:
    """A single protocol frame; ``kind`` decides which fields are set."""

    kind: MessageKind
    room: str
    user_id: Optional[str] = None
    seq: Optional[int] = None
    name: Optional[str] = None
    color: Optional[str] = None
    state: Optional[InteractionState] = None
    users: Optional[tuple] = None

    def __post_init__(self):
        if self.users is not None:
            object.__setattr__(self, "users", tuple(self.users))


def join(room: str, name: str) -> WireMessage:
    return WireMessage(MessageKind.JOIN, room, name=name)


def welcome(room: str, user_id: str, color: str) -> WireMessage:
    return WireMessage(MessageKind.WELCOME, room, user_id=user_id, color=color)


def roster(room: str, users: Sequence[RosterEntry]) -> WireMessage:
    return WireMessage(MessageKind.ROSTER, room, users=tuple(users))


def state_update(
    room: str, user_id: str, seq: int, state: InteractionState
) -> WireMessage:
    return WireMessage(
        MessageKind.STATE_UPDATE, room, user_id=user_id, seq=seq, state=state
    )


def user_left(room: str, user_id: str) -> WireMessage:
    return WireMessage(MessageKind.USER_LEFT, room, user_id=user_id)


def ping(room: str) -> WireMessage:
    return WireMessage(MessageKind.PING, room)


def pong(room: str) -> WireMessage:
    return WireMessage(MessageKind.PONG, room)


def _check_room(room: Any, exc: type) -> None:
    if not isinstance(room, str) or not room or len(room) > MAX_ROOM_LEN:
        raise exc("room must be a non-empty string of at most 128 chars")


def _check_user_id(user_id: Any, exc: type) -> None:
    if not isinstance(user_id, str) or not user_id:
        raise exc("user_id must be a non-empty string")


def _check_seq(seq: Any, exc: type) -> None:
    if not isinstance(seq, int) or isinstance(seq, bool) or seq < 0:
        raise exc("seq must be a non-negative integer")


def _check_name(name: Any, exc: type) -> None:
    if not isinstance(name, str) or not name.strip() or len(name) > MAX_NAME_LEN:
        raise exc("name must be a non-empty string of at most 64 chars")


def _check_color(color: Any, exc: type) -> None:
    ok = (
        isinstance(color, str)
        and len(color) == 7
        and color[0] == "#"
        and all(c in "0123456789abcdef" for c in color[1:])
    )
    if not ok:
        raise exc("color must be lowercase #rrggbb hex")


def validate(msg: WireMessage, exc: type = InvalidMessage) -> None:
    """Raise ``exc`` if ``msg`` violates the message invariants."""
    _check_room(msg.room, exc)
    kind = msg.kind
    required = {
        MessageKind.JOIN: {"name"},
        MessageKind.WELCOME: {"user_id", "color"},
        MessageKind.ROSTER: {"users"},
        MessageKind.STATE_UPDATE: {"user_id", "seq", "state"},
        MessageKind.USER_LEFT: {"user_id"},
        MessageKind.PING: set(),
        MessageKind.PONG: set(),
    }[kind]
    all_optional = {"user_id", "seq", "name", "color", "state", "users"}
    for f in all_optional:
        present = getattr(msg, f) is not None
        if f in required and not present:
            raise exc(f"{kind.value} message requires field {f!r}")
        if f not in required and present:
            raise exc(f"{kind.value} message must not carry field {f!r}")
    if msg.user_id is not None:
        _check_user_id(msg.user_id, exc)
    if msg.seq is not None:
        _check_seq(msg.seq, exc)
    if msg.name is not None:
        _check_name(msg.name, exc)
    if msg.color is not None:
        _check_color(msg.color, exc)
    if msg.state is not None:
        msg.state.validate(exc)
    if msg.users is not None:
        ids = [u.user_id for u in msg.users]
        if ids != sorted(ids) or len(set(ids)) != len(ids):
            raise exc("roster users must be unique and sorted by user_id")
        for u in msg.users:
            _check_user_id(u.user_id, exc)
            _check_name(u.name, exc)
            _check_color(u.color, exc)
            _check_seq(u.seq, exc)
            u.state.validate(exc)


def encode(msg: WireMessage) -> bytes:
    """Serialize ``msg`` to its canonical UTF-8 JSON bytes."""
    validate(msg, InvalidMessage)
    obj: dict = {"kind": msg.kind.value, "room": msg.room}
    if msg.kind is MessageKind.JOIN:
        obj["name"] = msg.name
    elif msg.kind is MessageKind.WELCOME:
        obj["user_id"] = msg.user_id
        obj["color"] = msg.color
    elif msg.kind is MessageKind.ROSTER:
        obj["users"] = [
            {
                "user_id": u.user_id,
                "name": u.name,
                "color": u.color,
                "seq": u.seq,
                "state": u.state.to_wire(),
            }
            for u in msg.users
        ]
    elif msg.kind is MessageKind.STATE_UPDATE:
        obj["user_id"] = msg.user_id
        obj["seq"] = msg.seq
        obj["state"] = msg.state.to_wire()
    elif msg.kind is MessageKind.USER_LEFT:
        obj["user_id"] = msg.user_id
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":")).encode("utf-8")


_FIELDS_BY_KIND = {
    "join": {"name"},
    "welcome": {"user_id", "color"},
    "roster": {"users"},
    "state_update": {"user_id", "seq", "state"},
    "user_left": {"user_id"},
    "ping": set(),
    "pong": set(),
}


def decode(data: Union[bytes, str]) -> WireMessage:
    """Parse one frame; tolerates any key order, rejects anything else."""
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as e:
            raise MalformedInput(f"not valid UTF-8: {e}") from None
    try:
        obj = json.loads(data)
    except json.JSONDecodeError as e:
        raise MalformedInput(f"not valid JSON: {e}") from None
    if not isinstance(obj, dict):
        raise MalformedInput("frame must be a JSON object")
    kind_raw = obj.get("kind")
    if kind_raw is None:
        raise SchemaViolation("frame is missing kind")
    if kind_raw not in _FIELDS_BY_KIND:
        raise UnknownKind(f"unknown message kind {kind_raw!r}")
    allowed = {"kind", "room"} | _FIELDS_BY_KIND[kind_raw]
    extra = set(obj) - allowed
    if extra:
        raise SchemaViolation(f"unexpected fields for {kind_raw}: {sorted(extra)}")
    missing = allowed - set(obj)
    if missing:
        raise SchemaViolation(f"missing fields for {kind_raw}: {sorted(missing)}")

    state = None
    if "state" in obj:
        state = InteractionState.from_wire(obj["state"])
    users = None
    if "users" in obj:
        if not isinstance(obj["users"], list):
            raise SchemaViolation("users must be an array")
        users = []
        for row in obj["users"]:
            if not isinstance(row, dict) or set(row) != {
                "user_id",
                "name",
                "color",
                "seq",
                "state",
            }:
                raise SchemaViolation("bad roster user row")
            users.append(
                RosterEntry(
                    user_id=row["user_id"],
                    name=row["name"],
                    color=row["color"],
                    seq=row["seq"],
                    state=InteractionState.from_wire(row["state"]),
                )
            )
    msg = WireMessage(
        kind=MessageKind(kind_raw),
        room=obj.get("room"),
        user_id=obj.get("user_id"),
        seq=obj.get("seq"),
        name=obj.get("name"),
        color=obj.get("color"),
        state=state,
        users=tuple(users) if users is not None else None,
    )
    validate(msg, SchemaViolation)
    return msg
