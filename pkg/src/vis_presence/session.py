"""Server-side room state: membership, color assignment, LWW user state.

All mutations for one room must be serialized by the caller (the relay
funnels every event for a room through one event loop); distinct rooms are
independent.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

from .protocol import InteractionState, RosterEntry

# Default 10-category scheme of the visualization grammar (tableau10).
PALETTE = (
    "#4c78a8",
    "#f58518",
    "#e45756",
    "#72b7b2",
    "#54a24b",
    "#eeca3b",
    "#b279a2",
    "#ff9da6",
    "#9d755d",
    "#bab0ac",
)

DEFAULT_MAX_USERS = 32


class SessionError(Exception):
    pass


class RoomFull(SessionError):
    pass


class UnknownRoom(SessionError):
    pass


class UnknownUser(SessionError):
    pass


class ApplyResult(Enum):
    APPLIED = "applied"
    STALE = "stale"


@dataclass
class UserPresence:
    user_id: str
    name: str
    color: str
    state: InteractionState = field(default_factory=InteractionState)
    seq: Optional[int] = None  # None until the first update is applied
    last_seen: float = 0.0

    def roster_entry(self) -> RosterEntry:
        # Users with no applied update are reported with seq 0 and an empty
        # state; receivers treat roster rows as seeds, not applied updates.
        return RosterEntry(
            user_id=self.user_id,
            name=self.name,
            color=self.color,
            seq=self.seq if self.seq is not None else 0,
            state=self.state,
        )


@dataclass
class Room:
    room_id: str
    users: Dict[str, UserPresence] = field(default_factory=dict)
    next_color_index: int = 0
    next_user_number: int = 1

    def roster(self) -> List[UserPresence]:
        return [self.users[uid] for uid in sorted(self.users)]


class SessionStore:
    """All rooms known to one relay server."""

    def __init__(
        self,
        palette: Tuple[str, ...] = PALETTE,
        max_users_per_room: int = DEFAULT_MAX_USERS,
    ):
        self.palette = tuple(palette)
        self.max_users_per_room = max_users_per_room
        self.rooms: Dict[str, Room] = {}

    def _room(self, room_id: str) -> Room:
        room = self.rooms.get(room_id)
        if room is None:
            raise UnknownRoom(room_id)
        return room

    def join(
        self, room_id: str, name: str, now: float = 0.0
    ) -> Tuple[UserPresence, List[UserPresence]]:
        """Add a user; returns their presence and a snapshot of the others."""
        name = name.strip()
        if not name:
            raise SessionError("display name must be non-empty")
        room = self.rooms.get(room_id)
        if room is None:
            room = Room(room_id)
            self.rooms[room_id] = room
        if len(room.users) >= self.max_users_per_room:
            raise RoomFull(room_id)
        user_id = f"u{room.next_user_number}"
        room.next_user_number += 1
        color = self.palette[room.next_color_index % len(self.palette)]
        room.next_color_index += 1
        presence = UserPresence(
            user_id=user_id, name=name, color=color, last_seen=now
        )
        others = [u for u in room.roster() if u.user_id != user_id]
        room.users[user_id] = presence
        return presence, others

    def apply_update(
        self,
        room_id: str,
        user_id: str,
        seq: int,
        state: InteractionState,
        now: float = 0.0,
    ) -> ApplyResult:
        """LWW per user: only a strictly newer seq replaces the stored state."""
        room = self._room(room_id)
        user = room.users.get(user_id)
        if user is None:
            raise UnknownUser(user_id)
        user.last_seen = now
        if user.seq is not None and seq <= user.seq:
            return ApplyResult.STALE
        user.seq = seq
        user.state = state
        return ApplyResult.APPLIED

    def leave(self, room_id: str, user_id: str) -> None:
        """Remove a user; colors are never rolled back. Empty rooms are dropped."""
        room = self._room(room_id)
        if user_id not in room.users:
            raise UnknownUser(user_id)
        del room.users[user_id]
        if not room.users:
            del self.rooms[room_id]

    def touch(self, room_id: str, user_id: str, now: float) -> None:
        room = self._room(room_id)
        user = room.users.get(user_id)
        if user is None:
            raise UnknownUser(user_id)
        user.last_seen = now

    def expire_idle(self, room_id: str, now: float, timeout: float) -> List[str]:
        """Evict users silent for longer than ``timeout``; acts like leave."""
        if timeout <= 0:
            raise ValueError("timeout must be positive")
        room = self.rooms.get(room_id)
        if room is None:
            return []
        evicted = [
            uid
            for uid in sorted(room.users)
            if now - room.users[uid].last_seen > timeout
        ]
        for uid in evicted:
            self.leave(room_id, uid)
        return evicted

    def roster(self, room_id: str) -> List[UserPresence]:
        return self._room(room_id).roster()
