"""Client-side presence state machine: independent exploration, peeking,
tracking, and forking.

All events for one client (local interactions and network deliveries) must
be applied in a single serialized order.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, Optional, Tuple

from .protocol import InteractionState, RosterEntry


class PresenceError(Exception):
    pass


class UnknownTarget(PresenceError):
    pass


class NotPeeking(PresenceError):
    pass


class TargetGone(PresenceError):
    pass


@dataclass(frozen=True)
class Independent:
    pass


@dataclass(frozen=True)
class Peeking:
    target: str
    # Saved local state to restore when the peek started from Independent;
    # None when it started from Tracking (prior_track carries the way back).
    saved: Optional[InteractionState] = None
    prior_track: Optional[str] = None


@dataclass(frozen=True)
class Tracking:
    target: str


PresenceMode = object  # Independent | Peeking | Tracking


@dataclass
class RemoteUser:
    """What this client knows about one remote collaborator."""

    user_id: str
    name: str = ""
    color: str = ""
    seq: Optional[int] = None
    state: InteractionState = field(default_factory=InteractionState)
    # True while seq/state came from a roster snapshot rather than an applied
    # StateUpdate; a snapshot's seq may be re-applied once (same state), so
    # the first live update with an equal seq is not stale.
    seeded: bool = False


class ClientPresence:
    """One client's view of the collaboration."""

    def __init__(self, name: str = "", user_id: Optional[str] = None):
        self.name = name
        self.user_id = user_id
        self.color: Optional[str] = None
        self.remotes: Dict[str, RemoteUser] = {}
        self.mode: PresenceMode = Independent()
        self.local = InteractionState()
        self.next_seq = 0

    # -- derived view ---------------------------------------------------

    def effective_view(self) -> InteractionState:
        mode = self.mode
        if isinstance(mode, Independent):
            return self.local
        target = mode.target
        remote = self.remotes.get(target)
        if remote is None:
            raise TargetGone(target)
        return remote.state

    def _require_remote(self, target: str) -> RemoteUser:
        remote = self.remotes.get(target)
        if remote is None:
            raise UnknownTarget(target)
        return remote

    # -- peek / track / fork --------------------------------------------

    def begin_peek(self, target: str) -> None:
        self._require_remote(target)
        mode = self.mode
        if isinstance(mode, Peeking):
            # Retarget in place; the original restore point is kept.
            self.mode = replace(mode, target=target)
        elif isinstance(mode, Tracking):
            self.mode = Peeking(target, prior_track=mode.target)
        else:
            self.mode = Peeking(target, saved=self.local)

    def end_peek(self) -> None:
        mode = self.mode
        if not isinstance(mode, Peeking):
            raise NotPeeking()
        if mode.prior_track is not None:
            self.mode = Tracking(mode.prior_track)
        else:
            self.local = mode.saved
            self.mode = Independent()

    def begin_track(self, target: str) -> None:
        self._require_remote(target)
        self.mode = Tracking(target)

    def on_local_interaction(
        self, new_state: InteractionState
    ) -> Tuple[int, InteractionState]:
        """Apply a local interaction; returns the (seq, state) to emit.

        Interacting while peeking or tracking forks: the remote state is the
        seed and the new interaction's entries overwrite same-named entries.
        """
        mode = self.mode
        if isinstance(mode, Independent):
            self.local = new_state
        else:
            remote = self.remotes.get(mode.target)
            seed = remote.state if remote is not None else InteractionState()
            self.local = seed.merged_with(new_state)
            self.mode = Independent()
        seq = self.next_seq
        self.next_seq += 1
        return seq, self.local

    # -- network deliveries ---------------------------------------------

    def on_remote_update(
        self, user_id: str, seq: int, state: InteractionState
    ) -> bool:
        """LWW merge of a remote user's update; returns True if applied."""
        remote = self.remotes.get(user_id)
        if remote is None:
            # Updates may race ahead of the roster; insert a placeholder.
            remote = RemoteUser(user_id=user_id)
            self.remotes[user_id] = remote
        if remote.seq is not None:
            if seq < remote.seq or (seq == remote.seq and not remote.seeded):
                return False
        remote.seq = seq
        remote.state = state
        remote.seeded = False
        return True

    def on_roster(self, entries: Iterable[RosterEntry]) -> None:
        """Reconcile with a full roster snapshot (self excluded)."""
        seen = set()
        for entry in entries:
            if entry.user_id == self.user_id:
                continue
            seen.add(entry.user_id)
            remote = self.remotes.get(entry.user_id)
            if remote is None:
                self.remotes[entry.user_id] = RemoteUser(
                    user_id=entry.user_id,
                    name=entry.name,
                    color=entry.color,
                    seq=entry.seq,
                    state=entry.state,
                    seeded=True,
                )
                continue
            remote.name = entry.name
            remote.color = entry.color
            if remote.seq is None or entry.seq > remote.seq:
                remote.seq = entry.seq
                remote.state = entry.state
                remote.seeded = True
        for uid in list(self.remotes):
            if uid not in seen:
                self.on_user_left(uid)

    def on_user_left(self, user_id: str) -> None:
        remote = self.remotes.pop(user_id, None)
        if remote is None:
            return
        mode = self.mode
        if isinstance(mode, Tracking) and mode.target == user_id:
            # Keep the view continuous: adopt the last-seen tracked state.
            self.local = remote.state
            self.mode = Independent()
        elif isinstance(mode, Peeking):
            if mode.prior_track == user_id:
                self.mode = replace(
                    mode, prior_track=None, saved=remote.state
                )
            if isinstance(self.mode, Peeking) and self.mode.target == user_id:
                self.end_peek()

    def on_welcome(self, user_id: str, color: str) -> None:
        self.user_id = user_id
        self.color = color
        self.remotes.pop(user_id, None)
