import itertools

import pytest

from vis_presence.protocol import InteractionState, MousePosition
from vis_presence.session import (
    PALETTE,
    ApplyResult,
    RoomFull,
    SessionStore,
    UnknownRoom,
    UnknownUser,
)


def state(tag: float) -> InteractionState:
    return InteractionState({"m": MousePosition(tag, tag)})


class TestJoin:
    def test_first_join_gets_first_color(self):
        s = SessionStore()
        user, others = s.join("r", "alice")
        assert user.color == PALETTE[0]
        assert user.user_id == "u1"
        assert others == []

    def test_palette_cycles_on_11th_user(self):
        s = SessionStore()
        users = [s.join("r", f"user{i}")[0] for i in range(11)]
        assert [u.color for u in users[:10]] == list(PALETTE)
        assert users[10].color == PALETTE[0]

    def test_ten_concurrent_users_distinct_colors(self):
        s = SessionStore()
        users = [s.join("r", f"user{i}")[0] for i in range(10)]
        assert len({u.color for u in users}) == 10

    def test_room_full(self):
        s = SessionStore(max_users_per_room=2)
        s.join("r", "a")
        s.join("r", "b")
        with pytest.raises(RoomFull):
            s.join("r", "c")

    def test_blank_name_rejected(self):
        s = SessionStore()
        with pytest.raises(Exception):
            s.join("r", "   ")

    def test_roster_after_leave_carries_latest_state(self):
        # join x2, one update, one leave: the roster seen by a late joiner
        # has exactly one other user with that user's latest state
        s = SessionStore()
        a, _ = s.join("r", "a")
        b, _ = s.join("r", "b")
        s.apply_update("r", b.user_id, 0, state(1.0))
        s.apply_update("r", b.user_id, 1, state(2.0))
        s.leave("r", a.user_id)
        _, others = s.join("r", "c")
        assert [u.user_id for u in others] == [b.user_id]
        assert others[0].state == state(2.0)
        assert others[0].seq == 1


class TestApplyUpdate:
    def test_monotone_application(self):
        s = SessionStore()
        u, _ = s.join("r", "a")
        assert s.apply_update("r", u.user_id, 0, state(0)) is ApplyResult.APPLIED
        assert s.apply_update("r", u.user_id, 1, state(1)) is ApplyResult.APPLIED
        assert s.rooms["r"].users[u.user_id].state == state(1)

    def test_reordered_update_is_stale(self):
        s = SessionStore()
        u, _ = s.join("r", "a")
        s.apply_update("r", u.user_id, 1, state(1))
        assert s.apply_update("r", u.user_id, 0, state(0)) is ApplyResult.STALE
        assert s.rooms["r"].users[u.user_id].state == state(1)

    def test_unknown_user(self):
        s = SessionStore()
        s.join("r", "a")
        with pytest.raises(UnknownUser):
            s.apply_update("r", "u99", 0, state(0))

    def test_unknown_room(self):
        s = SessionStore()
        with pytest.raises(UnknownRoom):
            s.apply_update("nope", "u1", 0, state(0))

    def test_all_interleavings_converge_to_max_seq(self):
        # brute-force oracle: any merge order of 2 users x 3 updates each
        # ends at {user: update with max seq}
        updates = [("A", i, state(10 + i)) for i in range(3)] + [
            ("B", i, state(20 + i)) for i in range(3)
        ]
        seen = set()
        for order in itertools.permutations(range(6)):
            key = tuple(updates[i][0] for i in order)
            if key in seen:  # 6!/(3!3!) distinct merge orders per receiver
                continue
            seen.add(key)
            s = SessionStore()
            ua, _ = s.join("r", "A")
            ub, _ = s.join("r", "B")
            ids = {"A": ua.user_id, "B": ub.user_id}
            for i in order:
                who, seq, st = updates[i]
                s.apply_update("r", ids[who], seq, st)
            assert s.rooms["r"].users[ids["A"]].state == state(12)
            assert s.rooms["r"].users[ids["B"]].state == state(22)
            assert s.rooms["r"].users[ids["A"]].seq == 2
        assert len(seen) == 20


class TestLeave:
    def test_empty_room_garbage_collected(self):
        s = SessionStore()
        u, _ = s.join("r", "a")
        s.leave("r", u.user_id)
        assert "r" not in s.rooms

    def test_color_index_not_rolled_back(self):
        s = SessionStore()
        a, _ = s.join("r", "a")
        s.join("r", "b")
        s.leave("r", a.user_id)
        c, _ = s.join("r", "c")
        assert c.color == PALETTE[2]

    def test_leave_unknown_user(self):
        s = SessionStore()
        s.join("r", "a")
        with pytest.raises(UnknownUser):
            s.leave("r", "u99")


class TestExpireIdle:
    def test_fresh_users_not_evicted(self):
        s = SessionStore()
        s.join("r", "a", now=100.0)
        assert s.expire_idle("r", now=110.0, timeout=30.0) == []

    def test_idle_user_evicted(self):
        s = SessionStore()
        a, _ = s.join("r", "a", now=0.0)
        b, _ = s.join("r", "b", now=35.0)
        assert s.expire_idle("r", now=40.0, timeout=30.0) == [a.user_id]
        assert a.user_id not in s.rooms["r"].users

    def test_eviction_then_rejoin_gets_new_identity(self):
        s = SessionStore()
        a, _ = s.join("r", "a", now=0.0)
        s.join("r", "b", now=0.0)
        s.apply_update("r", "u2", 0, state(1), now=50.0)
        s.expire_idle("r", now=50.0, timeout=30.0)
        a2, others = s.join("r", "a", now=50.0)
        assert a2.user_id == "u3"
        assert a2.color == PALETTE[2]
        assert [u.user_id for u in others] == ["u2"]

    def test_timeout_must_be_positive(self):
        s = SessionStore()
        with pytest.raises(ValueError):
            s.expire_idle("r", now=0.0, timeout=0.0)


def test_roster_equals_event_fold():
    # oracle replay: roster after a mixed event sequence equals a plain fold
    s = SessionStore()
    events = [
        ("join", "a"),
        ("join", "b"),
        ("update", "u1", 0, state(1)),
        ("update", "u2", 0, state(2)),
        ("leave", "u1"),
        ("join", "c"),
        ("update", "u2", 1, state(3)),
        ("update", "u2", 0, state(9)),  # stale
    ]
    oracle = {}
    for ev in events:
        if ev[0] == "join":
            uid, _ = s.join("r", ev[1])
            oracle[uid.user_id] = (ev[1], None, InteractionState())
        elif ev[0] == "update":
            _, uid, seq, st = ev
            s.apply_update("r", uid, seq, st)
            name, cur, curst = oracle[uid]
            if cur is None or seq > cur:
                oracle[uid] = (name, seq, st)
        else:
            s.leave("r", ev[1])
            del oracle[ev[1]]
    roster = {u.user_id: (u.name, u.seq, u.state) for u in s.roster("r")}
    assert roster == oracle
