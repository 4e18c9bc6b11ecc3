import json
import random
from pathlib import Path

import pytest

from vis_presence import protocol as P

REPO = Path(__file__).resolve().parent.parent
GALLERY = REPO / "gallery"
GALLERY_NAMES = [
    "histogram_brush",
    "scatter_point_select",
    "line_rule_hover",
    "overview_detail",
    "panzoom_scatter",
    "querywidget_scatter",
]


def load_gallery(name: str) -> dict:
    with open(GALLERY / f"{name}.json", encoding="utf-8") as f:
        return json.load(f)


@pytest.fixture(params=GALLERY_NAMES)
def gallery_doc(request):
    return load_gallery(request.param)


# ---------------------------------------------------------------------------
# seeded random message generator (shared by property and acceptance tests)

_WORDS = ["x", "y", "sel", "brush", "pick", "hover", "zoom", "price", "hp"]


def _scalar(rng: random.Random):
    c = rng.randrange(4)
    if c == 0:
        return rng.randint(-1000, 1000)
    if c == 1:
        return round(rng.uniform(-1e6, 1e6), 6)
    if c == 2:
        return rng.choice(["a", "b", "long-ish string", "ünïcødé"])
    return rng.choice([True, False, None])


def _pair(rng: random.Random):
    a = round(rng.uniform(-1e4, 1e4), 4)
    b = round(rng.uniform(-1e4, 1e4), 4)
    return [min(a, b), max(a, b)]


def random_selection_value(rng: random.Random):
    c = rng.randrange(5)
    chans = rng.sample(_WORDS, rng.randint(1, 3))
    if c == 0:
        return P.PointTuples(
            [
                {f: _scalar(rng) for f in rng.sample(_WORDS, rng.randint(1, 3))}
                for _ in range(rng.randint(0, 3))
            ]
        )
    if c == 1:
        return P.IntervalExtents({ch: _pair(rng) for ch in chans})
    if c == 2:
        return P.WidgetBindings({ch: _scalar(rng) for ch in chans})
    if c == 3:
        return P.ScaleDomains({ch: _pair(rng) for ch in chans})
    return P.MousePosition(
        round(rng.uniform(0, 800), 2), round(rng.uniform(0, 600), 2)
    )


def random_state(rng: random.Random) -> P.InteractionState:
    entries = {
        name: random_selection_value(rng)
        for name in rng.sample(_WORDS, rng.randint(0, 3))
    }
    return P.InteractionState(entries, view_epoch=rng.randint(0, 5))


def random_message(rng: random.Random) -> P.WireMessage:
    room = rng.choice(["r", "room-42", "a" * 128])
    kind = rng.randrange(7)
    if kind == 0:
        return P.ping(room)
    if kind == 1:
        return P.pong(room)
    if kind == 2:
        return P.join(room, rng.choice(["alice", "bob", "Zoë", "n" * 64]))
    if kind == 3:
        return P.welcome(room, f"u{rng.randint(1, 99)}", "#4c78a8")
    if kind == 4:
        return P.user_left(room, f"u{rng.randint(1, 99)}")
    if kind == 5:
        return P.state_update(
            room, f"u{rng.randint(1, 99)}", rng.randint(0, 10**6), random_state(rng)
        )
    n = rng.randint(0, 4)
    users = [
        P.RosterEntry(
            user_id=f"u{i}",
            name=rng.choice(["alice", "bob", "carol"]),
            color="#f58518",
            seq=rng.randint(0, 100),
            state=random_state(rng),
        )
        for i in range(n)
    ]
    return P.roster(room, users)
