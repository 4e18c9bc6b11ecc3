import copy
import json
from pathlib import Path

import pytest
from jsonschema import Draft7Validator

from vis_presence import annotator as A
from vis_presence.protocol import (
    InteractionState,
    IntervalExtents,
    MousePosition,
    PointTuples,
)
from vis_presence.session import UserPresence

from conftest import GALLERY_NAMES, load_gallery

SCHEMA = json.loads(
    (Path(__file__).parent / "data" / "vega-lite-schema.json").read_text()
)
VALIDATOR = Draft7Validator(SCHEMA)


def assert_schema_valid(doc):
    errors = list(VALIDATOR.iter_errors(doc))
    assert not errors, f"schema violations: {errors[0].message[:200]}"


EXPECTED_KINDS = {
    "histogram_brush": [("brush", A.InteractionClass.INTERVAL_BRUSH)],
    "scatter_point_select": [("picked", A.InteractionClass.POINT_SELECT)],
    "line_rule_hover": [("index", A.InteractionClass.POINT_SELECT)],
    "overview_detail": [("overview_brush", A.InteractionClass.INTERVAL_BRUSH)],
    "panzoom_scatter": [("grid", A.InteractionClass.SCALE_BOUND)],
    "querywidget_scatter": [
        ("max_hp", A.InteractionClass.WIDGET_BOUND),
        ("min_cyl", A.InteractionClass.WIDGET_BOUND),
    ],
}

EXPECTED_MODES = {
    "histogram_brush": A.RepresentationMode.IN_SITU_SPECIFIC,
    "scatter_point_select": A.RepresentationMode.IN_SITU_GENERIC,
    "line_rule_hover": A.RepresentationMode.IN_SITU_GENERIC,
    "overview_detail": A.RepresentationMode.IN_SITU_SPECIFIC,
    "panzoom_scatter": A.RepresentationMode.CURSOR_LEGEND,
    "querywidget_scatter": A.RepresentationMode.CURSOR_LEGEND,
}


class TestParseInteractions:
    @pytest.mark.parametrize("name", GALLERY_NAMES)
    def test_gallery_classification(self, name):
        kinds = A.parse_interactions(load_gallery(name))
        assert [(k.name, k.kind) for k in kinds] == EXPECTED_KINDS[name]

    def test_brush_channels(self):
        kinds = A.parse_interactions(load_gallery("histogram_brush"))
        assert kinds[0].channels == ("x",)

    def test_interval_defaults_to_xy(self):
        doc = {
            "params": [{"name": "b", "select": {"type": "interval"}}],
            "mark": "circle",
        }
        assert A.parse_interactions(doc)[0].channels == ("x", "y")

    def test_hover_event_source(self):
        kinds = A.parse_interactions(load_gallery("line_rule_hover"))
        assert kinds[0].event_source == "pointerover"

    def test_no_selections(self):
        assert A.parse_interactions({"mark": "bar"}) == []

    def test_not_an_object(self):
        with pytest.raises(A.NotAnObject):
            A.parse_interactions([1, 2])

    def test_repeat_unsupported(self):
        with pytest.raises(A.UnsupportedSpec):
            A.parse_interactions({"repeat": {"row": ["a"]}, "spec": {}})

    def test_facet_unsupported(self):
        with pytest.raises(A.UnsupportedSpec):
            A.parse_interactions({"facet": {"field": "a"}, "spec": {}})


class TestChooseDefaultMode:
    def test_point_only_is_generic(self):
        kinds = [A.InteractionKind("p", A.InteractionClass.POINT_SELECT)]
        assert A.choose_default_mode(kinds) is A.RepresentationMode.IN_SITU_GENERIC

    def test_brush_is_specific(self):
        kinds = [A.InteractionKind("b", A.InteractionClass.INTERVAL_BRUSH, ("x",))]
        assert A.choose_default_mode(kinds) is A.RepresentationMode.IN_SITU_SPECIFIC

    def test_widget_wins_over_point(self):
        kinds = [
            A.InteractionKind("w", A.InteractionClass.WIDGET_BOUND),
            A.InteractionKind("p", A.InteractionClass.POINT_SELECT),
        ]
        assert A.choose_default_mode(kinds) is A.RepresentationMode.CURSOR_LEGEND

    def test_scale_bound_is_legend(self):
        kinds = [A.InteractionKind("g", A.InteractionClass.SCALE_BOUND, ("x", "y"))]
        assert A.choose_default_mode(kinds) is A.RepresentationMode.CURSOR_LEGEND

    @pytest.mark.parametrize("name", GALLERY_NAMES)
    def test_gallery_defaults(self, name):
        kinds = A.parse_interactions(load_gallery(name))
        assert A.choose_default_mode(kinds) is EXPECTED_MODES[name]


def _original_preserved(original: dict, out: dict) -> None:
    """Every original top-level key survives unchanged, either at the top
    level, inside the composition wrapper's first element, or (for params)
    split between the two."""
    wrapped = None
    if "layer" in out and "layer" not in original:
        wrapped = out["layer"][0]
    elif "hconcat" in out and "hconcat" not in original:
        wrapped = out["hconcat"][0]
    for key, value in original.items():
        if key == "usermeta":
            continue
        if key in out and out[key] == value:
            continue
        if wrapped is not None and key in wrapped and wrapped[key] == value:
            continue
        if key == "params" and wrapped is not None:
            merged = wrapped.get("params", []) + out.get("params", [])
            assert all(p in merged for p in value), f"params lost: {value}"
            continue
        if key in ("vconcat", "hconcat", "concat") and key in out:
            # children may gain a layer wrapper but stay intact inside it
            for orig_child, new_child in zip(value, out[key]):
                assert new_child == orig_child or (
                    "layer" in new_child and new_child["layer"][0] == {
                        k: v for k, v in orig_child.items()
                        if k not in ("width", "height", "title")
                    }
                )
            continue
        raise AssertionError(f"original key {key!r} not preserved")


class TestAnnotate:
    @pytest.mark.parametrize("name", GALLERY_NAMES)
    def test_gallery_default_mode_output_is_schema_valid(self, name):
        doc = load_gallery(name)
        out = A.annotate(doc, EXPECTED_MODES[name])
        assert_schema_valid(out)

    @pytest.mark.parametrize("name", GALLERY_NAMES)
    def test_cursor_dataset_injected(self, name):
        out = A.annotate(load_gallery(name), EXPECTED_MODES[name])
        assert out["datasets"][A.CURSOR_DATASET] == []

    @pytest.mark.parametrize("name", GALLERY_NAMES)
    def test_marker_present(self, name):
        out = A.annotate(load_gallery(name), EXPECTED_MODES[name])
        assert out["usermeta"][A.MARKER_KEY]["mode"] == EXPECTED_MODES[name].value

    @pytest.mark.parametrize("name", GALLERY_NAMES)
    def test_original_content_preserved(self, name):
        doc = load_gallery(name)
        out = A.annotate(doc, EXPECTED_MODES[name])
        _original_preserved(doc, out)

    @pytest.mark.parametrize("name", GALLERY_NAMES)
    def test_input_not_mutated(self, name):
        doc = load_gallery(name)
        snapshot = copy.deepcopy(doc)
        A.annotate(doc, EXPECTED_MODES[name])
        assert doc == snapshot

    def test_annotate_twice_errors(self):
        doc = load_gallery("scatter_point_select")
        once = A.annotate(doc, A.RepresentationMode.IN_SITU_GENERIC)
        with pytest.raises(A.AlreadyAnnotated):
            A.annotate(once, A.RepresentationMode.IN_SITU_GENERIC)

    def test_generic_layer_structure(self):
        # golden structure: [original as layer, cursor layer]
        doc = load_gallery("scatter_point_select")
        out = A.annotate(doc, A.RepresentationMode.IN_SITU_GENERIC)
        assert len(out["layer"]) == 2
        original_view = out["layer"][0]
        for key in ("data", "mark", "encoding", "params"):
            assert original_view[key] == doc[key]
        cursor = out["layer"][1]
        assert cursor["data"] == {"name": A.CURSOR_DATASET}
        assert cursor["mark"]["type"] == "circle"
        assert cursor["mark"]["size"] == 64
        assert cursor["mark"]["opacity"] == 0.6
        assert cursor["encoding"]["x"]["field"] == "anchor_x"
        assert cursor["encoding"]["x"]["scale"] is None

    def test_specific_rect_layer_on_overview_only(self):
        doc = load_gallery("overview_detail")
        out = A.annotate(doc, A.RepresentationMode.IN_SITU_SPECIFIC)
        detail, overview = out["vconcat"]
        assert "layer" not in detail
        assert "layer" in overview
        rect = overview["layer"][1]
        assert rect["mark"]["type"] == "rect"
        assert rect["encoding"]["x"]["field"] == "x_lo"
        assert "y" not in rect["encoding"]  # brush is x-only
        assert_schema_valid(out)

    def test_specific_rule_layer_for_point_select(self):
        doc = load_gallery("line_rule_hover")
        out = A.annotate(doc, A.RepresentationMode.IN_SITU_SPECIFIC)
        rule = out["layer"][1]
        assert rule["mark"]["type"] == "rule"
        assert rule["encoding"]["x"]["field"] == "rule_x"
        assert rule["encoding"]["x"]["type"] == "temporal"
        assert_schema_valid(out)

    def test_specific_without_selection_mismatch(self):
        doc = load_gallery("panzoom_scatter")
        with pytest.raises(A.ModeKindMismatch):
            A.annotate(doc, A.RepresentationMode.IN_SITU_SPECIFIC)

    def test_legend_is_adjacent_view(self):
        doc = load_gallery("panzoom_scatter")
        out = A.annotate(doc, A.RepresentationMode.CURSOR_LEGEND)
        assert len(out["hconcat"]) == 2
        legend = out["hconcat"][1]
        assert legend["data"] == {"name": A.CURSOR_DATASET}
        assert legend["encoding"]["y"]["field"] == "label"

    def test_thumbnail_legend_mode(self):
        doc = load_gallery("histogram_brush")
        out = A.annotate(doc, A.RepresentationMode.THUMBNAIL_LEGEND)
        thumb = out["hconcat"][1]
        assert thumb["width"] == A.THUMBNAIL_WIDTH
        assert thumb["height"] == A.THUMBNAIL_HEIGHT
        assert_schema_valid(out)

    @pytest.mark.parametrize(
        "mode",
        [
            A.RepresentationMode.IN_SITU_GENERIC,
            A.RepresentationMode.CURSOR_LEGEND,
            A.RepresentationMode.THUMBNAIL_LEGEND,
        ],
    )
    @pytest.mark.parametrize("name", GALLERY_NAMES)
    def test_every_applicable_mode_is_schema_valid(self, name, mode):
        out = A.annotate(load_gallery(name), mode)
        assert_schema_valid(out)


class TestMakeThumbnail:
    @pytest.mark.parametrize("name", GALLERY_NAMES)
    def test_gallery_thumbnails_schema_valid(self, name):
        assert_schema_valid(A.make_thumbnail(load_gallery(name)))

    def test_strips_axes_legends_titles(self):
        doc = load_gallery("scatter_point_select")
        out = A.make_thumbnail(doc)
        enc = out["encoding"]
        assert enc["x"]["axis"] is None
        assert enc["y"]["axis"] is None
        assert "title" not in enc["x"]
        cond = enc["color"]["condition"]
        assert "legend" not in cond or cond["legend"] is None

    def test_sets_thumbnail_size(self):
        out = A.make_thumbnail(load_gallery("histogram_brush"))
        assert out["width"] == A.THUMBNAIL_WIDTH
        assert out["height"] == A.THUMBNAIL_HEIGHT

    def test_data_and_mark_untouched(self):
        doc = load_gallery("histogram_brush")
        out = A.make_thumbnail(doc)
        assert out["data"] == doc["data"]
        assert out["mark"] == doc["mark"]

    @pytest.mark.parametrize("name", GALLERY_NAMES)
    def test_idempotent(self, name):
        once = A.make_thumbnail(load_gallery(name))
        assert A.make_thumbnail(once) == once

    def test_reduced_spec_changes_only_size(self):
        doc = {"data": {"values": []}, "mark": "bar", "encoding": {}}
        out = A.make_thumbnail(doc)
        assert out == {
            "data": {"values": []},
            "mark": "bar",
            "encoding": {},
            "width": A.THUMBNAIL_WIDTH,
            "height": A.THUMBNAIL_HEIGHT,
        }

    def test_composite_sizes_children(self):
        out = A.make_thumbnail(load_gallery("overview_detail"))
        for child in out["vconcat"]:
            assert child["width"] == A.THUMBNAIL_WIDTH
            assert child["height"] == A.THUMBNAIL_HEIGHT

    def test_not_an_object(self):
        with pytest.raises(A.NotAnObject):
            A.make_thumbnail("nope")


BRUSH_KIND = A.InteractionKind(
    "brush", A.InteractionClass.INTERVAL_BRUSH, ("x", "y")
)
POINT_KIND = A.InteractionKind("picked", A.InteractionClass.POINT_SELECT, ("x", "y"))


class TestExtractAnchor:
    def test_mouse_position_identity(self):
        state = InteractionState({"hover": MousePosition(120, 80)})
        assert A.extract_anchor(state, [], A.ViewGeometry()) == (120, 80)

    def test_brush_top_left_with_inverted_y(self):
        # identity x mapping; y pixel axis grows downward so data y=20 maps
        # to the smaller pixel value: anchor = (10, pixel(20))
        geometry = A.ViewGeometry(
            x=A.LinearScale((0, 100), (0, 100)),
            y=A.LinearScale((0, 100), (100, 0)),
        )
        state = InteractionState(
            {"brush": IntervalExtents({"x": [10, 40], "y": [5, 20]})}
        )
        x, y = A.extract_anchor(state, [BRUSH_KIND], geometry)
        assert x == 10
        assert y == geometry.y(20)
        assert y == 80

    def test_point_select_first_tuple(self):
        geometry = A.ViewGeometry(
            x=A.LinearScale((0, 10), (0, 100)),
            y=A.LinearScale((0, 10), (100, 0)),
            x_field="hp",
            y_field="mpg",
        )
        state = InteractionState(
            {"picked": PointTuples([{"hp": 5, "mpg": 2}, {"hp": 9, "mpg": 9}])}
        )
        assert A.extract_anchor(state, [POINT_KIND], geometry) == (50, 80)

    def test_kind_priority_is_document_order(self):
        state = InteractionState(
            {
                "brush": IntervalExtents({"x": [10, 40]}),
                "hover": MousePosition(1, 2),
            }
        )
        hover_kind = A.InteractionKind("hover", A.InteractionClass.POINT_SELECT)
        x, _ = A.extract_anchor(state, [BRUSH_KIND, hover_kind], A.ViewGeometry())
        assert x == 10
        x, _ = A.extract_anchor(state, [hover_kind, BRUSH_KIND], A.ViewGeometry())
        assert x == 1

    def test_empty_state_has_no_anchor(self):
        with pytest.raises(A.NoAnchor):
            A.extract_anchor(InteractionState(), [BRUSH_KIND], A.ViewGeometry())

    def test_anchor_shift_monotonicity(self):
        # shifting a brush by +d in pixel x shifts the anchor by exactly +d
        geometry = A.ViewGeometry()
        for d in (1, 5, 17.5):
            s1 = InteractionState({"brush": IntervalExtents({"x": [10, 40]})})
            s2 = InteractionState(
                {"brush": IntervalExtents({"x": [10 + d, 40 + d]})}
            )
            x1, _ = A.extract_anchor(s1, [BRUSH_KIND], geometry)
            x2, _ = A.extract_anchor(s2, [BRUSH_KIND], geometry)
            assert x2 - x1 == d


def _user(uid, state):
    return UserPresence(
        user_id=uid, name=f"name-{uid}", color="#4c78a8", state=state
    )


class TestCursorData:
    def test_self_only_roster_is_empty(self):
        roster = [_user("u1", InteractionState())]
        assert (
            A.cursor_data(
                roster, "u1", A.RepresentationMode.IN_SITU_GENERIC, []
            )
            == []
        )

    def test_two_remote_mouse_users_sorted(self):
        roster = [
            _user("u3", InteractionState({"m": MousePosition(3, 3)})),
            _user("u2", InteractionState({"m": MousePosition(2, 2)})),
            _user("u1", InteractionState()),
        ]
        data = A.cursor_data(
            roster, "u1", A.RepresentationMode.IN_SITU_GENERIC, []
        )
        assert [d.user_id for d in data] == ["u2", "u3"]
        assert data[0].anchor_x == 2

    def test_remote_brush_specific_rect(self):
        roster = [
            _user("u1", InteractionState()),
            _user(
                "u2",
                InteractionState(
                    {"brush": IntervalExtents({"x": [0, 10], "y": [2, 8]})}
                ),
            ),
        ]
        data = A.cursor_data(
            roster, "u1", A.RepresentationMode.IN_SITU_SPECIFIC, [BRUSH_KIND]
        )
        assert len(data) == 1
        row = data[0].to_row()
        assert row["shape"] == "rect"
        assert (row["x_lo"], row["x_hi"]) == (0, 10)
        assert (row["y_lo"], row["y_hi"]) == (2, 8)

    def test_unrepresentable_users_omitted(self):
        roster = [
            _user("u1", InteractionState()),
            _user("u2", InteractionState()),  # no usable entry
        ]
        data = A.cursor_data(
            roster, "u1", A.RepresentationMode.IN_SITU_GENERIC, [BRUSH_KIND]
        )
        assert data == []

    def test_legend_mode_lists_everyone(self):
        roster = [_user("u1", InteractionState()), _user("u2", InteractionState())]
        data = A.cursor_data(
            roster, "u1", A.RepresentationMode.CURSOR_LEGEND, []
        )
        assert [d.user_id for d in data] == ["u2"]
        assert data[0].label == "name-u2"
