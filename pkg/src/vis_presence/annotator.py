"""Vega-Lite document transformations for remote-user representations.

Classifies a document's interactions, then rewrites the document to carry
one of four cursor representations: generic in-situ dots, interaction-
specific in-situ shapes, an external cursor legend, or an external
thumbnail legend. Thumbnails are stripped-down miniatures of a view.

All functions are pure document-to-document transformations.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from .protocol import (
    InteractionState,
    IntervalExtents,
    MousePosition,
    PointTuples,
    ScaleDomains,
    SelectionValue,
    WidgetBindings,
)
from .session import UserPresence

CURSOR_DATASET = "__presence_cursors__"
MARKER_KEY = "__presence__"

DEFAULT_SCHEMA_URL = "https://vega.github.io/schema/vega-lite/v6.json"

THUMBNAIL_WIDTH = 100
THUMBNAIL_HEIGHT = 60

GENERIC_CURSOR_SIZE = 64  # mark area in px^2
GENERIC_CURSOR_OPACITY = 0.6


class AnnotatorError(Exception):
    pass


class NotAnObject(AnnotatorError):
    pass


class UnsupportedSpec(AnnotatorError):
    def __init__(self, message: str, path: str = "$"):
        super().__init__(f"{message} (at {path})")
        self.path = path


class AlreadyAnnotated(AnnotatorError):
    pass


class ModeKindMismatch(AnnotatorError):
    pass


class NoAnchor(AnnotatorError):
    pass


class InteractionClass(Enum):
    POINT_SELECT = "point_select"
    INTERVAL_BRUSH = "interval_brush"
    WIDGET_BOUND = "widget_bound"
    SCALE_BOUND = "scale_bound"


@dataclass(frozen=True)
class InteractionKind:
    """One discovered selection/parameter and how it drives the view."""

    name: str
    kind: InteractionClass
    channels: Tuple[str, ...] = ()
    event_source: str = ""


class RepresentationMode(Enum):
    IN_SITU_GENERIC = "generic"
    IN_SITU_SPECIFIC = "specific"
    CURSOR_LEGEND = "legend"
    THUMBNAIL_LEGEND = "thumbnail"


@dataclass
class CursorDatum:
    """One row of the injected cursor data source."""

    user_id: str
    color: str
    label: str
    anchor_x: Optional[float] = None
    anchor_y: Optional[float] = None
    shape_params: Dict[str, Any] = field(default_factory=dict)

    def to_row(self) -> Dict[str, Any]:
        row: Dict[str, Any] = {
            "user_id": self.user_id,
            "color": self.color,
            "label": self.label,
        }
        if self.anchor_x is not None:
            row["anchor_x"] = self.anchor_x
            row["anchor_y"] = self.anchor_y
        row.update(self.shape_params)
        return row


# ---------------------------------------------------------------------------
# interaction discovery


_VIEW_COMPOSITION_KEYS = ("layer", "hconcat", "vconcat", "concat")
_UNSUPPORTED_KEYS = ("repeat", "facet", "spec")

_POSITION_CHANNELS = ("x", "y")


def _require_object(doc: Any) -> None:
    if not isinstance(doc, dict):
        raise NotAnObject("specification must be a JSON object")


def _iter_views(doc: dict, path: str = "$"):
    """Yield (view, path) for the document and every nested sub-view."""
    yield doc, path
    for key in _UNSUPPORTED_KEYS:
        if key in doc:
            raise UnsupportedSpec(f"operator {key!r} is not supported", f"{path}.{key}")
    for key in _VIEW_COMPOSITION_KEYS:
        if key in doc:
            children = doc[key]
            if not isinstance(children, list):
                raise UnsupportedSpec(f"{key} must be an array", f"{path}.{key}")
            for i, child in enumerate(children):
                if not isinstance(child, dict):
                    raise UnsupportedSpec(
                        "sub-views must be objects", f"{path}.{key}[{i}]"
                    )
                yield from _iter_views(child, f"{path}.{key}[{i}]")


def _channels_for_fields(view: dict, fields: Sequence[str]) -> List[str]:
    encoding = view.get("encoding", {})
    channels = []
    for ch, cdef in encoding.items():
        if isinstance(cdef, dict) and cdef.get("field") in fields:
            channels.append(ch)
    return channels


def _classify_param(param: dict, view: dict) -> Optional[InteractionKind]:
    name = param.get("name")
    if not isinstance(name, str) or not name:
        return None
    select = param.get("select")
    if select is None:
        if "bind" in param:
            return InteractionKind(
                name=name, kind=InteractionClass.WIDGET_BOUND, event_source="input"
            )
        return None
    if isinstance(select, str):
        select = {"type": select}
    stype = select.get("type")
    encodings = tuple(select.get("encodings", ()))
    if stype == "interval":
        if not encodings:
            encodings = _POSITION_CHANNELS
        if param.get("bind") == "scales":
            return InteractionKind(
                name=name,
                kind=InteractionClass.SCALE_BOUND,
                channels=encodings,
                event_source=str(select.get("on", "drag")),
            )
        return InteractionKind(
            name=name,
            kind=InteractionClass.INTERVAL_BRUSH,
            channels=encodings,
            event_source=str(select.get("on", "drag")),
        )
    if stype == "point":
        channels = list(encodings)
        if not channels and select.get("fields"):
            channels = _channels_for_fields(view, select["fields"])
        return InteractionKind(
            name=name,
            kind=InteractionClass.POINT_SELECT,
            channels=tuple(channels),
            event_source=str(select.get("on", "click")),
        )
    return None


def parse_interactions(doc: dict) -> List[InteractionKind]:
    """Discover and classify every selection/parameter, in document order."""
    _require_object(doc)
    kinds: List[InteractionKind] = []
    for view, path in _iter_views(doc):
        params = view.get("params", [])
        if not isinstance(params, list):
            raise UnsupportedSpec("params must be an array", f"{path}.params")
        for param in params:
            if not isinstance(param, dict):
                continue
            kind = _classify_param(param, view)
            if kind is not None:
                kinds.append(kind)
    return kinds


def choose_default_mode(kinds: Sequence[InteractionKind]) -> RepresentationMode:
    """Pick the representation best suited to the discovered interactions."""
    classes = {k.kind for k in kinds}
    if InteractionClass.WIDGET_BOUND in classes or InteractionClass.SCALE_BOUND in classes:
        return RepresentationMode.CURSOR_LEGEND
    if InteractionClass.INTERVAL_BRUSH in classes:
        return RepresentationMode.IN_SITU_SPECIFIC
    return RepresentationMode.IN_SITU_GENERIC


# ---------------------------------------------------------------------------
# annotation

# Top-level keys hoisted out of a view when it is wrapped in a composition.
_HOISTED_KEYS = (
    "$schema",
    "datasets",
    "usermeta",
    "background",
    "padding",
    "autosize",
    "config",
)


def _is_annotated(doc: dict) -> bool:
    usermeta = doc.get("usermeta")
    return isinstance(usermeta, dict) and MARKER_KEY in usermeta


def _split_top_level(doc: dict) -> Tuple[dict, dict]:
    """Separate hoisted top-level keys from the view definition itself."""
    hoisted = {k: copy.deepcopy(doc[k]) for k in _HOISTED_KEYS if k in doc}
    view = {k: copy.deepcopy(v) for k, v in doc.items() if k not in _HOISTED_KEYS}
    return hoisted, view


def _channel_type(view: dict, channel: str) -> str:
    cdef = view.get("encoding", {}).get(channel)
    if isinstance(cdef, dict) and isinstance(cdef.get("type"), str):
        return cdef["type"]
    return "quantitative"


def _generic_cursor_layer() -> dict:
    return {
        "data": {"name": CURSOR_DATASET},
        "mark": {
            "type": "circle",
            "size": GENERIC_CURSOR_SIZE,
            "opacity": GENERIC_CURSOR_OPACITY,
            "tooltip": {"content": "data"},
        },
        "encoding": {
            "x": {"field": "anchor_x", "type": "quantitative", "scale": None},
            "y": {"field": "anchor_y", "type": "quantitative", "scale": None},
            "fill": {"field": "color", "type": "nominal", "scale": None, "legend": None},
        },
    }


def _specific_cursor_layers(
    view: dict, kinds: Sequence[InteractionKind]
) -> List[dict]:
    layers: List[dict] = []
    brush = next(
        (k for k in kinds if k.kind is InteractionClass.INTERVAL_BRUSH), None
    )
    if brush is not None:
        encoding: Dict[str, Any] = {
            "stroke": {
                "field": "color",
                "type": "nominal",
                "scale": None,
                "legend": None,
            },
        }
        if "x" in brush.channels:
            encoding["x"] = {"field": "x_lo", "type": _channel_type(view, "x")}
            encoding["x2"] = {"field": "x_hi"}
        if "y" in brush.channels:
            encoding["y"] = {"field": "y_lo", "type": _channel_type(view, "y")}
            encoding["y2"] = {"field": "y_hi"}
        layers.append(
            {
                "data": {"name": CURSOR_DATASET},
                "transform": [{"filter": "datum.shape === 'rect'"}],
                "mark": {"type": "rect", "fillOpacity": 0, "strokeWidth": 2},
                "encoding": encoding,
            }
        )
    if any(k.kind is InteractionClass.POINT_SELECT for k in kinds):
        layers.append(
            {
                "data": {"name": CURSOR_DATASET},
                "transform": [{"filter": "datum.shape === 'rule'"}],
                "mark": {"type": "rule", "strokeWidth": 2, "opacity": 0.7},
                "encoding": {
                    "x": {"field": "rule_x", "type": _channel_type(view, "x")},
                    "color": {
                        "field": "color",
                        "type": "nominal",
                        "scale": None,
                        "legend": None,
                    },
                },
            }
        )
    return layers


def _legend_view() -> dict:
    return {
        "data": {"name": CURSOR_DATASET},
        "mark": {"type": "square", "size": 140},
        "title": "Collaborators",
        "encoding": {
            "y": {
                "field": "label",
                "type": "nominal",
                "axis": {"title": None, "ticks": False, "domain": False},
                "sort": {"field": "user_id"},
            },
            "fill": {"field": "color", "type": "nominal", "scale": None, "legend": None},
        },
    }


def _find_annotation_target(view: dict, kinds: Sequence[InteractionKind]):
    """Pick the sub-view to receive in-situ layers.

    Composite views get the layer on the child declaring the anchorable
    interaction (the overview panel of an overview+detail chart, say);
    unit views receive it directly. Returns (parent_list, index) or None
    when the target is the top view itself.
    """
    anchorable = {
        k.name
        for k in kinds
        if k.kind in (InteractionClass.INTERVAL_BRUSH, InteractionClass.POINT_SELECT)
    }

    def declares(v: dict) -> bool:
        return any(
            isinstance(p, dict) and p.get("name") in anchorable
            for p in v.get("params", [])
        )

    for key in ("hconcat", "vconcat", "concat"):
        if key in view:
            children = view[key]
            for i, child in enumerate(children):
                for sub, _ in _iter_views(child):
                    if declares(sub):
                        return children, i
            return children, 0
    return None


def _wrap_with_layers(view: dict, extra_layers: List[dict]) -> dict:
    # width/height/title may not sit on a layered view's children; hoist them.
    wrapper_props = {
        k: view.pop(k) for k in ("width", "height", "title") if k in view
    }
    wrapped = {"layer": [view] + extra_layers}
    wrapped.update(wrapper_props)
    return wrapped


def annotate(
    doc: dict,
    mode: RepresentationMode,
    kinds: Optional[Sequence[InteractionKind]] = None,
) -> dict:
    """Return a new document carrying cursor machinery for ``mode``.

    The output embeds the original document content unchanged, adds the
    ``__presence_cursors__`` data source (initially empty), the mode-specific
    marks or adjacent views, and a ``usermeta`` marker that prevents double
    annotation.
    """
    _require_object(doc)
    if _is_annotated(doc):
        raise AlreadyAnnotated("document already carries presence annotations")
    if kinds is None:
        kinds = parse_interactions(doc)
    else:
        list(_iter_views(doc))  # still reject unsupported operators
    classes = {k.kind for k in kinds}
    if mode is RepresentationMode.IN_SITU_SPECIFIC and not (
        classes & {InteractionClass.INTERVAL_BRUSH, InteractionClass.POINT_SELECT}
    ):
        raise ModeKindMismatch(
            "specific cursors need an interval or point selection"
        )

    hoisted, view = _split_top_level(doc)
    # Widget-bound (variable) params are only legal at the top level; hoist
    # them before the view is nested inside a composition.
    var_params = [
        p
        for p in view.get("params", [])
        if isinstance(p, dict) and "select" not in p
    ]
    if var_params:
        retained = [p for p in view["params"] if "select" in p]
        if retained:
            view["params"] = retained
        else:
            del view["params"]
    out: Dict[str, Any] = {}
    out["$schema"] = hoisted.get("$schema", DEFAULT_SCHEMA_URL)
    datasets = dict(hoisted.get("datasets", {}))
    datasets[CURSOR_DATASET] = []
    out["datasets"] = datasets

    if mode in (RepresentationMode.IN_SITU_GENERIC, RepresentationMode.IN_SITU_SPECIFIC):
        target = _find_annotation_target(view, kinds)
        if target is None:
            if mode is RepresentationMode.IN_SITU_GENERIC:
                layers = [_generic_cursor_layer()]
            else:
                layers = _specific_cursor_layers(view, kinds)
            body = _wrap_with_layers(view, layers)
        else:
            children, idx = target
            child = children[idx]
            if mode is RepresentationMode.IN_SITU_GENERIC:
                layers = [_generic_cursor_layer()]
            else:
                layers = _specific_cursor_layers(child, kinds)
            children[idx] = _wrap_with_layers(child, layers)
            body = view
        out.update(body)
    else:
        if mode is RepresentationMode.CURSOR_LEGEND:
            addon = _legend_view()
        else:
            thumb = _reduce_view(copy.deepcopy(view))
            _set_thumbnail_size(thumb)
            addon = thumb
        out["hconcat"] = [view, addon]

    if var_params:
        out["params"] = var_params
    for k, v in hoisted.items():
        if k in ("$schema", "datasets", "usermeta"):
            continue
        out[k] = v
    usermeta = dict(hoisted.get("usermeta", {}))
    usermeta[MARKER_KEY] = {"mode": mode.value}
    out["usermeta"] = usermeta
    return out


# ---------------------------------------------------------------------------
# thumbnails

_OPAQUE_KEYS = {"data", "datasets", "values", "transform", "mark", "params"}
_LEGEND_CHANNELS = {
    "color",
    "fill",
    "stroke",
    "opacity",
    "fillOpacity",
    "strokeOpacity",
    "size",
    "shape",
    "strokeWidth",
    "strokeDash",
    "angle",
}


def _strip_decorations(node: Any) -> None:
    if not isinstance(node, dict):
        if isinstance(node, list):
            for item in node:
                _strip_decorations(item)
        return
    node.pop("title", None)
    encoding = node.get("encoding")
    if isinstance(encoding, dict):
        for channel, cdef in encoding.items():
            if not isinstance(cdef, dict):
                continue
            cdef.pop("title", None)
            # value-only defs take no axis/legend properties
            is_field_def = any(
                k in cdef for k in ("field", "aggregate", "datum", "bin")
            )
            if not is_field_def:
                continue
            if channel in _POSITION_CHANNELS:
                cdef["axis"] = None
            if channel in _LEGEND_CHANNELS:
                cdef["legend"] = None
    for key, value in node.items():
        if key in _OPAQUE_KEYS or key == "encoding":
            continue
        _strip_decorations(value)


def _set_thumbnail_size(view: dict) -> None:
    if any(k in view for k in ("hconcat", "vconcat", "concat")):
        for key in ("hconcat", "vconcat", "concat"):
            for child in view.get(key, []):
                if isinstance(child, dict):
                    _set_thumbnail_size(child)
        view.pop("width", None)
        view.pop("height", None)
    else:
        view["width"] = THUMBNAIL_WIDTH
        view["height"] = THUMBNAIL_HEIGHT


def _reduce_view(view: dict) -> dict:
    _strip_decorations(view)
    return view


def make_thumbnail(doc: dict) -> dict:
    """Reduce a document to a miniature: no axes, legends, or titles.

    Data and mark definitions are untouched; the operation is idempotent.
    """
    _require_object(doc)
    out = copy.deepcopy(doc)
    _reduce_view(out)
    _set_thumbnail_size(out)
    return out


# ---------------------------------------------------------------------------
# anchors and cursor data


@dataclass(frozen=True)
class LinearScale:
    """Affine data-to-pixel mapping for one channel."""

    domain: Tuple[float, float]
    range: Tuple[float, float]

    def __call__(self, value: float) -> float:
        d0, d1 = self.domain
        r0, r1 = self.range
        if d1 == d0:
            return r0
        return r0 + (value - d0) * (r1 - r0) / (d1 - d0)


IDENTITY = LinearScale((0.0, 1.0), (0.0, 1.0))


@dataclass(frozen=True)
class ViewGeometry:
    """Data-to-pixel mappings for the channels a view exposes."""

    x: LinearScale = IDENTITY
    y: LinearScale = IDENTITY
    x_field: Optional[str] = None
    y_field: Optional[str] = None


def _brush_anchor(
    extents: IntervalExtents, geometry: ViewGeometry
) -> Tuple[float, float]:
    ext = extents.as_dict()
    px = 0.0
    py = 0.0
    if "x" in ext:
        lo, hi = ext["x"]
        px = min(geometry.x(lo), geometry.x(hi))
    if "y" in ext:
        lo, hi = ext["y"]
        py = min(geometry.y(lo), geometry.y(hi))
    return px, py


def _point_anchor(
    tuples: PointTuples, geometry: ViewGeometry
) -> Optional[Tuple[float, float]]:
    if not tuples.tuples:
        return None
    first = tuples.tuples[0]
    px = py = None
    if geometry.x_field is not None and geometry.x_field in first:
        px = geometry.x(first[geometry.x_field])
    if geometry.y_field is not None and geometry.y_field in first:
        py = geometry.y(first[geometry.y_field])
    if px is None and py is None:
        return None
    return px if px is not None else 0.0, py if py is not None else 0.0


def extract_anchor(
    state: InteractionState,
    kinds: Sequence[InteractionKind],
    geometry: ViewGeometry,
) -> Tuple[float, float]:
    """Pixel position summarizing a user's interaction.

    Brushes anchor at the top-left pixel corner of the brushed region; point
    selections at the first selected tuple; a mouse position passes through
    verbatim. The first kind (in document order) with a value wins.
    """
    for kind in kinds:
        value = state.get(kind.name)
        if value is None:
            continue
        if isinstance(value, MousePosition):
            return value.x, value.y
        if (
            kind.kind is InteractionClass.INTERVAL_BRUSH
            and isinstance(value, IntervalExtents)
        ):
            return _brush_anchor(value, geometry)
        if (
            kind.kind is InteractionClass.POINT_SELECT
            and isinstance(value, PointTuples)
        ):
            anchor = _point_anchor(value, geometry)
            if anchor is not None:
                return anchor
    for _, value in state.entries:
        if isinstance(value, MousePosition):
            return value.x, value.y
    raise NoAnchor("no usable entry for any known interaction")


def _specific_shape(
    state: InteractionState, kinds: Sequence[InteractionKind]
) -> Optional[Dict[str, Any]]:
    for kind in kinds:
        value = state.get(kind.name)
        if value is None:
            continue
        if (
            kind.kind is InteractionClass.INTERVAL_BRUSH
            and isinstance(value, IntervalExtents)
        ):
            ext = value.as_dict()
            shape: Dict[str, Any] = {"shape": "rect"}
            if "x" in ext:
                shape["x_lo"], shape["x_hi"] = ext["x"]
            if "y" in ext:
                shape["y_lo"], shape["y_hi"] = ext["y"]
            return shape
        if (
            kind.kind is InteractionClass.POINT_SELECT
            and isinstance(value, PointTuples)
            and value.tuples
        ):
            first = value.tuples[0]
            if len(first) >= 1:
                return {"shape": "rule", "rule_x": next(iter(first.values()))}
    return None


def cursor_data(
    roster: Sequence[UserPresence],
    self_id: Optional[str],
    mode: RepresentationMode,
    kinds: Sequence[InteractionKind],
    geometry: ViewGeometry = ViewGeometry(),
) -> List[CursorDatum]:
    """Rows for the injected data source: one per representable remote user."""
    data: List[CursorDatum] = []
    for user in sorted(roster, key=lambda u: u.user_id):
        if user.user_id == self_id:
            continue
        datum = CursorDatum(
            user_id=user.user_id, color=user.color, label=user.name
        )
        if mode is RepresentationMode.IN_SITU_GENERIC:
            try:
                ax, ay = extract_anchor(user.state, kinds, geometry)
            except NoAnchor:
                continue
            if not (math.isfinite(ax) and math.isfinite(ay)):
                continue
            datum.anchor_x = ax
            datum.anchor_y = ay
        elif mode is RepresentationMode.IN_SITU_SPECIFIC:
            shape = _specific_shape(user.state, kinds)
            if shape is None:
                continue
            datum.shape_params = shape
        data.append(datum)
    return data
