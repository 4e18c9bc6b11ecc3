#!/usr/bin/env python3
"""Annotate every gallery spec in its default cursor mode.

Writes the annotated specs (plus legend thumbnails) to demos/out/ so they can
be pasted into any Vega-Lite editor.

Run: python3 demos/annotate_gallery.py
"""

import json
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from vis_presence import annotator as A

OUT = Path(__file__).resolve().parent / "out"


def main():
    OUT.mkdir(exist_ok=True)
    for path in sorted((REPO / "gallery").glob("*.json")):
        doc = json.loads(path.read_text(encoding="utf-8"))
        kinds = A.parse_interactions(doc)
        mode = A.choose_default_mode(kinds)
        out = A.annotate(doc, mode)
        dest = OUT / f"{path.stem}.annotated.json"
        dest.write_text(json.dumps(out, indent=2) + "\n", encoding="utf-8")
        found = ", ".join(f"{k.name}:{k.kind.value}" for k in kinds) or "none"
        print(f"{path.stem:24} interactions=[{found}]")
        print(f"{'':24} default mode={mode.value:8} -> {dest.relative_to(REPO)}")
    # a thumbnail, as used by the cursor legend
    doc = json.loads((REPO / "gallery" / "histogram_brush.json").read_text())
    thumb = A.make_thumbnail(doc)
    (OUT / "histogram_brush.thumb.json").write_text(json.dumps(thumb, indent=2) + "\n")
    print(f"{'thumbnail':24} {A.THUMBNAIL_WIDTH}x{A.THUMBNAIL_HEIGHT}, "
          "axes/legends/titles stripped -> demos/out/histogram_brush.thumb.json")


if __name__ == "__main__":
    main()
