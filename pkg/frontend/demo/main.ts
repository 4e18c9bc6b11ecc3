/**
 * Demo page: one annotated histogram shared across browser tabs.
 *
 * URL parameters: ?room=R&name=N&server=host:port
 * Serve with any bundler/dev server that resolves bare imports (vega-embed),
 * e.g. `npx vite demo` after `npm install`.
 */

import embed from "vega-embed";

import { PresenceClient } from "../src/client.js";
import { InteractionState } from "../src/protocol.js";

const params = new URLSearchParams(location.search);
const room = params.get("room") ?? "demo";
const name = params.get("name") ?? `guest-${Math.floor(Math.random() * 1000)}`;
const server = params.get("server") ?? "127.0.0.1:9870";

// A pre-annotated spec: original histogram + rect cursor layer reading the
// __presence_cursors__ dataset (the output of `vis-presence-annotate
// --mode specific` on the brushing-histogram gallery entry, inlined).
const spec = {
  $schema: "https://vega.github.io/schema/vega-lite/v6.json",
  datasets: { __presence_cursors__: [] },
  usermeta: { __presence__: { mode: "specific" } },
  layer: [
    {
      data: { url: "https://vega.github.io/editor/data/cars.json" },
      params: [{ name: "brush", select: { type: "interval", encodings: ["x"] } }],
      mark: "bar",
      encoding: {
        x: { field: "Horsepower", bin: true, type: "quantitative" },
        y: { aggregate: "count", type: "quantitative" },
      },
    },
    {
      data: { name: "__presence_cursors__" },
      transform: [{ filter: "datum.shape === 'rect'" }],
      mark: { type: "rect", opacity: 0.15 },
      encoding: {
        x: { field: "x_lo", type: "quantitative" },
        x2: { field: "x_hi" },
        color: { field: "color", type: "nominal", scale: null },
      },
    },
  ],
};

const statusEl = document.getElementById("status")!;
const collabEl = document.getElementById("collaborators")!;

const client = new PresenceClient({
  url: `ws://${server}/ws/${encodeURIComponent(room)}`,
  room,
  name,
  onChange: render,
});

function render(): void {
  const me = client.presence;
  statusEl.textContent = client.isOpen
    ? `room "${room}" as ${me.name} (${me.userId}) — mode: ${me.mode.type}`
    : `room "${room}": disconnected`;
  collabEl.replaceChildren(
    ...[...me.remotes.values()].map((r) => {
      const el = document.createElement("span");
      el.textContent = r.name || r.userId;
      el.style.borderColor = r.color || "#999";
      el.onmouseenter = () => client.hoverCursor(r.userId);
      el.onmouseleave = () => client.unhoverCursor();
      el.onclick = () => client.track(r.userId);
      return el;
    }),
  );
}

async function main(): Promise<void> {
  const result = await embed("#vis", spec as never, { actions: false });
  client.attachView(result.view);
  client.connect();

  // Publish the brush as the shared interaction state.
  result.view.addSignalListener("brush", (_name, value) => {
    const extents = value as { Horsepower?: [number, number] };
    const state: InteractionState = {
      view_epoch: 0,
      entries: extents.Horsepower
        ? { brush: { type: "interval", value: { x: extents.Horsepower } } }
        : {},
    };
    client.setLocalState(state);
  });

  setInterval(() => client.keepalive(), 5000);
  render();
}

void main();
