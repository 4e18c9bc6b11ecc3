/**
 * Presence state-machine conformance: replay every transition vector in
 * ../tests/fixtures/presence_transitions.json (exported from the reference
 * implementation) and require identical mode, local state, effective view,
 * emissions, errors, and remote bookkeeping after every step.
 */

import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import {
  ClientPresence,
  NotPeeking,
  PresenceStateError,
  UnknownTarget,
} from "../src/presence.js";
import { InteractionState, stateFromWire } from "../src/protocol.js";

interface WireRoster {
  user_id: string;
  name: string;
  color: string;
  seq: number;
  state: InteractionState;
}

type Op =
  | { op: "welcome"; user_id: string; color: string }
  | { op: "remote_update"; user_id: string; seq: number; state: InteractionState }
  | { op: "roster"; users: WireRoster[] }
  | { op: "user_left"; user_id: string }
  | { op: "peek"; target: string }
  | { op: "end_peek" }
  | { op: "track"; target: string }
  | { op: "local"; state: InteractionState };

interface Expect {
  mode:
    | { type: "independent" }
    | {
        type: "peeking";
        target: string;
        saved: InteractionState | null;
        prior_track: string | null;
      }
    | { type: "tracking"; target: string };
  local: InteractionState;
  effective_view: InteractionState;
  emitted: { seq: number; state: InteractionState } | null;
  error: string | null;
  remotes: Record<string, { seq: number | null; state: InteractionState }>;
}

interface Case {
  name: string;
  steps: Array<{ op: Op; expect: Expect }>;
}

const fixtures: { cases: Case[] } = JSON.parse(
  readFileSync(
    fileURLToPath(
      new URL("../../tests/fixtures/presence_transitions.json", import.meta.url),
    ),
    "utf-8",
  ),
);

function applyOp(
  client: ClientPresence,
  op: Op,
): { emitted: Expect["emitted"]; error: string | null } {
  try {
    switch (op.op) {
      case "welcome":
        client.onWelcome(op.user_id, op.color);
        break;
      case "remote_update":
        client.onRemoteUpdate(op.user_id, op.seq, op.state);
        break;
      case "roster":
        client.onRoster(op.users);
        break;
      case "user_left":
        client.onUserLeft(op.user_id);
        break;
      case "peek":
        client.beginPeek(op.target);
        break;
      case "end_peek":
        client.endPeek();
        break;
      case "track":
        client.beginTrack(op.target);
        break;
      case "local": {
        const { seq, state } = client.onLocalInteraction(op.state);
        return { emitted: { seq, state }, error: null };
      }
    }
  } catch (e) {
    if (e instanceof PresenceStateError) {
      return { emitted: null, error: e.name };
    }
    throw e;
  }
  return { emitted: null, error: null };
}

function observedMode(client: ClientPresence): Expect["mode"] {
  const mode = client.mode;
  if (mode.type === "peeking") {
    return {
      type: "peeking",
      target: mode.target,
      saved: mode.saved,
      prior_track: mode.priorTrack,
    };
  }
  return mode;
}

describe("transition vectors", () => {
  for (const c of fixtures.cases) {
    it(c.name, () => {
      const client = new ClientPresence("me");
      for (const [i, step] of c.steps.entries()) {
        const { emitted, error } = applyOp(client, step.op);
        const where = `step ${i} (${step.op.op})`;
        expect({ at: where, v: error }).toEqual({
          at: where,
          v: step.expect.error,
        });
        expect({ at: where, v: emitted }).toEqual({
          at: where,
          v: step.expect.emitted,
        });
        expect({ at: where, v: observedMode(client) }).toEqual({
          at: where,
          v: step.expect.mode,
        });
        expect({ at: where, v: client.local }).toEqual({
          at: where,
          v: step.expect.local,
        });
        expect({ at: where, v: client.effectiveView() }).toEqual({
          at: where,
          v: step.expect.effective_view,
        });
        const remotes: Expect["remotes"] = {};
        for (const [uid, r] of client.remotes) {
          remotes[uid] = { seq: r.seq, state: r.state };
        }
        expect({ at: where, v: remotes }).toEqual({
          at: where,
          v: step.expect.remotes,
        });
      }
    });
  }
  it("covers a non-trivial number of vectors", () => {
    expect(fixtures.cases.length).toBeGreaterThanOrEqual(50);
  });
});

describe("error types", () => {
  it("peeking an unknown target throws UnknownTarget", () => {
    const c = new ClientPresence("me");
    expect(() => c.beginPeek("u9")).toThrowError(UnknownTarget);
  });
  it("ending a peek while independent throws NotPeeking", () => {
    const c = new ClientPresence("me");
    expect(() => c.endPeek()).toThrowError(NotPeeking);
  });
  it("peeking yourself throws UnknownTarget", () => {
    const c = new ClientPresence("me");
    c.onWelcome("u1", "#4c78a8");
    c.onRemoteUpdate("u2", 0, stateFromWire({ view_epoch: 0, entries: {} }));
    expect(() => c.beginPeek("u1")).toThrowError(UnknownTarget);
  });
});
