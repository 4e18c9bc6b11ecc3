/**
 * Client-side peek / track / fork state machine.
 *
 * A client is Independent (showing its own state), Peeking (temporarily
 * showing a collaborator's state, with an exact way back), or Tracking
 * (continuously mirroring a collaborator). Interacting while peeking or
 * tracking forks: the remote state becomes the seed of a new independent
 * local state.
 *
 * The transition semantics are held equivalent to the reference
 * implementation by replaying tests/fixtures/presence_transitions.json.
 */

import {
  InteractionState,
  RosterEntry,
  emptyState,
  mergedWith,
  stateFromWire,
} from "./protocol.js";

export class PresenceStateError extends Error {
  override name = "PresenceStateError";
}
export class UnknownTarget extends PresenceStateError {
  override name = "UnknownTarget";
}
export class NotPeeking extends PresenceStateError {
  override name = "NotPeeking";
}
export class TargetGone extends PresenceStateError {
  override name = "TargetGone";
}

export type PresenceMode =
  | { type: "independent" }
  | {
      type: "peeking";
      target: string;
      /** Local state to restore when the peek started from Independent;
       * null when it started from Tracking (priorTrack carries the way back). */
      saved: InteractionState | null;
      priorTrack: string | null;
    }
  | { type: "tracking"; target: string };

/** What this client knows about one remote collaborator. */
export interface RemoteUser {
  userId: string;
  name: string;
  color: string;
  seq: number | null;
  state: InteractionState;
  /** True while seq/state came from a roster snapshot rather than an applied
   * update; a snapshot's seq may be re-applied once, so the first live
   * update with an equal seq is not stale. */
  seeded: boolean;
}

export interface Emission {
  seq: number;
  state: InteractionState;
}

/** One client's view of the collaboration. */
export class ClientPresence {
  name: string;
  userId: string | null;
  color: string | null = null;
  remotes = new Map<string, RemoteUser>();
  mode: PresenceMode = { type: "independent" };
  local: InteractionState = emptyState();
  private nextSeq = 0;

  constructor(name = "", userId: string | null = null) {
    this.name = name;
    this.userId = userId;
  }

  // -- derived view ---------------------------------------------------

  effectiveView(): InteractionState {
    if (this.mode.type === "independent") return this.local;
    const remote = this.remotes.get(this.mode.target);
    if (!remote) throw new TargetGone(this.mode.target);
    return remote.state;
  }

  private requireRemote(target: string): RemoteUser {
    const remote = this.remotes.get(target);
    if (!remote) throw new UnknownTarget(target);
    return remote;
  }

  // -- peek / track / fork --------------------------------------------

  beginPeek(target: string): void {
    this.requireRemote(target);
    const mode = this.mode;
    if (mode.type === "peeking") {
      // Retarget in place; the original restore point is kept.
      this.mode = { ...mode, target };
    } else if (mode.type === "tracking") {
      this.mode = {
        type: "peeking",
        target,
        saved: null,
        priorTrack: mode.target,
      };
    } else {
      this.mode = { type: "peeking", target, saved: this.local, priorTrack: null };
    }
  }

  endPeek(): void {
    const mode = this.mode;
    if (mode.type !== "peeking") throw new NotPeeking();
    if (mode.priorTrack !== null) {
      this.mode = { type: "tracking", target: mode.priorTrack };
    } else {
      this.local = mode.saved ?? emptyState();
      this.mode = { type: "independent" };
    }
  }

  beginTrack(target: string): void {
    this.requireRemote(target);
    this.mode = { type: "tracking", target };
  }

  /**
   * Apply a local interaction; returns the (seq, state) to emit.
   *
   * Interacting while peeking or tracking forks: the remote state is the
   * seed and the new interaction's entries overwrite same-named entries.
   */
  onLocalInteraction(newState: InteractionState): Emission {
    const mode = this.mode;
    if (mode.type === "independent") {
      this.local = stateFromWire(newState);
    } else {
      const remote = this.remotes.get(mode.target);
      const seed = remote ? remote.state : emptyState();
      this.local = mergedWith(seed, newState);
      this.mode = { type: "independent" };
    }
    return { seq: this.nextSeq++, state: this.local };
  }

  // -- network deliveries ---------------------------------------------

  /** LWW merge of a remote user's update; returns true if applied. */
  onRemoteUpdate(userId: string, seq: number, state: InteractionState): boolean {
    let remote = this.remotes.get(userId);
    if (!remote) {
      // Updates may race ahead of the roster; insert a placeholder.
      remote = {
        userId,
        name: "",
        color: "",
        seq: null,
        state: emptyState(),
        seeded: false,
      };
      this.remotes.set(userId, remote);
    }
    if (remote.seq !== null) {
      if (seq < remote.seq || (seq === remote.seq && !remote.seeded)) {
        return false;
      }
    }
    remote.seq = seq;
    remote.state = stateFromWire(state);
    remote.seeded = false;
    return true;
  }

  /** Reconcile with a full roster snapshot (self excluded). */
  onRoster(entries: RosterEntry[]): void {
    const seen = new Set<string>();
    for (const entry of entries) {
      if (entry.user_id === this.userId) continue;
      seen.add(entry.user_id);
      const remote = this.remotes.get(entry.user_id);
      if (!remote) {
        this.remotes.set(entry.user_id, {
          userId: entry.user_id,
          name: entry.name,
          color: entry.color,
          seq: entry.seq,
          state: stateFromWire(entry.state),
          seeded: true,
        });
        continue;
      }
      remote.name = entry.name;
      remote.color = entry.color;
      if (remote.seq === null || entry.seq > remote.seq) {
        remote.seq = entry.seq;
        remote.state = stateFromWire(entry.state);
        remote.seeded = true;
      }
    }
    for (const uid of [...this.remotes.keys()]) {
      if (!seen.has(uid)) this.onUserLeft(uid);
    }
  }

  onUserLeft(userId: string): void {
    const remote = this.remotes.get(userId);
    if (!remote) return;
    this.remotes.delete(userId);
    const mode = this.mode;
    if (mode.type === "tracking" && mode.target === userId) {
      // Keep the view continuous: adopt the last-seen tracked state.
      this.local = remote.state;
      this.mode = { type: "independent" };
    } else if (mode.type === "peeking") {
      if (mode.priorTrack === userId) {
        this.mode = { ...mode, priorTrack: null, saved: remote.state };
      }
      const now = this.mode;
      if (now.type === "peeking" && now.target === userId) {
        this.endPeek();
      }
    }
  }

  onWelcome(userId: string, color: string): void {
    this.userId = userId;
    this.color = color;
    this.remotes.delete(userId);
  }
}
