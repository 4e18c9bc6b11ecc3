/**
 * Browser client: connects a presence state machine to a relay server and a
 * Vega view.
 *
 * - Local interactions are applied immediately but their network emission is
 *   debounced (default 50 ms) so rapid brushing coalesces into one update.
 * - Hovering a collaborator's cursor begins a peek only after a short delay
 *   (default 150 ms) so merely crossing a cursor doesn't switch views.
 * - Remote cursors are pushed into the annotated spec's `__presence_cursors__`
 *   dataset, the same dataset the spec annotator injects.
 */

import { ClientPresence } from "./presence.js";
import {
  InteractionState,
  WireMessage,
  decode,
  encode,
  join,
  ping,
  stateUpdate,
} from "./protocol.js";

export const CURSOR_DATASET = "__presence_cursors__";
export const DEFAULT_DEBOUNCE_MS = 50;
export const DEFAULT_HOVER_PEEK_DELAY_MS = 150;

/** The subset of a WebSocket the client needs (injectable for tests). */
export interface SocketLike {
  send(data: string): void;
  close(code?: number): void;
  onopen: (() => void) | null;
  onmessage: ((event: { data: string }) => void) | null;
  onclose: (() => void) | null;
}

/** The subset of a Vega view the client drives (injectable for tests). */
export interface ViewLike {
  data(name: string, rows: object[]): unknown;
  runAsync(): Promise<unknown>;
}

export interface CursorRow {
  user_id: string;
  name: string;
  color: string;
  shape: "mouse" | "rect";
  x: number | null;
  y: number | null;
  x_lo: number | null;
  x_hi: number | null;
  y_lo: number | null;
  y_hi: number | null;
}

export interface PresenceClientOptions {
  url: string;
  room: string;
  name: string;
  socketFactory?: (url: string) => SocketLike;
  debounceMs?: number;
  hoverPeekDelayMs?: number;
  /** Called whenever the set of collaborators or the mode changes. */
  onChange?: (client: PresenceClient) => void;
}

export class PresenceClient {
  readonly presence: ClientPresence;
  readonly room: string;

  private readonly url: string;
  private readonly debounceMs: number;
  private readonly hoverPeekDelayMs: number;
  private readonly socketFactory: (url: string) => SocketLike;
  private readonly onChange: (client: PresenceClient) => void;

  private socket: SocketLike | null = null;
  private view: ViewLike | null = null;
  private open = false;
  private pendingEmission: { seq: number; state: InteractionState } | null =
    null;
  private debounceTimer: ReturnType<typeof setTimeout> | null = null;
  private hoverTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(options: PresenceClientOptions) {
    this.url = options.url;
    this.room = options.room;
    this.presence = new ClientPresence(options.name);
    this.debounceMs = options.debounceMs ?? DEFAULT_DEBOUNCE_MS;
    this.hoverPeekDelayMs =
      options.hoverPeekDelayMs ?? DEFAULT_HOVER_PEEK_DELAY_MS;
    this.socketFactory =
      options.socketFactory ??
      ((url) => new WebSocket(url) as unknown as SocketLike);
    this.onChange = options.onChange ?? (() => {});
  }

  // -- lifecycle ------------------------------------------------------

  connect(): void {
    const socket = this.socketFactory(this.url);
    this.socket = socket;
    socket.onopen = () => {
      socket.send(encode(join(this.room, this.presence.name)));
    };
    socket.onmessage = (event) => this.handleFrame(decode(event.data));
    socket.onclose = () => {
      this.open = false;
      this.onChange(this);
    };
  }

  disconnect(): void {
    if (this.debounceTimer !== null) clearTimeout(this.debounceTimer);
    if (this.hoverTimer !== null) clearTimeout(this.hoverTimer);
    this.debounceTimer = null;
    this.hoverTimer = null;
    this.socket?.close(1000);
    this.socket = null;
    this.open = false;
  }

  /** Attach the Vega view rendering the annotated spec. */
  attachView(view: ViewLike): void {
    this.view = view;
    void this.pushCursors();
  }

  get isOpen(): boolean {
    return this.open;
  }

  keepalive(): void {
    if (this.open) this.socket?.send(encode(ping(this.room)));
  }

  // -- inbound --------------------------------------------------------

  private handleFrame(msg: WireMessage): void {
    switch (msg.kind) {
      case "welcome":
        this.presence.onWelcome(msg.user_id, msg.color);
        this.open = true;
        break;
      case "roster":
        this.presence.onRoster(msg.users);
        break;
      case "state_update":
        this.presence.onRemoteUpdate(msg.user_id, msg.seq, msg.state);
        break;
      case "user_left":
        this.presence.onUserLeft(msg.user_id);
        break;
      case "pong":
      case "ping":
        return; // keepalive traffic; nothing to render
      case "join":
        return; // server never relays joins; ignore defensively
    }
    void this.pushCursors();
    this.onChange(this);
  }

  // -- outbound -------------------------------------------------------

  /**
   * Record a local interaction. The state machine moves immediately (so a
   * fork happens at interaction time), but the network send is debounced.
   */
  setLocalState(state: InteractionState): void {
    this.pendingEmission = this.presence.onLocalInteraction(state);
    if (this.debounceTimer !== null) clearTimeout(this.debounceTimer);
    this.debounceTimer = setTimeout(() => {
      this.debounceTimer = null;
      this.flush();
    }, this.debounceMs);
    this.onChange(this);
  }

  /** Send the latest pending emission now (also called by the debouncer). */
  flush(): void {
    if (!this.pendingEmission || !this.open || !this.presence.userId) return;
    const { seq, state } = this.pendingEmission;
    this.pendingEmission = null;
    this.socket?.send(
      encode(stateUpdate(this.room, this.presence.userId, seq, state)),
    );
  }

  // -- peek / track ---------------------------------------------------

  /** Hovering a collaborator's cursor: peek after a short dwell. */
  hoverCursor(userId: string): void {
    if (this.hoverTimer !== null) clearTimeout(this.hoverTimer);
    this.hoverTimer = setTimeout(() => {
      this.hoverTimer = null;
      if (this.presence.remotes.has(userId)) {
        this.presence.beginPeek(userId);
        this.onChange(this);
      }
    }, this.hoverPeekDelayMs);
  }

  /** The pointer left the cursor: cancel a pending peek or end an active one. */
  unhoverCursor(): void {
    if (this.hoverTimer !== null) {
      clearTimeout(this.hoverTimer);
      this.hoverTimer = null;
      return;
    }
    if (this.presence.mode.type === "peeking") {
      this.presence.endPeek();
      this.onChange(this);
    }
  }

  track(userId: string): void {
    this.presence.beginTrack(userId);
    this.onChange(this);
  }

  // -- cursor rendering -----------------------------------------------

  /** Rows for the `__presence_cursors__` dataset: everyone but self. */
  cursorRows(): CursorRow[] {
    const rows: CursorRow[] = [];
    const ids = [...this.presence.remotes.keys()].sort();
    for (const uid of ids) {
      const remote = this.presence.remotes.get(uid)!;
      const row: CursorRow = {
        user_id: uid,
        name: remote.name,
        color: remote.color,
        shape: "mouse",
        x: null,
        y: null,
        x_lo: null,
        x_hi: null,
        y_lo: null,
        y_hi: null,
      };
      let represented = false;
      for (const entry of Object.values(remote.state.entries)) {
        if (entry.type === "mouse") {
          row.x = entry.value.x;
          row.y = entry.value.y;
          represented = true;
          break;
        }
        if (entry.type === "interval") {
          const ext = entry.value;
          row.shape = "rect";
          row.x_lo = ext.x?.[0] ?? null;
          row.x_hi = ext.x?.[1] ?? null;
          row.y_lo = ext.y?.[0] ?? null;
          row.y_hi = ext.y?.[1] ?? null;
          represented = true;
          break;
        }
      }
      if (represented) rows.push(row);
    }
    return rows;
  }

  private async pushCursors(): Promise<void> {
    if (!this.view) return;
    this.view.data(CURSOR_DATASET, this.cursorRows());
    await this.view.runAsync();
  }
}
