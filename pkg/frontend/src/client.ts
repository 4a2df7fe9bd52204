import type { ClientMessage } from "./protocol.js";
import { parseServerMessage } from "./protocol.js";
import type { UiEvent } from "./state.js";

/** The slice of WebSocket the client uses, so tests can inject a mock.
 * Handler params are loose on purpose, the DOM WebSocket must be
 * directly assignable. */
export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev: any) => void) | null;
  onmessage: ((ev: any) => void) | null;
  onclose: ((ev: any) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface ClientOptions {
  url: string;
  factory: SocketFactory;
  /** Receives connection changes and every parsed server message. */
  onEvent: (event: UiEvent) => void;
  reconnectBaseMs?: number;
  reconnectMaxMs?: number;
  /** Injectable setTimeout, for tests. */
  schedule?: (fn: () => void, ms: number) => void;
}

/**
 * One socket to the session service. Reconnects on its own with
 * exponential backoff (base * 2^attempt, capped), resetting once a
 * connection opens. Messages sent while disconnected are dropped and
 * reported through the return value; the protocol makes no delivery
 * promises, the performer just presses the button again.
 */
export class SessionClient {
  private readonly url: string;
  private readonly factory: SocketFactory;
  private readonly onEvent: (event: UiEvent) => void;
  private readonly baseMs: number;
  private readonly maxMs: number;
  private readonly schedule: (fn: () => void, ms: number) => void;

  private socket: SocketLike | null = null;
  private open = false;
  private attempts = 0;
  private stopped = false;

  constructor(opts: ClientOptions) {
    this.url = opts.url;
    this.factory = opts.factory;
    this.onEvent = opts.onEvent;
    this.baseMs = opts.reconnectBaseMs ?? 500;
    this.maxMs = opts.reconnectMaxMs ?? 8000;
    this.schedule = opts.schedule ?? ((fn, ms) => setTimeout(fn, ms));
  }

  connect(): void {
    this.stopped = false;
    const sock = this.factory(this.url);
    this.socket = sock;
    sock.onopen = () => {
      this.open = true;
      this.attempts = 0;
      this.onEvent({ kind: "connection", connected: true });
    };
    sock.onmessage = (ev) => {
      if (typeof ev.data !== "string") return;
      const msg = parseServerMessage(ev.data);
      if (msg !== null) this.onEvent({ kind: "received", message: msg });
    };
    sock.onclose = () => {
      const wasOpen = this.open;
      this.open = false;
      this.socket = null;
      if (wasOpen) this.onEvent({ kind: "connection", connected: false });
      if (!this.stopped) {
        const delay = Math.min(this.maxMs, this.baseMs * 2 ** this.attempts);
        this.attempts += 1;
        this.schedule(() => {
          if (!this.stopped) this.connect();
        }, delay);
      }
    };
  }

  close(): void {
    this.stopped = true;
    this.socket?.close();
  }

  get connected(): boolean {
    return this.open;
  }

  send(message: ClientMessage): boolean {
    if (!this.open || this.socket === null) return false;
    this.socket.send(JSON.stringify(message));
    return true;
  }

  setAffect(valence: number, arousal: number): boolean {
    return this.send({ type: "set_affect", valence, arousal });
  }

  suggest(): boolean {
    return this.send({ type: "suggest" });
  }

  accept(id: string): boolean {
    return this.send({ type: "accept", id });
  }

  reject(id: string): boolean {
    return this.send({ type: "reject", id });
  }

  trainStatus(): boolean {
    return this.send({ type: "train_status" });
  }
}
