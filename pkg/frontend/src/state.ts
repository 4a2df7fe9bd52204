import type { ServerMessage } from "./protocol.js";

export type Verdict = "pending" | "accepted" | "rejected";

export interface SuggestionCard {
  id: string;
  code: string;
  valence: number;
  arousal: number;
  verdict: Verdict;
}

export interface TracePoint {
  episode: number;
  reward: number;
}

export interface UiState {
  valence: number;
  arousal: number;
  cards: SuggestionCard[];
  progress: number;
  trace: TracePoint[];
  connected: boolean;
  lastError: string | null;
}

export type UiEvent =
  | { kind: "received"; message: ServerMessage }
  | { kind: "connection"; connected: boolean };

export function initialState(): UiState {
  return {
    valence: 0,
    arousal: 0,
    cards: [],
    progress: 0,
    trace: [],
    connected: false,
    lastError: null,
  };
}

/** "episode,cumulative_reward" CSV text to points; bad rows skipped. */
export function parseTraceCsv(text: string): TracePoint[] {
  const out: TracePoint[] = [];
  for (const line of text.split("\n")) {
    const [a, b] = line.split(",");
    const episode = Number(a);
    const reward = Number(b);
    if (Number.isInteger(episode) && Number.isFinite(reward)) {
      out.push({ episode, reward });
    }
  }
  return out;
}

function mergeTrace(current: TracePoint[], incoming: TracePoint[]): TracePoint[] {
  if (incoming.length === 0) return current;
  const byEpisode = new Map(current.map((p) => [p.episode, p]));
  for (const p of incoming) byEpisode.set(p.episode, p);
  return [...byEpisode.values()].sort((a, b) => a.episode - b.episode);
}

/**
 * Pure reducer: next UI state from the previous one and a single event.
 * Never mutates its input, so replaying a logged message sequence
 * rebuilds the identical card list. One card per suggestion id, and a
 * verdict only ever moves from pending to accepted or rejected.
 */
export function reduce(state: UiState, event: UiEvent): UiState {
  if (event.kind === "connection") {
    return { ...state, connected: event.connected };
  }
  const msg = event.message;
  switch (msg.type) {
    case "set_affect":
      return { ...state, valence: msg.valence, arousal: msg.arousal };
    case "suggest": {
      const s = msg.suggestion;
      if (state.cards.some((c) => c.id === s.id)) return state;
      const card: SuggestionCard = {
        id: s.id,
        code: s.code,
        valence: s.valence,
        arousal: s.arousal,
        verdict: "pending",
      };
      return { ...state, cards: [...state.cards, card] };
    }
    case "accept":
    case "reject": {
      const verdict: Verdict = msg.type === "accept" ? "accepted" : "rejected";
      const cards = state.cards.map((c) =>
        c.id === msg.id && c.verdict === "pending" ? { ...c, verdict } : c,
      );
      return { ...state, cards };
    }
    case "train_status": {
      const next = { ...state, progress: msg.progress };
      if (msg.trace !== undefined) {
        next.trace = mergeTrace(state.trace, parseTraceCsv(msg.trace));
      }
      return next;
    }
    case "error":
      return { ...state, lastError: msg.message };
  }
}

export function replay(events: UiEvent[]): UiState {
  return events.reduce(reduce, initialState());
}
