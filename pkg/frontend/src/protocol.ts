/**
 * Wire types for the session service. One JSON object per WebSocket
 * text frame; every request gets exactly one response. The UI is a
 * protocol client only, all music logic stays on the service side.
 */

export interface SuggestionPayload {
  id: string;
  code: string;
  valence: number;
  arousal: number;
  seed: number;
  loudness_db: number;
  pitch_register: number;
  mode: string;
}

export type ClientMessage =
  | { type: "set_affect"; valence: number; arousal: number }
  | { type: "suggest" }
  | { type: "accept"; id: string }
  | { type: "reject"; id: string }
  | { type: "train_status" };

export type ServerMessage =
  | { type: "set_affect"; ok: true; valence: number; arousal: number }
  | { type: "suggest"; ok: true; suggestion: SuggestionPayload }
  | { type: "accept"; ok: true; id: string }
  | { type: "reject"; ok: true; id: string }
  | { type: "train_status"; ok: true; progress: number; trace?: string }
  | { type: "error"; ok: false; message: string };

const KNOWN_TYPES = new Set([
  "set_affect",
  "suggest",
  "accept",
  "reject",
  "train_status",
  "error",
]);

/** Parse one frame; null for anything that is not a known message. */
export function parseServerMessage(text: string): ServerMessage | null {
  let doc: unknown;
  try {
    doc = JSON.parse(text);
  } catch {
    return null;
  }
  if (typeof doc !== "object" || doc === null) return null;
  const type = (doc as { type?: unknown }).type;
  if (typeof type !== "string" || !KNOWN_TYPES.has(type)) return null;
  return doc as ServerMessage;
}
