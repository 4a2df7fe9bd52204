import { describe, expect, it } from "vitest";
import type { ServerMessage, SuggestionPayload } from "../src/protocol.js";
import {
  initialState,
  parseTraceCsv,
  reduce,
  replay,
  type UiEvent,
} from "../src/state.js";

function received(message: ServerMessage): UiEvent {
  return { kind: "received", message };
}

function suggestion(id: string, code = "d1 $ sound \"bd\""): SuggestionPayload {
  return {
    id,
    code,
    valence: 0.8,
    arousal: 0.65,
    seed: 0,
    loudness_db: -12,
    pitch_register: 6,
    mode: "lydian",
  };
}

describe("reduce", () => {
  it("tracks acknowledged coordinates", () => {
    const st = reduce(
      initialState(),
      received({ type: "set_affect", ok: true, valence: 0.8, arousal: 0.65 }),
    );
    expect(st.valence).toBe(0.8);
    expect(st.arousal).toBe(0.65);
  });

  it("adds one pending card per suggestion id", () => {
    let st = initialState();
    const msg = received({ type: "suggest", ok: true, suggestion: suggestion("abc") });
    st = reduce(st, msg);
    st = reduce(st, msg);
    st = reduce(st, received({ type: "suggest", ok: true, suggestion: suggestion("def") }));
    expect(st.cards.map((c) => c.id)).toEqual(["abc", "def"]);
    expect(st.cards.every((c) => c.verdict === "pending")).toBe(true);
  });

  it("flips a verdict once, pending to accepted or rejected only", () => {
    let st = reduce(
      initialState(),
      received({ type: "suggest", ok: true, suggestion: suggestion("abc") }),
    );
    st = reduce(st, received({ type: "accept", ok: true, id: "abc" }));
    expect(st.cards[0].verdict).toBe("accepted");
    st = reduce(st, received({ type: "reject", ok: true, id: "abc" }));
    expect(st.cards[0].verdict).toBe("accepted");
    st = reduce(st, received({ type: "reject", ok: true, id: "missing" }));
    expect(st.cards).toHaveLength(1);
  });

  it("never mutates its input", () => {
    const before = initialState();
    const snapshot = JSON.stringify(before);
    reduce(before, received({ type: "suggest", ok: true, suggestion: suggestion("abc") }));
    reduce(before, { kind: "connection", connected: true });
    expect(JSON.stringify(before)).toBe(snapshot);
  });

  it("replays a logged sequence to the identical card list", () => {
    const events: UiEvent[] = [
      { kind: "connection", connected: true },
      received({ type: "set_affect", ok: true, valence: 0.8, arousal: 0.65 }),
      received({ type: "suggest", ok: true, suggestion: suggestion("a1") }),
      received({ type: "suggest", ok: true, suggestion: suggestion("b2") }),
      received({ type: "accept", ok: true, id: "a1" }),
      received({ type: "reject", ok: true, id: "b2" }),
      received({ type: "error", ok: false, message: "unknown suggestion id" }),
    ];
    const once = replay(events);
    const twice = replay(events);
    expect(twice).toEqual(once);
    expect(once.cards.map((c) => [c.id, c.verdict])).toEqual([
      ["a1", "accepted"],
      ["b2", "rejected"],
    ]);
    expect(once.lastError).toBe("unknown suggestion id");
  });

  it("folds train_status into progress and a merged trace", () => {
    let st = reduce(
      initialState(),
      received({
        type: "train_status",
        ok: true,
        progress: 0.5,
        trace: "episode,cumulative_reward\n0,-55.5\n1,-42.25\n",
      }),
    );
    expect(st.progress).toBe(0.5);
    expect(st.trace).toEqual([
      { episode: 0, reward: -55.5 },
      { episode: 1, reward: -42.25 },
    ]);
    st = reduce(
      st,
      received({
        type: "train_status",
        ok: true,
        progress: 1,
        trace: "episode,cumulative_reward\n1,-40.0\n2,-38.0\n",
      }),
    );
    expect(st.trace.map((p) => p.episode)).toEqual([0, 1, 2]);
    expect(st.trace[1].reward).toBe(-40);
    const plain = reduce(st, received({ type: "train_status", ok: true, progress: 1 }));
    expect(plain.trace).toEqual(st.trace);
  });
});

describe("parseTraceCsv", () => {
  it("reads the trainer's schema, skipping the header", () => {
    expect(parseTraceCsv("episode,cumulative_reward\n0,-1.5\n10,0.25\n")).toEqual([
      { episode: 0, reward: -1.5 },
      { episode: 10, reward: 0.25 },
    ]);
    expect(parseTraceCsv("")).toEqual([]);
    expect(parseTraceCsv("garbage\nmore,garbage,here")).toEqual([]);
  });
});
