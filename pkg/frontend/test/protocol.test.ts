import { describe, expect, it } from "vitest";

import { makeEnvelope, parseCue, parseEnvelope, ProtocolError } from "../src/protocol.js";

describe("parseEnvelope", () => {
  it("decodes a well-formed message", () => {
    const env = parseEnvelope(
      JSON.stringify({ kind: "trace-point", session: "s", seq: 4, payload: { time: 60 } }),
    );
    expect(env.kind).toBe("trace-point");
    expect(env.session).toBe("s");
    expect(env.seq).toBe(4);
  });

  it("rejects non-JSON and unknown kinds", () => {
    expect(() => parseEnvelope("{oops")).toThrow(ProtocolError);
    expect(() => parseEnvelope(JSON.stringify({ kind: "vibrate" }))).toThrow(ProtocolError);
    expect(() => parseEnvelope(JSON.stringify([1, 2]))).toThrow(ProtocolError);
  });

  it("round-trips through makeEnvelope", () => {
    const text = makeEnvelope("threshold-set", "s1", 9, { command: "more", id: "c1" });
    const env = parseEnvelope(text);
    expect(env.kind).toBe("threshold-set");
    expect(env.payload).toEqual({ command: "more", id: "c1" });
  });
});

describe("parseCue", () => {
  const frame = { frame_index: 3, t: 12.5, valid: [true], values: [1, 2] };

  it("decodes frames and flags", () => {
    const cue = parseCue({
      time: 120,
      outlierness: 42.5,
      threshold: 30,
      representative: [{ ...frame, component: 0 }],
      outliers: [frame],
      notify: true,
    });
    expect(cue.representative[0]?.component).toBe(0);
    expect(cue.outliers[0]?.values).toEqual([1, 2]);
    expect(cue.notify).toBe(true);
    expect(cue.threshold).toBe(30);
  });

  it("treats a null threshold as absent", () => {
    const cue = parseCue({
      time: 1,
      outlierness: 2,
      threshold: null,
      representative: [],
      outliers: [frame],
    });
    expect(cue.threshold).toBeNull();
  });

  it("rejects malformed frames", () => {
    expect(() =>
      parseCue({ time: 1, outlierness: 2, threshold: null, representative: [{}], outliers: [] }),
    ).toThrow(ProtocolError);
    expect(() => parseCue({ outlierness: 2 })).toThrow(ProtocolError);
  });
});
