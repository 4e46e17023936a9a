// Cross-component contract: messages recorded from the real backend
// (see fixtures/generate.py) must flow through the dashboard's parsers,
// reducer, and renderer without loss.

import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import { Envelope, parseCue, parseEnvelope } from "../src/protocol.js";
import { initialState, reduce } from "../src/state.js";
import { drawFrame, frameGlyph } from "../src/skeleton.js";

const fixtures: unknown[] = JSON.parse(
  readFileSync(new URL("./fixtures/protocol-messages.json", import.meta.url), "utf-8"),
);

function envelopes(): Envelope[] {
  return fixtures.map((m) => parseEnvelope(JSON.stringify(m)));
}

describe("recorded backend session", () => {
  it("covers the protocol kinds end to end", () => {
    const kinds = envelopes().map((e) => e.kind);
    expect(kinds).toEqual(["hello", "trace-point", "threshold-ack", "trace-point", "cue", "error"]);
  });

  it("folds into a coherent dashboard state", () => {
    let state = initialState("s1");
    envelopes().forEach((envelope, i) => {
      state = reduce(state, { type: "message", envelope, at: i * 10 });
    });
    const hello = envelopes()[0]!.payload as { threshold: number; config: { threshold_step: number } };
    expect(state.channels).toEqual(["posture", "gaze"]);
    expect(state.trace.length).toBeGreaterThanOrEqual(2);
    expect(state.cues).toHaveLength(1);
    expect(state.threshold).toBeCloseTo(hello.threshold * hello.config.threshold_step, 9);
    expect(state.errors).toHaveLength(1);
    expect(state.notification).not.toBeNull();
  });

  it("renders the recorded cue frames, including the lost gaze channel", () => {
    const cueEnv = envelopes().find((e) => e.kind === "cue")!;
    const cue = parseCue(cueEnv.payload);
    expect(cue.notify).toBe(true);
    expect(cue.representative.length).toBe(2);
    expect(cue.outliers.length).toBe(2);
    // The loud batch was sent with gaze nulled: sentinel-held + invalid.
    const outlier = cue.outliers[0]!;
    expect(outlier.valid).toEqual([true, false]);
    expect(outlier.values.slice(24)).toEqual([-10000, -10000]);

    const glyph = frameGlyph(outlier, ["posture", "gaze"]);
    expect(glyph.lostChannels).toEqual(["gaze"]);
    const ops: string[] = [];
    const ctx = {
      strokeStyle: "", fillStyle: "", lineWidth: 0,
      beginPath: () => ops.push("beginPath"),
      moveTo: () => ops.push("moveTo"),
      lineTo: () => ops.push("lineTo"),
      stroke: () => ops.push("stroke"),
      arc: () => ops.push("arc"),
      fill: () => ops.push("fill"),
    };
    const summary = drawFrame(ctx, glyph, { width: 160, height: 150 });
    expect(summary.bones).toBe(11);
    expect(summary.gazeDrawn).toBe(false);
  });

  it("surfaces the recorded ordering error", () => {
    const errEnv = envelopes().find((e) => e.kind === "error")!;
    const payload = errEnv.payload as { code?: string; message: string };
    expect(payload.code).toBe("ordering");
    expect(payload.message).toContain("increase");
  });
});
