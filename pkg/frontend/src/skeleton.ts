// Keypoint skeleton and gaze glyph rendering from frame payloads.
//
// Posture frames carry 12 keypoints as 24 numbers (x, y interleaved):
// five head points (nose, both eyes, both ears) then seven body points
// (neck, both shoulders, both elbows, both wrists). Invalid channels
// arrive sentinel-filled with their validity flag cleared; they render
// as a "signal lost" badge instead of geometry.

import { CueFramePayload } from "./protocol.js";

export const KEYPOINT_NAMES = [
  "nose",
  "left eye",
  "right eye",
  "left ear",
  "right ear",
  "neck",
  "left shoulder",
  "right shoulder",
  "left elbow",
  "right elbow",
  "left wrist",
  "right wrist",
] as const;

export const HEAD_POINTS = [0, 1, 2, 3, 4] as const;
export const BODY_POINTS = [5, 6, 7, 8, 9, 10, 11] as const;

export const BONES: ReadonlyArray<readonly [number, number]> = [
  [1, 0], // left eye - nose
  [2, 0], // right eye - nose
  [3, 1], // left ear - left eye
  [4, 2], // right ear - right eye
  [0, 5], // nose - neck
  [5, 6], // neck - left shoulder
  [5, 7], // neck - right shoulder
  [6, 8], // left shoulder - elbow
  [8, 10], // left elbow - wrist
  [7, 9], // right shoulder - elbow
  [9, 11], // right elbow - wrist
];

export interface Point {
  x: number;
  y: number;
}

export interface FrameGlyph {
  keypoints: Point[] | null;
  gaze: Point | null;
  lostChannels: string[];
}

const CHANNEL_WIDTHS: Record<string, number> = { posture: 24, gaze: 2, face: 8 };

export function decodeKeypoints(values: number[]): Point[] {
  if (values.length !== 24) {
    throw new Error(`expected 24 posture values, got ${values.length}`);
  }
  const points: Point[] = [];
  for (let i = 0; i < 12; i++) {
    points.push({ x: values[2 * i]!, y: values[2 * i + 1]! });
  }
  return points;
}

/** Split a frame's dense value vector by the session's channel order. */
export function frameGlyph(frame: CueFramePayload, channels: string[]): FrameGlyph {
  const glyph: FrameGlyph = { keypoints: null, gaze: null, lostChannels: [] };
  let offset = 0;
  channels.forEach((channel, index) => {
    const width = CHANNEL_WIDTHS[channel];
    if (width === undefined) {
      throw new Error(`unknown channel ${channel}`);
    }
    const block = frame.values.slice(offset, offset + width);
    if (block.length !== width) {
      throw new Error(`frame carries ${frame.values.length} values; too few for ${channel}`);
    }
    const valid = frame.valid[index] === true;
    if (!valid) {
      glyph.lostChannels.push(channel);
    } else if (channel === "posture") {
      glyph.keypoints = decodeKeypoints(block);
    } else if (channel === "gaze") {
      glyph.gaze = { x: block[0]!, y: block[1]! };
    }
    offset += width;
  });
  return glyph;
}

// Minimal 2D context surface so rendering is testable without a DOM.
export interface Ctx2D {
  strokeStyle: string | CanvasGradient | CanvasPattern;
  fillStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  stroke(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  fill(): void;
}

export interface Viewport {
  width: number;
  height: number;
  padding?: number;
}

export interface DrawSummary {
  bones: number;
  keypoints: number;
  gazeDrawn: boolean;
  lostChannels: string[];
}

function fitTransform(points: Point[], viewport: Viewport): (p: Point) => Point {
  const pad = viewport.padding ?? 12;
  const xs = points.map((p) => p.x);
  const ys = points.map((p) => p.y);
  const minX = Math.min(...xs);
  const maxX = Math.max(...xs);
  const minY = Math.min(...ys);
  const maxY = Math.max(...ys);
  const spanX = Math.max(maxX - minX, 1e-9);
  const spanY = Math.max(maxY - minY, 1e-9);
  const scale = Math.min(
    (viewport.width - 2 * pad) / spanX,
    (viewport.height - 2 * pad) / spanY,
  );
  const offX = (viewport.width - spanX * scale) / 2;
  const offY = (viewport.height - spanY * scale) / 2;
  return (p) => ({ x: offX + (p.x - minX) * scale, y: offY + (p.y - minY) * scale });
}

export const HEAD_COLOR = "#f5c542";
export const BODY_COLOR = "#e05c5c";
export const GAZE_COLOR = "#4aa3ff";

export function drawFrame(ctx: Ctx2D, glyph: FrameGlyph, viewport: Viewport): DrawSummary {
  const summary: DrawSummary = {
    bones: 0,
    keypoints: 0,
    gazeDrawn: false,
    lostChannels: [...glyph.lostChannels],
  };
  const anchor: Point[] = [];
  if (glyph.keypoints) {
    anchor.push(...glyph.keypoints);
  }
  if (glyph.gaze) {
    anchor.push(glyph.gaze);
  }
  if (anchor.length === 0) {
    return summary;
  }
  const tx = fitTransform(anchor, viewport);

  if (glyph.keypoints) {
    const pts = glyph.keypoints.map(tx);
    ctx.lineWidth = 2;
    ctx.strokeStyle = BODY_COLOR;
    for (const [a, b] of BONES) {
      ctx.beginPath();
      ctx.moveTo(pts[a]!.x, pts[a]!.y);
      ctx.lineTo(pts[b]!.x, pts[b]!.y);
      ctx.stroke();
      summary.bones += 1;
    }
    pts.forEach((p, i) => {
      ctx.fillStyle = (HEAD_POINTS as readonly number[]).includes(i) ? HEAD_COLOR : BODY_COLOR;
      ctx.beginPath();
      ctx.arc(p.x, p.y, 3, 0, 2 * Math.PI);
      ctx.fill();
      summary.keypoints += 1;
    });
  }

  if (glyph.gaze) {
    const g = tx(glyph.gaze);
    ctx.strokeStyle = GAZE_COLOR;
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.arc(g.x, g.y, 6, 0, 2 * Math.PI);
    ctx.stroke();
    ctx.beginPath();
    ctx.moveTo(g.x - 9, g.y);
    ctx.lineTo(g.x + 9, g.y);
    ctx.stroke();
    ctx.beginPath();
    ctx.moveTo(g.x, g.y - 9);
    ctx.lineTo(g.x, g.y + 9);
    ctx.stroke();
    summary.gazeDrawn = true;
  }
  return summary;
}
