// Sliding-window outlierness trace chart.

import { TracePointPayload } from "./protocol.js";
import { Ctx2D, Viewport } from "./skeleton.js";

export interface ChartGeometry {
  points: { x: number; y: number }[];
  thresholdY: number | null;
  tMin: number;
  tMax: number;
  vMin: number;
  vMax: number;
}

/** Map trace points (and the threshold line) into viewport coordinates. */
export function chartGeometry(
  trace: TracePointPayload[],
  threshold: number | null,
  viewport: Viewport,
): ChartGeometry {
  if (trace.length === 0) {
    return { points: [], thresholdY: null, tMin: 0, tMax: 1, vMin: 0, vMax: 1 };
  }
  const pad = viewport.padding ?? 8;
  const tMin = trace[0]!.time;
  const tMax = Math.max(trace[trace.length - 1]!.time, tMin + 1e-9);
  const values = trace.map((p) => p.outlierness);
  if (threshold !== null) {
    values.push(threshold);
  }
  const vMin = Math.min(...values);
  const vMax = Math.max(...values, vMin + 1e-9);
  const sx = (viewport.width - 2 * pad) / (tMax - tMin);
  const sy = (viewport.height - 2 * pad) / (vMax - vMin);
  const toXY = (t: number, v: number) => ({
    x: pad + (t - tMin) * sx,
    y: viewport.height - pad - (v - vMin) * sy,
  });
  return {
    points: trace.map((p) => toXY(p.time, p.outlierness)),
    thresholdY: threshold === null ? null : toXY(tMin, threshold).y,
    tMin,
    tMax,
    vMin,
    vMax,
  };
}

export const TRACE_COLOR = "#8fd18f";
export const THRESHOLD_COLOR = "#cccccc";

export function drawChart(
  ctx: Ctx2D,
  trace: TracePointPayload[],
  threshold: number | null,
  viewport: Viewport,
): ChartGeometry {
  const geom = chartGeometry(trace, threshold, viewport);
  if (geom.points.length > 1) {
    ctx.strokeStyle = TRACE_COLOR;
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    ctx.moveTo(geom.points[0]!.x, geom.points[0]!.y);
    for (const p of geom.points.slice(1)) {
      ctx.lineTo(p.x, p.y);
    }
    ctx.stroke();
  }
  if (geom.thresholdY !== null) {
    ctx.strokeStyle = THRESHOLD_COLOR;
    ctx.lineWidth = 1;
    ctx.beginPath();
    ctx.moveTo(0, geom.thresholdY);
    ctx.lineTo(viewport.width, geom.thresholdY);
    ctx.stroke();
  }
  return geom;
}
