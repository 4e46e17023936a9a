// DOM rendering. Kept thin: all logic lives in state.ts / skeleton.ts /
// chart.ts; this file only projects the view model into elements.

import { drawChart } from "./chart.js";
import { CueCard, DashboardState, cuePanels, notificationActive } from "./state.js";
import { Ctx2D, drawFrame, frameGlyph } from "./skeleton.js";

export interface ViewRefs {
  status: HTMLElement;
  threshold: HTMLElement;
  pending: HTMLElement;
  moreButton: HTMLButtonElement;
  lessButton: HTMLButtonElement;
  pulse: HTMLElement;
  traceCanvas: HTMLCanvasElement;
  cueFeed: HTMLElement;
  errorFeed: HTMLElement;
  warning: HTMLElement;
}

const PANEL_W = 160;
const PANEL_H = 150;

export function render(state: DashboardState, refs: ViewRefs, now: number): void {
  refs.status.textContent = state.connection + (state.reconnectPrompt ? " - reconnect?" : "");
  refs.status.dataset.state = state.connection;
  refs.threshold.textContent =
    state.threshold === null ? "threshold: pending" : `threshold: ${state.threshold.toFixed(3)}`;
  refs.pending.style.visibility = state.pending !== null ? "visible" : "hidden";

  const buttonsEnabled = state.connection === "open" && state.pending === null;
  refs.moreButton.disabled = !buttonsEnabled;
  refs.lessButton.disabled = !buttonsEnabled;

  refs.pulse.classList.toggle("active", notificationActive(state, now));
  refs.warning.textContent = state.warnings[state.warnings.length - 1] ?? "";

  const ctx = refs.traceCanvas.getContext("2d");
  if (ctx !== null) {
    ctx.clearRect(0, 0, refs.traceCanvas.width, refs.traceCanvas.height);
    drawChart(ctx as unknown as Ctx2D, state.trace, state.threshold, {
      width: refs.traceCanvas.width,
      height: refs.traceCanvas.height,
    });
  }

  renderCueFeed(state, refs.cueFeed);
  renderErrors(state, refs.errorFeed);
}

function renderCueFeed(state: DashboardState, feed: HTMLElement): void {
  feed.replaceChildren();
  if (state.cues.length === 0) {
    const empty = document.createElement("div");
    empty.className = "placeholder";
    empty.textContent = "No cues yet - waiting for the session";
    feed.appendChild(empty);
    return;
  }
  for (const card of state.cues.slice(0, 12)) {
    feed.appendChild(renderCueCard(card, state.channels));
  }
}

function renderCueCard(card: CueCard, channels: string[]): HTMLElement {
  const el = document.createElement("div");
  el.className = "cue-card";
  const head = document.createElement("div");
  head.className = "cue-head";
  const threshold = card.cue.threshold === null ? "top-k" : card.cue.threshold.toFixed(2);
  head.textContent =
    `t=${card.cue.time.toFixed(1)}s  outlierness ${card.cue.outlierness.toFixed(2)}` +
    ` (threshold ${threshold})`;
  el.appendChild(head);

  const panels = document.createElement("div");
  panels.className = "cue-panels";
  for (const panel of cuePanels(card.cue)) {
    const cell = document.createElement("div");
    cell.className = `panel ${panel.role}`;
    const caption = document.createElement("div");
    caption.className = "caption";
    caption.textContent = `${panel.role === "past" ? "past" : "current"} - ${panel.label}`;
    const canvas = document.createElement("canvas");
    canvas.width = PANEL_W;
    canvas.height = PANEL_H;
    try {
      const glyph = frameGlyph(panel.frame, channels);
      const ctx = canvas.getContext("2d");
      if (ctx !== null) {
        drawFrame(ctx as unknown as Ctx2D, glyph, { width: PANEL_W, height: PANEL_H });
      }
      if (glyph.lostChannels.length > 0) {
        const badge = document.createElement("div");
        badge.className = "badge lost";
        badge.textContent = `signal lost: ${glyph.lostChannels.join(", ")}`;
        cell.appendChild(badge);
      }
    } catch (err) {
      const bad = document.createElement("div");
      bad.className = "badge error";
      bad.textContent = `bad frame payload: ${(err as Error).message}`;
      cell.appendChild(bad);
    }
    cell.appendChild(caption);
    cell.appendChild(canvas);
    panels.appendChild(cell);
  }
  el.appendChild(panels);
  return el;
}

function renderErrors(state: DashboardState, feed: HTMLElement): void {
  feed.replaceChildren();
  for (const card of state.errors.slice(0, 5)) {
    const el = document.createElement("div");
    el.className = "error-card";
    el.textContent = `[${card.code}] ${card.message}`;
    feed.appendChild(el);
  }
}
