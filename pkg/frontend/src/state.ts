// Dashboard view model and its pure reducer.
//
// The dashboard is a pure protocol client: every displayed number comes
// from a server message folded in here. The reducer never recomputes
// outlierness or thresholds; it only records what the server said.

import {
  CuePayload,
  Envelope,
  ErrorPayload,
  HelloPayload,
  ProtocolError,
  ThresholdAckPayload,
  TracePointPayload,
  parseCue,
} from "./protocol.js";

export const DEFAULT_TRACE_WINDOW_S = 600; // 10 minutes
export const NOTIFICATION_PULSE_MS = 1500;

export interface CueCard {
  seq: number;
  receivedAt: number;
  cue: CuePayload;
}

export interface ErrorCard {
  receivedAt: number;
  code: string;
  message: string;
}

export type ConnectionState = "idle" | "connecting" | "open" | "closed";

export interface PendingCommand {
  id: string;
  command: "more" | "less";
  sentAt: number;
}

export interface DashboardState {
  connection: ConnectionState;
  sessionId: string;
  channels: string[];
  config: HelloPayload["config"] | null;
  threshold: number | null; // always the last server-provided value
  pending: PendingCommand | null;
  reconnectPrompt: boolean;
  cues: CueCard[]; // most recent first, ordered by seq
  errors: ErrorCard[];
  warnings: string[];
  trace: TracePointPayload[]; // ascending time, sliding window
  traceWindowSeconds: number;
  notification: { seq: number; at: number } | null;
}

export function initialState(sessionId: string): DashboardState {
  return {
    connection: "idle",
    sessionId,
    channels: [],
    config: null,
    threshold: null,
    pending: null,
    reconnectPrompt: false,
    cues: [],
    errors: [],
    warnings: [],
    trace: [],
    traceWindowSeconds: DEFAULT_TRACE_WINDOW_S,
    notification: null,
  };
}

export type DashboardEvent =
  | { type: "connecting" }
  | { type: "open" }
  | { type: "closed" }
  | { type: "message"; envelope: Envelope; at: number }
  | { type: "malformed"; detail: string; at: number }
  | { type: "command-sent"; id: string; command: "more" | "less"; at: number }
  | { type: "command-blocked"; reason: string }
  | { type: "ack-timeout"; id: string };

export function reduce(state: DashboardState, event: DashboardEvent): DashboardState {
  switch (event.type) {
    case "connecting":
      return { ...state, connection: "connecting", reconnectPrompt: false };
    case "open":
      return { ...state, connection: "open", reconnectPrompt: false };
    case "closed":
      return { ...state, connection: "closed", pending: null, reconnectPrompt: true };
    case "malformed":
      return pushError(state, { receivedAt: event.at, code: "client", message: event.detail });
    case "command-sent":
      return {
        ...state,
        pending: { id: event.id, command: event.command, sentAt: event.at },
      };
    case "command-blocked":
      return { ...state, warnings: [...state.warnings, event.reason] };
    case "ack-timeout":
      if (state.pending === null || state.pending.id !== event.id) {
        return state;
      }
      return { ...state, pending: null, reconnectPrompt: true };
    case "message":
      return applyMessage(state, event.envelope, event.at);
  }
}

function applyMessage(state: DashboardState, env: Envelope, at: number): DashboardState {
  switch (env.kind) {
    case "hello": {
      const payload = env.payload as HelloPayload;
      return {
        ...state,
        channels: payload.channels ?? [],
        config: payload.config ?? null,
        threshold: payload.threshold ?? null,
      };
    }
    case "trace-point": {
      const point = env.payload as TracePointPayload;
      const trace = [...state.trace, point];
      const horizon = point.time - state.traceWindowSeconds;
      return { ...state, trace: trace.filter((p) => p.time >= horizon) };
    }
    case "cue": {
      let cue: CuePayload;
      try {
        cue = parseCue(env.payload);
      } catch (err) {
        if (err instanceof ProtocolError) {
          return pushError(state, { receivedAt: at, code: "cue-payload", message: err.message });
        }
        throw err;
      }
      const card: CueCard = { seq: env.seq, receivedAt: at, cue };
      const cues = [card, ...state.cues].sort((a, b) => b.seq - a.seq);
      const notification = cue.notify ? { seq: env.seq, at } : state.notification;
      return { ...state, cues, notification };
    }
    case "threshold-ack": {
      const ack = env.payload as ThresholdAckPayload;
      const pending =
        state.pending !== null && (ack.id === null || ack.id === state.pending.id)
          ? null
          : state.pending;
      return { ...state, threshold: ack.threshold, pending };
    }
    case "error": {
      const payload = env.payload as ErrorPayload;
      return pushError(state, {
        receivedAt: at,
        code: payload.code ?? "server",
        message: payload.message ?? "unknown error",
      });
    }
    default:
      return state;
  }
}

function pushError(state: DashboardState, card: ErrorCard): DashboardState {
  return { ...state, errors: [card, ...state.errors].slice(0, 50) };
}

export function notificationActive(state: DashboardState, now: number): boolean {
  return state.notification !== null && now - state.notification.at < NOTIFICATION_PULSE_MS;
}

// Four-panel layout for one cue: representative (past) frames on the
// left, outlier (current) frames on the right.
export interface CuePanel {
  role: "past" | "current";
  label: string;
  frame: CuePayload["representative"][number];
}

export function cuePanels(cue: CuePayload): CuePanel[] {
  const past: CuePanel[] = cue.representative.map((frame, i) => ({
    role: "past",
    label: `state ${frame.component ?? i}`,
    frame,
  }));
  const current: CuePanel[] = cue.outliers.map((frame, i) => ({
    role: "current",
    label: `outlier ${i + 1}`,
    frame,
  }));
  return [...past, ...current];
}
