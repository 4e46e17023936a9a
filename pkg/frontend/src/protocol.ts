// Wire types for the session-service protocol: one JSON object per
// WebSocket message, envelope {kind, session, seq, payload}.

export type MessageKind =
  | "hello"
  | "frame-ingest"
  | "cue"
  | "trace-point"
  | "threshold-set"
  | "threshold-ack"
  | "error";

export interface Envelope {
  kind: MessageKind;
  session: string | null;
  seq: number;
  payload: unknown;
}

export interface CueFramePayload {
  frame_index: number;
  t: number;
  valid: boolean[];
  values: number[];
  component?: number;
}

export interface CuePayload {
  time: number;
  outlierness: number;
  threshold: number | null;
  representative: CueFramePayload[];
  outliers: CueFramePayload[];
  notify?: boolean;
}

export interface TracePointPayload {
  time: number;
  outlierness: number;
  batch_index?: number;
}

export interface HelloPayload {
  mode: string;
  channels: string[];
  schema: Record<string, boolean>;
  config: {
    components: number;
    forgetting_rate: number;
    sample_period: number;
    batch_seconds: number;
    warmup_seconds: number;
    threshold_mode: string;
    outlier_count: number;
    threshold_step: number;
  };
  threshold: number | null;
  batches_seen: number;
  clock: string;
}

export interface ThresholdAckPayload {
  id: string | null;
  threshold: number;
  applies_from_batch: number;
}

export interface ErrorPayload {
  code?: string;
  message: string;
}

export class ProtocolError extends Error {}

const KINDS: ReadonlySet<string> = new Set([
  "hello",
  "frame-ingest",
  "cue",
  "trace-point",
  "threshold-set",
  "threshold-ack",
  "error",
]);

function isNumber(x: unknown): x is number {
  return typeof x === "number" && Number.isFinite(x);
}

export function parseEnvelope(raw: string): Envelope {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch (err) {
    throw new ProtocolError(`not JSON: ${(err as Error).message}`);
  }
  if (typeof data !== "object" || data === null || Array.isArray(data)) {
    throw new ProtocolError("message must be a JSON object");
  }
  const obj = data as Record<string, unknown>;
  if (typeof obj.kind !== "string" || !KINDS.has(obj.kind)) {
    throw new ProtocolError(`unknown message kind ${JSON.stringify(obj.kind)}`);
  }
  return {
    kind: obj.kind as MessageKind,
    session: typeof obj.session === "string" ? obj.session : null,
    seq: isNumber(obj.seq) ? obj.seq : 0,
    payload: obj.payload ?? {},
  };
}

export function parseCueFrame(data: unknown): CueFramePayload {
  const obj = (data ?? {}) as Record<string, unknown>;
  if (!Array.isArray(obj.values) || !obj.values.every(isNumber)) {
    throw new ProtocolError("cue frame is missing numeric values");
  }
  if (!Array.isArray(obj.valid) || !obj.valid.every((v) => typeof v === "boolean")) {
    throw new ProtocolError("cue frame is missing validity flags");
  }
  if (!isNumber(obj.t)) {
    throw new ProtocolError("cue frame is missing its timestamp");
  }
  return {
    frame_index: isNumber(obj.frame_index) ? obj.frame_index : -1,
    t: obj.t,
    valid: obj.valid as boolean[],
    values: obj.values as number[],
    component: isNumber(obj.component) ? obj.component : undefined,
  };
}

export function parseCue(data: unknown): CuePayload {
  const obj = (data ?? {}) as Record<string, unknown>;
  if (!isNumber(obj.time) || !isNumber(obj.outlierness)) {
    throw new ProtocolError("cue payload is missing time/outlierness");
  }
  if (!Array.isArray(obj.representative) || !Array.isArray(obj.outliers)) {
    throw new ProtocolError("cue payload is missing frame lists");
  }
  return {
    time: obj.time,
    outlierness: obj.outlierness,
    threshold: isNumber(obj.threshold) ? obj.threshold : null,
    representative: obj.representative.map(parseCueFrame),
    outliers: obj.outliers.map(parseCueFrame),
    notify: obj.notify === true,
  };
}

export function makeEnvelope(
  kind: MessageKind,
  session: string,
  seq: number,
  payload: unknown,
): string {
  return JSON.stringify({ kind, session, seq, payload });
}
