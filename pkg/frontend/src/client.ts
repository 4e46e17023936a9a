// Protocol client wiring: socket lifecycle, hello handshake, threshold
// commands with idempotency keys and acknowledgment timeouts. All state
// transitions flow through the pure reducer in state.ts.

import { makeEnvelope, parseEnvelope, ProtocolError } from "./protocol.js";
import {
  DashboardEvent,
  DashboardState,
  initialState,
  reduce,
} from "./state.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: (() => void) | null;
  onmessage: ((event: { data: unknown }) => void) | null;
  onclose: (() => void) | null;
  onerror: ((event: unknown) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface ClientOptions {
  url: string;
  session: string;
  socketFactory?: SocketFactory;
  now?: () => number;
  ackTimeoutMs?: number;
  onChange?: (state: DashboardState) => void;
}

const DEFAULT_ACK_TIMEOUT_MS = 5000;

export class DashboardClient {
  state: DashboardState;

  private readonly opts: ClientOptions;
  private readonly now: () => number;
  private socket: SocketLike | null = null;
  private seq = 0;
  private commandCounter = 0;
  private ackTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(opts: ClientOptions) {
    this.opts = opts;
    this.now = opts.now ?? (() => Date.now());
    this.state = initialState(opts.session);
  }

  connect(): void {
    const factory =
      this.opts.socketFactory ?? ((url: string) => new WebSocket(url) as unknown as SocketLike);
    this.dispatch({ type: "connecting" });
    const socket = factory(this.opts.url);
    this.socket = socket;
    socket.onopen = () => {
      this.dispatch({ type: "open" });
      this.sendMessage("hello", {});
    };
    socket.onmessage = (event) => {
      const at = this.now();
      try {
        const envelope = parseEnvelope(String(event.data));
        this.dispatch({ type: "message", envelope, at });
      } catch (err) {
        if (err instanceof ProtocolError) {
          this.dispatch({ type: "malformed", detail: err.message, at });
        } else {
          throw err;
        }
      }
    };
    socket.onclose = () => {
      this.clearAckTimer();
      this.dispatch({ type: "closed" });
    };
    socket.onerror = () => {
      // onclose carries the state transition; nothing extra to record
    };
  }

  close(): void {
    this.socket?.close();
  }

  /**
   * Ask the server for more or fewer notifications. No-op with a user
   * warning while disconnected; buttons stay disabled while an
   * acknowledgment is pending.
   */
  sendThreshold(command: "more" | "less"): void {
    if (this.state.connection !== "open") {
      this.dispatch({
        type: "command-blocked",
        reason: "not connected; threshold command not sent",
      });
      return;
    }
    if (this.state.pending !== null) {
      this.dispatch({
        type: "command-blocked",
        reason: "a threshold command is already awaiting acknowledgment",
      });
      return;
    }
    this.commandCounter += 1;
    const id = `cmd-${this.commandCounter}`;
    this.sendMessage("threshold-set", { command, id });
    this.dispatch({ type: "command-sent", id, command, at: this.now() });
    const timeout = this.opts.ackTimeoutMs ?? DEFAULT_ACK_TIMEOUT_MS;
    this.clearAckTimer();
    this.ackTimer = setTimeout(() => {
      this.dispatch({ type: "ack-timeout", id });
    }, timeout);
  }

  private sendMessage(kind: "hello" | "threshold-set" | "frame-ingest", payload: unknown): void {
    if (this.socket === null) {
      return;
    }
    this.seq += 1;
    this.socket.send(makeEnvelope(kind, this.opts.session, this.seq, payload));
  }

  private dispatch(event: DashboardEvent): void {
    this.state = reduce(this.state, event);
    if (
      event.type === "message" &&
      event.envelope.kind === "threshold-ack" &&
      this.state.pending === null
    ) {
      this.clearAckTimer();
    }
    this.opts.onChange?.(this.state);
  }

  private clearAckTimer(): void {
    if (this.ackTimer !== null) {
      clearTimeout(this.ackTimer);
      this.ackTimer = null;
    }
  }
}
