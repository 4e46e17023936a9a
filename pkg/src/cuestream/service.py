"""Live/replay session server speaking a JSON message protocol.

Transport is WebSocket (browser-friendly); every message is one JSON
object ``{"kind", "session", "seq", "payload"}``. Kinds:

* ``hello``           client -> server: join/create a session;
                      server -> client: session metadata reply.
* ``frame-ingest``    client -> server (live sessions): one frame record
                      in the session-file format.
* ``trace-point``     server -> clients: one scored batch.
* ``cue``             server -> clients: a detected cue; carries the
                      representative and outlier frame payloads plus a
                      ``notify`` flag clients may surface as a pulse.
* ``threshold-set``   client -> server: {"command": "more"|"less",
                      "id": <idempotency key>}.
* ``threshold-ack``   server -> clients: the new threshold and the batch
                      index from which it applies.
* ``error``           server -> client: problem report; the connection
                      stays open.

Within a session, batch processing is strictly serialized on one task;
threshold commands are applied between batches and take effect at the
next batch boundary. Replay sessions feed a session file through the
same detector under a configurable clock (realtime, accelerated, or
as-fast-as-possible), so a replayed session emits exactly the cues the
offline CLI computes for the same file, config, and seed.
"""

from __future__ import annotations

import asyncio
import json
import logging
from dataclasses import dataclass

from websockets.asyncio.server import ServerConnection, serve as ws_serve

from .detector import (
    CueEvent,
    Detector,
    DetectorConfig,
    ThresholdAck,
    ThresholdUnavailableError,
    cue_payload,
    write_cues,
    write_trace,
)
from .features import (
    ChannelSchema,
    FeatureFrame,
    StreamBatcher,
    StreamFormatError,
    StreamOrderError,
    open_stream,
    parse_record,
)

logger = logging.getLogger(__name__)

PROTOCOL_KINDS = (
    "hello",
    "frame-ingest",
    "cue",
    "trace-point",
    "threshold-set",
    "threshold-ack",
    "error",
)

DEFAULT_REPLAY_SESSION = "replay"
INGEST_QUEUE_LIMIT = 4096


@dataclass(frozen=True)
class SessionClock:
    """Replay pacing: realtime, accelerated by a factor, or unpaced."""

    mode: str  # "realtime" | "accelerated" | "fast"
    factor: float = 1.0

    def __post_init__(self):
        if self.mode not in ("realtime", "accelerated", "fast"):
            raise ValueError(f"unknown clock mode {self.mode!r}")
        if self.factor <= 0:
            raise ValueError("clock factor must be > 0")

    @classmethod
    def parse(cls, text: str) -> "SessionClock":
        """Parse the CLI form: ``realtime``, ``fast``, or ``x<factor>``."""
        if text == "realtime":
            return cls(mode="realtime")
        if text == "fast":
            return cls(mode="fast")
        if text.startswith("x"):
            return cls(mode="accelerated", factor=float(text[1:]))
        raise ValueError(f"cannot parse clock {text!r}")

    def format(self) -> str:
        if self.mode == "accelerated":
            return f"x{self.factor}"
        return self.mode


@dataclass
class ServeConfig:
    detector: DetectorConfig
    schema: ChannelSchema
    clock: SessionClock = SessionClock(mode="realtime")
    replay_path: str | None = None
    output_path: str | None = None
    trace_path: str | None = None
    replay_session_id: str = DEFAULT_REPLAY_SESSION
    ingest_queue_limit: int = INGEST_QUEUE_LIMIT


class _Session:
    """Server-side session state; one processing task, many subscribers."""

    def __init__(self, service: "CueService", session_id: str, mode: str):
        self.service = service
        self.id = session_id
        self.mode = mode  # "live" | "replay"
        self.detector = Detector(service.cfg.detector)
        self.batcher = StreamBatcher(service.cfg.detector.sampling)
        self.subscribers: set[ServerConnection] = set()
        self.cues: list[CueEvent] = []
        self.seq = 0
        self.queue: asyncio.Queue[FeatureFrame | None] = asyncio.Queue(
            maxsize=service.cfg.ingest_queue_limit
        )
        self.finished = asyncio.Event()
        self._acks: dict[str, ThresholdAck] = {}
        self._last_ingest_ts: float | None = None
        self._tasks: list[asyncio.Task] = []

    def start_processing(self) -> None:
        self._tasks.append(asyncio.create_task(self._process_loop()))

    def start_replay(self) -> None:
        if any(not t.done() for t in self._tasks):
            return
        self.start_processing()
        self._tasks.append(asyncio.create_task(self._replay_reader()))

    async def close(self) -> None:
        for task in self._tasks:
            task.cancel()
        for task in self._tasks:
            try:
                await task
            except (asyncio.CancelledError, Exception):
                pass

    # -- outbound ---------------------------------------------------------

    def _envelope(self, kind: str, payload: dict) -> str:
        self.seq += 1
        return json.dumps(
            {"kind": kind, "session": self.id, "seq": self.seq, "payload": payload}
        )

    async def broadcast(self, kind: str, payload: dict) -> None:
        message = self._envelope(kind, payload)
        dead = []
        for conn in list(self.subscribers):
            try:
                await conn.send(message)
            except Exception:
                dead.append(conn)
        for conn in dead:
            self.subscribers.discard(conn)

    async def send_to(self, conn: ServerConnection, kind: str, payload: dict) -> None:
        try:
            await conn.send(self._envelope(kind, payload))
        except Exception:
            self.subscribers.discard(conn)

    def hello_payload(self) -> dict:
        cfg = self.service.cfg
        det = cfg.detector
        return {
            "mode": self.mode,
            "channels": list(cfg.schema.channels),
            "schema": cfg.schema.header_obj()["schema"],
            "config": {
                "components": det.engine.components,
                "forgetting_rate": det.engine.forgetting_rate,
                "sample_period": det.sampling.sample_period,
                "batch_seconds": det.sampling.batch_duration,
                "warmup_seconds": det.sampling.warmup,
                "threshold_mode": det.threshold.format(),
                "outlier_count": det.outlier_count,
                "threshold_step": det.threshold_step,
            },
            "threshold": self.detector.threshold,
            "batches_seen": self.detector.batches_seen,
            "clock": cfg.clock.format(),
        }

    # -- inbound ----------------------------------------------------------

    async def ingest(self, conn: ServerConnection, payload: dict) -> None:
        """Validate and enqueue one live frame record."""
        if self.mode != "live":
            await self.send_to(
                conn, "error", {"code": "not-live", "message": "session is a replay; it does not accept frames"}
            )
            return
        try:
            frame = parse_record(payload, self.service.cfg.schema, self._last_ingest_ts)
        except StreamOrderError as exc:
            await self.send_to(conn, "error", {"code": "ordering", "message": str(exc)})
            return
        except StreamFormatError as exc:
            await self.send_to(conn, "error", {"code": "format", "message": str(exc)})
            return
        self._last_ingest_ts = frame.timestamp
        try:
            self.queue.put_nowait(frame)
        except asyncio.QueueFull:
            await self.send_to(
                conn,
                "error",
                {"code": "backpressure", "message": "ingest queue full; frame dropped, slow down"},
            )

    async def handle_threshold(self, conn: ServerConnection, payload: dict) -> None:
        command = payload.get("command")
        message_id = payload.get("id")
        if command not in ("more", "less"):
            await self.send_to(
                conn, "error", {"code": "bad-command", "message": f"unknown threshold command {command!r}"}
            )
            return
        if message_id is not None and message_id in self._acks:
            ack = self._acks[message_id]
            await self.send_to(conn, "threshold-ack", self._ack_payload(message_id, ack))
            return
        try:
            ack = self.detector.request_threshold(command)
        except (ThresholdUnavailableError, ValueError) as exc:
            await self.send_to(conn, "error", {"code": "threshold", "message": str(exc)})
            return
        if message_id is not None:
            self._acks[message_id] = ack
        await self.broadcast("threshold-ack", self._ack_payload(message_id, ack))

    @staticmethod
    def _ack_payload(message_id: str | None, ack: ThresholdAck) -> dict:
        return {
            "id": message_id,
            "threshold": ack.threshold,
            "applies_from_batch": ack.applies_from_batch,
        }

    # -- processing --------------------------------------------------------

    async def _process_loop(self) -> None:
        while True:
            frame = await self.queue.get()
            if frame is None:
                for batch in self.batcher.finalize():
                    await self._handle_batch(batch)
                await self._finish()
                return
            try:
                batches = self.batcher.push(frame)
            except StreamOrderError as exc:
                await self.broadcast("error", {"code": "ordering", "message": str(exc)})
                continue
            for batch in batches:
                await self._handle_batch(batch)

    async def _handle_batch(self, batch) -> None:
        observed = self.detector.observe(batch)
        if observed.trace_point is not None:
            await self.broadcast(
                "trace-point",
                {
                    "time": observed.trace_point.time,
                    "outlierness": observed.trace_point.outlierness,
                    "batch_index": observed.batch_index,
                },
            )
        if observed.cue is not None:
            self.cues.append(observed.cue)
            await self.broadcast("cue", dict(cue_payload(observed.cue), notify=True))

    async def _finish(self) -> None:
        self.cues.extend(self.detector.finish())
        cfg = self.service.cfg
        if self.mode == "replay":
            if cfg.output_path:
                write_cues(cfg.output_path, self.cues)
            if cfg.trace_path:
                write_trace(cfg.trace_path, self.detector.trace)
        self.finished.set()

    async def _replay_reader(self) -> None:
        cfg = self.service.cfg
        assert cfg.replay_path is not None
        clock = cfg.clock
        loop = asyncio.get_running_loop()
        _, frames = open_stream(cfg.replay_path, cfg.schema)
        origin_ts: float | None = None
        origin_wall = loop.time()
        for frame in frames:
            if clock.mode != "fast":
                if origin_ts is None:
                    origin_ts = frame.timestamp
                target = (frame.timestamp - origin_ts) / clock.factor
                delay = target - (loop.time() - origin_wall)
                if delay > 0:
                    await asyncio.sleep(delay)
            await self.queue.put(frame)
        await self.queue.put(None)


class CueService:
    """WebSocket front for detector sessions.

    Many sessions run concurrently; each is serialized internally. Create
    with a config, then :meth:`start` / :meth:`stop`, or use
    :meth:`serve_forever` from a CLI entry point.
    """

    def __init__(self, cfg: ServeConfig):
        self.cfg = cfg
        self.sessions: dict[str, _Session] = {}
        self._server = None
        self.port: int | None = None

    @property
    def replay_session(self) -> "_Session | None":
        return self.sessions.get(self.cfg.replay_session_id)

    async def start(self, host: str = "127.0.0.1", port: int = 0) -> None:
        self._server = await ws_serve(self._handler, host, port)
        self.port = self._server.sockets[0].getsockname()[1]
        if self.cfg.replay_path is not None:
            session = self._get_or_create(self.cfg.replay_session_id, mode="replay")
            # Headless replays (file outputs requested) start immediately;
            # otherwise the replay waits for the first subscriber.
            if self.cfg.output_path or self.cfg.trace_path:
                session.start_replay()
        logger.info("listening on %s:%s", host, self.port)

    async def stop(self) -> None:
        for session in list(self.sessions.values()):
            await session.close()
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()

    async def serve_forever(self, host: str, port: int) -> None:
        await self.start(host, port)
        assert self._server is not None
        try:
            await self._server.serve_forever()
        finally:
            await self.stop()

    def _get_or_create(self, session_id: str, mode: str = "live") -> _Session:
        session = self.sessions.get(session_id)
        if session is None:
            session = _Session(self, session_id, mode)
            self.sessions[session_id] = session
            if mode == "live":
                session.start_processing()
        return session

    async def _handler(self, conn: ServerConnection) -> None:
        joined: _Session | None = None
        try:
            async for raw in conn:
                try:
                    msg = json.loads(raw)
                    if not isinstance(msg, dict):
                        raise ValueError("message must be a JSON object")
                    kind = msg.get("kind")
                    payload = msg.get("payload") or {}
                except (json.JSONDecodeError, ValueError) as exc:
                    await self._send_raw_error(conn, f"malformed message: {exc}")
                    continue

                if kind == "hello":
                    session_id = msg.get("session") or self.cfg.replay_session_id
                    joined = self._get_or_create(str(session_id))
                    joined.subscribers.add(conn)
                    # Reply before any replay traffic can be broadcast.
                    await joined.send_to(conn, "hello", joined.hello_payload())
                    if joined.mode == "replay":
                        joined.start_replay()
                    continue

                session_id = msg.get("session")
                session = (
                    self.sessions.get(str(session_id)) if session_id is not None else joined
                )
                if session is None:
                    await self._send_raw_error(
                        conn, "unknown session; send hello first or name an existing session"
                    )
                    continue

                if kind == "frame-ingest":
                    await session.ingest(conn, payload)
                elif kind == "threshold-set":
                    await session.handle_threshold(conn, payload)
                else:
                    await session.send_to(
                        conn,
                        "error",
                        {"code": "bad-kind", "message": f"unsupported message kind {kind!r}"},
                    )
        finally:
            if joined is not None:
                joined.subscribers.discard(conn)

    @staticmethod
    async def _send_raw_error(conn: ServerConnection, message: str) -> None:
        try:
            await conn.send(
                json.dumps(
                    {
                        "kind": "error",
                        "session": None,
                        "seq": 0,
                        "payload": {"code": "protocol", "message": message},
                    }
                )
            )
        except Exception:
            pass


async def run_replay_to_files(cfg: ServeConfig, host: str = "127.0.0.1", port: int = 0) -> CueService:
    """Start a service, wait for its headless replay to finish, and stop.

    Convenience used by tests and scripting; requires ``replay_path`` and
    at least one output path in the config.
    """
    service = CueService(cfg)
    await service.start(host, port)
    session = service.replay_session
    assert session is not None
    await session.finished.wait()
    await service.stop()
    return service
