"""Live session service: NDJSON wire protocol, append-only store,
real-time analysis events, and time-scaled replay.

One JSON object per line (UTF-8) over a bidirectional byte stream; the
same messages travel unmodified over the WebSocket binding (one object
per text frame). The store keeps, per session, an append-only raw.jsonl
plus derived.json and graph.nt, both reproducible from the raw log
alone via rebuild_session_dir.
"""

from __future__ import annotations

import asyncio
import dataclasses
import json
import os
import re
import socket
from dataclasses import dataclass, field
from pathlib import Path

from .battery import TestTemplate, template_from_json, template_to_json
from .config import ServiceConfig
from .derive import (
    DerivedSession,
    derive_session,
    derived_json_bytes,
    derived_to_dict,
    graph_bytes,
)
from .model import (
    InkSession,
    NonMonotonicTimestamp,
    PageSize,
    RawSample,
    SOURCES,
)
from .pipeline import IncrementalPipeline

PROTOCOL_VERSION = 1
MAX_UNACKED_BATCHES = 64  # client-side contract; the server acks every batch

CLIENT_TYPES = ("hello", "start_session", "samples", "end_session",
                "subscribe", "replay_request")
SERVER_TYPES = ("hello", "feature_update", "stroke_completed",
                "classification", "score_update", "replay_event",
                "replay_suggestion", "session_summary", "error")

_SESSION_ID_RE = re.compile(r"^[A-Za-z0-9._-]{1,128}$")


class ProtocolError(ValueError):
    pass


class VersionMismatch(ProtocolError):
    pass


class UnknownSession(KeyError):
    pass


class InvalidSpeed(ValueError):
    pass


def encode_frame(obj: dict) -> bytes:
    return (json.dumps(obj, sort_keys=True, ensure_ascii=False) + "\n").encode("utf-8")


def sample_to_wire(s: RawSample) -> dict:
    return {"t": s.t, "x": s.x, "y": s.y, "p": s.pressure, "c": s.contact}


def sample_from_wire(obj: dict) -> RawSample:
    return RawSample(int(obj["t"]), float(obj["x"]), float(obj["y"]),
                     float(obj["p"]), bool(obj["c"]))


# ---------------------------------------------------------------------------
# store

class SessionStore:
    """Filesystem layout: <root>/<session_id>/{raw.jsonl,derived.json,graph.nt}.

    raw.jsonl is append-only and flushed before each batch is
    acknowledged; derived artifacts are written atomically on finalize.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._logs: dict[str, object] = {}

    def session_dir(self, session_id: str) -> Path:
        if not _SESSION_ID_RE.match(session_id):
            raise ProtocolError(f"invalid session id {session_id!r}")
        return self.root / session_id

    def open_log(self, session_id: str) -> None:
        d = self.session_dir(session_id)
        if (d / "raw.jsonl").exists():
            raise ProtocolError(f"session {session_id!r} already recorded")
        d.mkdir(parents=True, exist_ok=True)
        self._logs[session_id] = open(d / "raw.jsonl", "a", encoding="utf-8")

    def append_raw(self, session_id: str, record: dict) -> None:
        log = self._logs[session_id]
        log.write(json.dumps(record, sort_keys=True, ensure_ascii=False) + "\n")
        log.flush()

    def close_log(self, session_id: str) -> None:
        log = self._logs.pop(session_id, None)
        if log is not None:
            log.close()

    def finalize(self, session_id: str, derived: bytes, graph: bytes) -> None:
        d = self.session_dir(session_id)
        for name, data in (("derived.json", derived), ("graph.nt", graph)):
            tmp = d / (name + ".tmp")
            tmp.write_bytes(data)
            os.replace(tmp, d / name)

    def list_sessions(self) -> list[str]:
        if not self.root.exists():
            return []
        return sorted(p.name for p in self.root.iterdir()
                      if (p / "raw.jsonl").exists())

    def load_raw(self, session_id: str) -> list[dict]:
        path = self.session_dir(session_id) / "raw.jsonl"
        if not path.exists():
            raise UnknownSession(session_id)
        records = []
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    records.append(json.loads(line))
        return records

    def load_derived(self, session_id: str) -> dict | None:
        path = self.session_dir(session_id) / "derived.json"
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# raw-log assembly (shared by live finalize and offline rebuild)

def assemble_from_raw(records: list[dict]) -> tuple[InkSession, TestTemplate | None, tuple[int, int]]:
    start = next((r for r in records if r.get("type") == "start_session"), None)
    if start is None:
        raise ProtocolError("raw log holds no start_session record")
    samples = []
    for r in records:
        if r.get("type") == "samples":
            samples.extend(sample_from_wire(s) for s in r.get("samples", []))
    page = start.get("page") or {}
    session = InkSession.from_samples(
        samples,
        session_id=str(start["session_id"]),
        test_id=str(start.get("test_id", "")),
        subject_pseudonym=str(start.get("subject_pseudonym", "anon")),
        page=PageSize(float(page.get("w_mm", 210.0)),
                      float(page.get("h_mm", 297.0))),
        source=str(start.get("source", "digital-paper")),
    )
    template = None
    if start.get("template") is not None:
        template = template_from_json(start["template"])
    tt = start.get("target_time") or [11, 10]
    return session, template, (int(tt[0]), int(tt[1]))


def derive_from_raw(records: list[dict], config: ServiceConfig) -> DerivedSession:
    session, template, target_time = assemble_from_raw(records)
    return derive_session(session, template, target_time, config.engine)


def rebuild_session_dir(session_dir: str | Path,
                        config: ServiceConfig) -> tuple[bytes, bytes]:
    """Regenerate derived.json and graph.nt from raw.jsonl alone."""
    d = Path(session_dir)
    records = []
    with open(d / "raw.jsonl", "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(json.loads(line))
    derived = derive_from_raw(records, config)
    dj = derived_json_bytes(derived)
    gb = graph_bytes(derived)
    for name, data in (("derived.json", dj), ("graph.nt", gb)):
        tmp = d / (name + ".tmp")
        tmp.write_bytes(data)
        os.replace(tmp, d / name)
    return dj, gb


# ---------------------------------------------------------------------------
# service hub

@dataclass
class _LiveSession:
    pipeline: IncrementalPipeline
    records: list[dict] = field(default_factory=list)
    subscribers: list = field(default_factory=list)
    done: bool = False


class Connection:
    """Transport-agnostic outbound side of one client connection."""

    def __init__(self, send_bytes):
        self._send_bytes = send_bytes
        self._lock = asyncio.Lock()
        self.hello_done = False
        self.ingest_session: str | None = None
        self.tasks: set[asyncio.Task] = set()

    async def send(self, obj: dict) -> None:
        async with self._lock:
            await self._send_bytes(encode_frame(obj))

    def spawn(self, coro) -> None:
        task = asyncio.get_running_loop().create_task(coro)
        self.tasks.add(task)
        task.add_done_callback(self.tasks.discard)


class SessionService:
    """Protocol logic shared by the TCP and WebSocket transports."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.store = SessionStore(config.store_root)
        self.live: dict[str, _LiveSession] = {}

    # -- message dispatch ----------------------------------------------------

    async def handle(self, conn: Connection, raw_line: bytes | str) -> bool:
        """Process one inbound frame; returns False to close the connection."""
        try:
            msg = json.loads(raw_line)
            if not isinstance(msg, dict) or "type" not in msg:
                raise ProtocolError("frame must be an object with a type")
        except (json.JSONDecodeError, ProtocolError) as exc:
            await conn.send({"type": "error", "code": "ProtocolError",
                             "message": str(exc)})
            return False
        try:
            return await self._dispatch(conn, msg)
        except VersionMismatch as exc:
            await conn.send({"type": "error", "code": "VersionMismatch",
                             "message": str(exc)})
            return False
        except ProtocolError as exc:
            await self._abort_ingest(conn)
            await conn.send({"type": "error", "code": "ProtocolError",
                             "message": str(exc)})
            return False
        except NonMonotonicTimestamp as exc:
            await self._abort_ingest(conn)
            await conn.send({"type": "error", "code": "NonMonotonicTimestamp",
                             "message": str(exc)})
            return False
        except UnknownSession as exc:
            await conn.send({"type": "error", "code": "UnknownSession",
                             "message": str(exc)})
            return True
        except InvalidSpeed as exc:
            await conn.send({"type": "error", "code": "InvalidSpeed",
                             "message": str(exc)})
            return True

    async def _dispatch(self, conn: Connection, msg: dict) -> bool:
        mtype = msg["type"]
        if mtype not in CLIENT_TYPES:
            raise ProtocolError(f"unknown message type {mtype!r}")
        if mtype == "hello":
            if msg.get("version") != PROTOCOL_VERSION:
                raise VersionMismatch(
                    f"server speaks version {PROTOCOL_VERSION}")
            if self.config.token and msg.get("token") != self.config.token:
                raise ProtocolError("bad token")
            conn.hello_done = True
            await conn.send({"type": "hello", "version": PROTOCOL_VERSION,
                             "engine": _engine_version()})
            return True
        if not conn.hello_done:
            raise ProtocolError("hello required first")

        if mtype == "start_session":
            return await self._start_session(conn, msg)
        if mtype == "samples":
            return await self._samples(conn, msg)
        if mtype == "end_session":
            return await self._end_session(conn)
        if mtype == "subscribe":
            return await self._subscribe(conn, msg)
        if mtype == "replay_request":
            conn.spawn(self._replay(conn, msg))
            return True
        raise ProtocolError(f"unhandled message type {mtype!r}")

    async def _start_session(self, conn: Connection, msg: dict) -> bool:
        if conn.ingest_session is not None:
            raise ProtocolError("session already started on this connection")
        for key in ("session_id", "test_id"):
            if key not in msg:
                raise ProtocolError(f"start_session missing {key!r}")
        session_id = str(msg["session_id"])
        source = str(msg.get("source", "digital-paper"))
        if source not in SOURCES:
            raise ProtocolError(f"unknown source {source!r}")
        template = None
        if msg.get("template") is not None:
            try:
                template = template_from_json(msg["template"])
            except ValueError as exc:
                raise ProtocolError(str(exc)) from exc
        page = msg.get("page") or {}
        tt = msg.get("target_time") or [11, 10]
        self.store.open_log(session_id)
        pipeline = IncrementalPipeline(
            session_id=session_id,
            test_id=str(msg["test_id"]),
            subject_pseudonym=str(msg.get("subject_pseudonym", "anon")),
            page=PageSize(float(page.get("w_mm", 210.0)),
                          float(page.get("h_mm", 297.0))),
            source=source,
            template=template,
            target_time=(int(tt[0]), int(tt[1])),
            config=self.config.engine,
        )
        record = {
            "type": "start_session",
            "session_id": session_id,
            "test_id": str(msg["test_id"]),
            "subject_pseudonym": str(msg.get("subject_pseudonym", "anon")),
            "page": {"w_mm": pipeline.page.w_mm, "h_mm": pipeline.page.h_mm},
            "source": source,
            "template": template_to_json(template) if template else None,
            "target_time": [pipeline.target_time[0], pipeline.target_time[1]],
        }
        self.store.append_raw(session_id, record)
        self.live[session_id] = _LiveSession(pipeline, records=[record])
        conn.ingest_session = session_id
        return True

    async def _samples(self, conn: Connection, msg: dict) -> bool:
        sid = conn.ingest_session
        if sid is None:
            raise ProtocolError("samples before start_session")
        live = self.live[sid]
        try:
            samples = [sample_from_wire(s) for s in msg.get("samples", [])]
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"malformed sample: {exc}") from exc
        seq = msg.get("seq")
        record = {"type": "samples", "seq": seq,
                  "samples": [sample_to_wire(s) for s in samples]}
        # persist before processing so every acknowledged batch is on disk
        self.store.append_raw(sid, record)
        live.records.append(record)
        events = live.pipeline.feed_batch(samples)
        await self._emit(conn, live, sid, events, ack_seq=seq)
        return True

    async def _end_session(self, conn: Connection) -> bool:
        sid = conn.ingest_session
        if sid is None:
            raise ProtocolError("end_session before start_session")
        live = self.live[sid]
        record = {"type": "end_session"}
        self.store.append_raw(sid, record)
        live.records.append(record)
        events = live.pipeline.finish()
        await self._emit(conn, live, sid, events)

        derived = derive_from_raw(live.records, self.config)
        self.store.finalize(sid, derived_json_bytes(derived),
                            graph_bytes(derived))
        self.store.close_log(sid)
        summary = {
            "type": "session_summary",
            "session_id": sid,
            "summary": derived_to_dict(derived)["summary"],
            "document": derived.document.values,
            "suggestions": [dataclasses.asdict(s) for s in derived.suggestions],
        }
        await conn.send(summary)
        await self._broadcast(live, summary)
        live.done = True
        del self.live[sid]
        conn.ingest_session = None
        return True

    async def _abort_ingest(self, conn: Connection) -> None:
        sid = conn.ingest_session
        if sid is None:
            return
        # keep the raw log up to the fault; no derived artifacts
        self.store.close_log(sid)
        live = self.live.pop(sid, None)
        conn.ingest_session = None
        if live is not None:
            await self._broadcast(live, {
                "type": "error", "code": "SessionAborted",
                "message": f"ingest for {sid!r} ended before end_session",
                "session_id": sid,
            })

    async def _emit(self, conn: Connection, live: _LiveSession, sid: str,
                    events, ack_seq=None) -> None:
        for ev in events:
            payload = dict(ev.payload) if ev.type != "feature_update" else {
                "document": ev.payload}
            out = {"type": ev.type, "session_id": sid, **payload}
            if ev.type == "feature_update" and ack_seq is not None:
                out["seq"] = ack_seq
            await conn.send(out)
            await self._broadcast(live, out)

    async def _broadcast(self, live: _LiveSession, msg: dict) -> None:
        for sub in list(live.subscribers):
            try:
                await sub.send(msg)
            except Exception:
                live.subscribers.remove(sub)

    async def _subscribe(self, conn: Connection, msg: dict) -> bool:
        sid = str(msg.get("session_id", ""))
        if sid in self.live:
            self.live[sid].subscribers.append(conn)
            return True
        # completed sessions answer from the store with their summary
        derived = self.store.load_derived(sid)
        if derived is not None:
            await conn.send({
                "type": "session_summary",
                "session_id": sid,
                "summary": derived["summary"],
                "document": derived["features"]["document"],
                "suggestions": derived["suggestions"],
            })
            return True
        raise UnknownSession(sid)

    # -- replay ---------------------------------------------------------------

    async def _replay(self, conn: Connection, msg: dict) -> None:
        try:
            sid = str(msg.get("session_id", ""))
            speed = float(msg.get("speed_factor", 1.0))
            if speed <= 0:
                raise InvalidSpeed(f"speed_factor must be positive, got {speed}")
            records = self.store.load_raw(sid)
            derived = self.store.load_derived(sid)
            from_t = msg.get("from_t")
            to_t = msg.get("to_t")
            samples = []
            for r in records:
                if r.get("type") == "samples":
                    samples.extend(r.get("samples", []))
            if from_t is not None:
                samples = [s for s in samples if s["t"] >= from_t]
            if to_t is not None:
                samples = [s for s in samples if s["t"] <= to_t]

            if derived:
                for sug in derived.get("suggestions", []):
                    await conn.send({"type": "replay_suggestion",
                                     "session_id": sid, **sug})
            if samples:
                loop = asyncio.get_running_loop()
                wall_start = loop.time()
                t0 = samples[0]["t"]
                for s in samples:
                    target = wall_start + (s["t"] - t0) / 1e6 / speed
                    delay = target - loop.time()
                    if delay > 0:
                        await asyncio.sleep(delay)
                    await conn.send({"type": "replay_event", "session_id": sid,
                                     **s})
            await conn.send({"type": "replay_event", "session_id": sid,
                             "end": True})
        except UnknownSession as exc:
            await conn.send({"type": "error", "code": "UnknownSession",
                             "message": str(exc)})
        except InvalidSpeed as exc:
            await conn.send({"type": "error", "code": "InvalidSpeed",
                             "message": str(exc)})
        except asyncio.CancelledError:
            raise
        except Exception as exc:  # surface unexpected replay failures inline
            await conn.send({"type": "error", "code": "ReplayError",
                             "message": str(exc)})


def _engine_version() -> str:
    from . import ENGINE_VERSION
    return ENGINE_VERSION


# ---------------------------------------------------------------------------
# transports

async def _handle_tcp(service: SessionService, reader: asyncio.StreamReader,
                      writer: asyncio.StreamWriter) -> None:
    sock = writer.get_extra_info("socket")
    if sock is not None:
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)

    async def send_bytes(data: bytes) -> None:
        writer.write(data)
        await writer.drain()

    conn = Connection(send_bytes)
    try:
        while True:
            line = await reader.readline()
            if not line:
                break
            if not line.strip():
                continue
            if not await service.handle(conn, line):
                break
    except (ConnectionResetError, BrokenPipeError):
        pass
    finally:
        await service_conn_cleanup(service, conn)
        writer.close()
        try:
            await writer.wait_closed()
        except (ConnectionResetError, BrokenPipeError):
            pass


async def service_conn_cleanup(service: SessionService, conn: Connection) -> None:
    for task in list(conn.tasks):
        task.cancel()
    for live in service.live.values():
        if conn in live.subscribers:
            live.subscribers.remove(conn)
    if conn.ingest_session is not None:
        # connection dropped mid-session: raw log stays for offline rebuild
        await service._abort_ingest(conn)


async def serve_tcp(service: SessionService, host: str, port: int):
    return await asyncio.start_server(
        lambda r, w: _handle_tcp(service, r, w), host, port)


# WebSocket binding + store-backed HTTP endpoints (one port)

async def _handle_ws(service: SessionService, websocket) -> None:
    async def send_bytes(data: bytes) -> None:
        await websocket.send(data.decode("utf-8").rstrip("\n"))

    conn = Connection(send_bytes)
    try:
        async for frame in websocket:
            if not await service.handle(conn, frame):
                break
    finally:
        await service_conn_cleanup(service, conn)


_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".map": "application/json",
    ".json": "application/json",
}


def _http_response(connection, request, service: SessionService):
    from websockets.http11 import Response
    from websockets.datastructures import Headers

    path = request.path.split("?")[0]
    if path == "/ws":
        return None  # proceed with the WebSocket handshake

    def respond(status: int, body: bytes, content_type: str) -> "Response":
        headers = Headers([("Content-Type", content_type),
                           ("Content-Length", str(len(body))),
                           ("Access-Control-Allow-Origin", "*")])
        reason = {200: "OK", 404: "Not Found"}.get(status, "")
        return Response(status, reason, headers, body)

    def json_response(status: int, obj) -> "Response":
        body = (json.dumps(obj, sort_keys=True) + "\n").encode("utf-8")
        return respond(status, body, "application/json")

    if path == "/sessions":
        return json_response(200, {"sessions": service.store.list_sessions()})
    m = re.fullmatch(r"/sessions/([A-Za-z0-9._-]+)/summary", path)
    if m:
        derived = service.store.load_derived(m.group(1))
        if derived is None:
            return json_response(404, {"error": "unknown session"})
        return json_response(200, {
            "summary": derived["summary"],
            "document": derived["features"]["document"],
            "suggestions": derived["suggestions"],
            "groups": derived["groups"],
        })

    if service.config.dashboard_root:
        root = Path(service.config.dashboard_root).resolve()
        target = "public/index.html" if path == "/" else path.lstrip("/")
        candidate = (root / target).resolve()
        if candidate.is_relative_to(root) and candidate.is_file():
            ctype = _CONTENT_TYPES.get(candidate.suffix, "application/octet-stream")
            return respond(200, candidate.read_bytes(), ctype)

    return json_response(404, {"error": "not found"})


async def serve_ws(service: SessionService, host: str, port: int):
    import websockets.asyncio.server as ws_server

    return await ws_server.serve(
        lambda websocket: _handle_ws(service, websocket), host, port,
        process_request=lambda conn, req: _http_response(conn, req, service))


async def run_service(config: ServiceConfig, *, ready_event=None,
                      stop_event=None) -> None:
    """Run both transports until stop_event (or cancellation)."""
    service = SessionService(config)
    tcp = await serve_tcp(service, config.host, config.tcp_port)
    ws = await serve_ws(service, config.host, config.ws_port)
    if ready_event is not None:
        ready_event.set()
    try:
        if stop_event is not None:
            await stop_event.wait()
        else:
            await asyncio.Event().wait()
    finally:
        tcp.close()
        await tcp.wait_closed()
        ws.close()
        await ws.wait_closed()
