"""Scripted NDJSON protocol client (TCP) for ingest, replay and probes."""

from __future__ import annotations

import asyncio
import json
import socket
import time

from .model import InkSession, RawSample
from .service import PROTOCOL_VERSION, encode_frame, sample_to_wire


class ClientError(RuntimeError):
    pass


class ProtocolClient:
    def __init__(self, host: str, port: int):
        self.host = host
        self.port = port
        self.reader: asyncio.StreamReader | None = None
        self.writer: asyncio.StreamWriter | None = None

    async def __aenter__(self) -> "ProtocolClient":
        await self.connect()
        return self

    async def __aexit__(self, *exc) -> None:
        await self.close()

    async def connect(self) -> None:
        self.reader, self.writer = await asyncio.open_connection(
            self.host, self.port)
        sock = self.writer.get_extra_info("socket")
        if sock is not None:
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)

    async def close(self) -> None:
        if self.writer is not None:
            self.writer.close()
            try:
                await self.writer.wait_closed()
            except (ConnectionResetError, BrokenPipeError):
                pass

    async def send(self, obj: dict) -> None:
        assert self.writer is not None
        self.writer.write(encode_frame(obj))
        await self.writer.drain()

    async def recv(self, timeout: float = 10.0) -> dict:
        assert self.reader is not None
        line = await asyncio.wait_for(self.reader.readline(), timeout)
        if not line:
            raise ClientError("connection closed")
        return json.loads(line)

    async def recv_until(self, mtype: str, timeout: float = 10.0) -> tuple[dict, list[dict]]:
        """Wait for a message of the given type; returns (it, skipped)."""
        skipped = []
        deadline = time.monotonic() + timeout
        while True:
            msg = await self.recv(max(0.01, deadline - time.monotonic()))
            if msg.get("type") == "error":
                raise ClientError(f"{msg.get('code')}: {msg.get('message')}")
            if msg.get("type") == mtype:
                return msg, skipped
            skipped.append(msg)

    async def hello(self, token: str = "") -> dict:
        msg: dict = {"type": "hello", "version": PROTOCOL_VERSION}
        if token:
            msg["token"] = token
        await self.send(msg)
        reply, _ = await self.recv_until("hello")
        return reply

    async def start_session(self, session_id: str, test_id: str,
                            subject_pseudonym: str = "anon",
                            page: tuple[float, float] = (210.0, 297.0),
                            source: str = "digital-paper",
                            template: dict | None = None,
                            target_time: tuple[int, int] | None = None) -> None:
        msg = {
            "type": "start_session",
            "session_id": session_id,
            "test_id": test_id,
            "subject_pseudonym": subject_pseudonym,
            "page": {"w_mm": page[0], "h_mm": page[1]},
            "source": source,
            "template": template,
        }
        if target_time is not None:
            msg["target_time"] = list(target_time)
        await self.send(msg)

    async def send_batch(self, seq: int, samples: list[RawSample],
                         timeout: float = 10.0) -> tuple[dict, list[dict]]:
        """Send one samples batch and wait for its feature_update ack."""
        await self.send({"type": "samples", "seq": seq,
                         "samples": [sample_to_wire(s) for s in samples]})
        skipped: list[dict] = []
        deadline = time.monotonic() + timeout
        while True:
            msg = await self.recv(max(0.01, deadline - time.monotonic()))
            if msg.get("type") == "error":
                raise ClientError(f"{msg.get('code')}: {msg.get('message')}")
            if msg.get("type") == "feature_update" and msg.get("seq") == seq:
                return msg, skipped
            skipped.append(msg)

    async def end_session(self, timeout: float = 30.0) -> tuple[dict, list[dict]]:
        await self.send({"type": "end_session"})
        return await self.recv_until("session_summary", timeout)

    async def ingest_session(self, session: InkSession,
                             template: dict | None = None,
                             target_time: tuple[int, int] | None = None,
                             batch_size: int = 50) -> tuple[dict, list[dict]]:
        """Stream a whole session in batches; returns (summary, events)."""
        await self.start_session(
            session.session_id, session.test_id, session.subject_pseudonym,
            (session.page.w_mm, session.page.h_mm), session.source,
            template, target_time)
        events: list[dict] = []
        samples = session.all_samples()
        for seq, off in enumerate(range(0, len(samples), batch_size)):
            _, skipped = await self.send_batch(seq, samples[off:off + batch_size])
            events.extend(skipped)
        summary, skipped = await self.end_session()
        events.extend(skipped)
        return summary, events

    async def replay(self, session_id: str, speed_factor: float = 1.0,
                     from_t: int | None = None, to_t: int | None = None,
                     timeout: float = 120.0):
        """Request a replay; yields (wall_clock_s, message) pairs."""
        msg: dict = {"type": "replay_request", "session_id": session_id,
                     "speed_factor": speed_factor}
        if from_t is not None:
            msg["from_t"] = from_t
        if to_t is not None:
            msg["to_t"] = to_t
        await self.send(msg)
        deadline = time.monotonic() + timeout
        while True:
            reply = await self.recv(max(0.01, deadline - time.monotonic()))
            if reply.get("type") == "error":
                raise ClientError(f"{reply.get('code')}: {reply.get('message')}")
            yield time.monotonic(), reply
            if reply.get("type") == "replay_event" and reply.get("end"):
                return
