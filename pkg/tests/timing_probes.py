"""Wall-clock timing probes, run in fresh interpreters so suite state
and allocator history cannot pollute the measurement. The service runs
in its own process and the scripted client measures across the process
boundary, mirroring a real deployment.

Usage: python timing_probes.py replay|latency <store_dir>
Prints one JSON object with the measured statistics.
"""

import asyncio
import gc
import json
import subprocess
import sys

from inkassess.client import ProtocolClient
from inkassess.model import InkSession, RawSample

_SERVER_SNIPPET = """
import asyncio, gc, sys
from inkassess.config import ServiceConfig
from inkassess.service import SessionService, serve_tcp

async def main():
    gc.collect(); gc.freeze(); gc.disable()
    service = SessionService(ServiceConfig(store_root=sys.argv[1]))
    server = await serve_tcp(service, "127.0.0.1", 0)
    print(server.sockets[0].getsockname()[1], flush=True)
    await asyncio.Event().wait()

asyncio.run(main())
"""


class _ServerProcess:
    def __enter__(self):
        self.proc = subprocess.Popen(
            [sys.executable, "-c", _SERVER_SNIPPET, self.store_dir],
            stdout=subprocess.PIPE, text=True)
        self.port = int(self.proc.stdout.readline())
        return self

    def __init__(self, store_dir: str):
        self.store_dir = store_dir

    def __exit__(self, *exc):
        self.proc.terminate()
        self.proc.wait(timeout=10)


def short_session_samples():
    samples = []
    t = 0
    for stroke in range(3):
        x0 = 20.0 + stroke * 30
        for i in range(25):
            samples.append(RawSample(t, x0 + i, 40.0, 0.5, True))
            t += 40_000  # 25 Hz
        samples.append(RawSample(t, x0 + 25, 40.0, 0.0, False))
        t += 400_000
    return samples[:-1]


async def replay_probe(store_dir: str) -> dict:
    samples = short_session_samples()
    session = InkSession.from_samples(samples, session_id="timing",
                                      test_id="CDT")
    with _ServerProcess(store_dir) as server:
        async with ProtocolClient("127.0.0.1", server.port) as client:
            await client.hello()
            await client.ingest_session(session, batch_size=500)
        async with ProtocolClient("127.0.0.1", server.port) as client:
            await client.hello()
            events = []
            async for wall, msg in client.replay("timing", 0.5):
                if msg["type"] == "replay_event" and not msg.get("end"):
                    events.append((wall, msg["t"]))

    wall0, t0 = events[0]
    worst = max(abs((wall - wall0) - (t - t0) / 1e6 / 0.5)
                for wall, t in events)
    return {"worst_ms": worst * 1e3, "events": len(events),
            "expected_events": len(samples)}


async def latency_probe(store_dir: str) -> dict:
    def batch_at(i: int) -> dict:
        contact = (i % 200) < 190
        return {"type": "samples", "seq": i, "samples": [
            {"t": i * 5000, "x": 20.0 + (i % 200) * 0.3,
             "y": 50.0 + (i // 200) * 10.0,
             "p": 0.5 if contact else 0.0, "c": contact}]}

    async def stream(client, session_id: str, total: int) -> dict:
        latencies = {}
        sent = {}
        loop = asyncio.get_running_loop()
        await client.start_session(session_id, "CDT")

        async def receiver():
            got = 0
            while got < total:
                msg = await client.recv(timeout=15)
                if msg.get("type") == "feature_update":
                    seq = msg.get("seq")
                    if seq is not None:
                        latencies[seq] = loop.time() - sent[seq]
                        got += 1

        recv_task = loop.create_task(receiver())
        start = loop.time()
        for i in range(total):
            target = start + i * 0.005
            delay = target - loop.time()
            if delay > 0:
                await asyncio.sleep(delay)
            sent[i] = loop.time()
            await client.send(batch_at(i))
        await asyncio.wait_for(recv_task, timeout=30)
        await client.end_session()
        return latencies

    with _ServerProcess(store_dir) as server:
        async with ProtocolClient("127.0.0.1", server.port) as client:
            await client.hello()
            await stream(client, "latency-warmup", 250)
        async with ProtocolClient("127.0.0.1", server.port) as client:
            await client.hello()
            latencies = await stream(client, "latency", 1000)

    values = sorted(latencies.values())
    return {
        "p50_ms": values[len(values) // 2] * 1e3,
        "p99_ms": values[int(len(values) * 0.99)] * 1e3,
        "batches": len(values),
    }


def main() -> None:
    kind, store_dir = sys.argv[1], sys.argv[2]
    gc.collect()
    gc.freeze()
    gc.disable()
    probe = replay_probe if kind == "replay" else latency_probe
    print(json.dumps(asyncio.run(probe(store_dir))))


if __name__ == "__main__":
    main()
