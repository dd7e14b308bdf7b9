#!/usr/bin/env python3
"""Scripted protocol client: measure sample-ingest -> feature_update
latency against a running service.

Usage: python scripts/latency_probe.py [host] [tcp_port] [seconds]
(defaults 127.0.0.1 8700 5; start one with `inkassess serve`)
"""

import asyncio
import sys

from inkassess.client import ProtocolClient
from inkassess.model import RawSample
from inkassess.service import sample_to_wire


async def main() -> None:
    host = sys.argv[1] if len(sys.argv) > 1 else "127.0.0.1"
    port = int(sys.argv[2]) if len(sys.argv) > 2 else 8700
    seconds = float(sys.argv[3]) if len(sys.argv) > 3 else 5.0
    total = int(seconds * 200)

    async with ProtocolClient(host, port) as client:
        await client.hello()
        await client.start_session(f"latency-probe-{asyncio.get_event_loop().time():.0f}".replace(".", ""), "CDT")
        loop = asyncio.get_running_loop()
        sent: dict[int, float] = {}
        latencies: dict[int, float] = {}

        async def receiver():
            while len(latencies) < total:
                msg = await client.recv(timeout=15)
                if msg.get("type") == "feature_update" and msg.get("seq") is not None:
                    latencies[msg["seq"]] = loop.time() - sent[msg["seq"]]

        recv_task = loop.create_task(receiver())
        start = loop.time()
        for i in range(total):
            target = start + i * 0.005
            delay = target - loop.time()
            if delay > 0:
                await asyncio.sleep(delay)
            contact = (i % 200) < 190
            s = RawSample(i * 5000, 20.0 + (i % 200) * 0.3,
                          50.0 + (i // 200) * 5.0,
                          0.5 if contact else 0.0, contact)
            sent[i] = loop.time()
            await client.send({"type": "samples", "seq": i,
                               "samples": [sample_to_wire(s)]})
        await asyncio.wait_for(recv_task, timeout=30)
        await client.end_session()

    values = sorted(latencies.values())
    def pct(p):
        return values[min(len(values) - 1, int(len(values) * p))] * 1e3
    print(f"{len(values)} batches at 200 Hz: "
          f"p50 {pct(0.50):.2f}ms  p90 {pct(0.90):.2f}ms  "
          f"p99 {pct(0.99):.2f}ms  max {values[-1] * 1e3:.2f}ms")


if __name__ == "__main__":
    asyncio.run(main())
