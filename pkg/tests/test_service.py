import asyncio

import numpy as np
import pytest

from inkassess.battery import template_to_json
from inkassess.client import ClientError, ProtocolClient
from inkassess.config import ServiceConfig
from inkassess.derive import suggest_replays
from inkassess.features import session_features
from inkassess.model import InkSession, RawSample, segment_strokes
from inkassess.pipeline import IncrementalPipeline
from inkassess.service import (
    ProtocolError,
    SessionService,
    SessionStore,
    rebuild_session_dir,
    serve_tcp,
)
from inkassess.synth import GenParams, gen_test_session

from util import sample


def _config(tmp_path) -> ServiceConfig:
    return ServiceConfig(store_root=str(tmp_path / "store"))


async def _start(tmp_path):
    service = SessionService(_config(tmp_path))
    server = await serve_tcp(service, "127.0.0.1", 0)
    port = server.sockets[0].getsockname()[1]
    return service, server, port


def run(coro):
    return asyncio.run(coro)


# --- incremental pipeline === batch -----------------------------------------

def _random_stream(seed):
    rng = np.random.default_rng(seed)
    samples = []
    t = 0
    for _ in range(int(rng.integers(1, 5))):
        for _ in range(int(rng.integers(1, 25))):
            contact = bool(rng.random() < 0.8)
            samples.append(RawSample(
                t, float(rng.uniform(0, 200)), float(rng.uniform(0, 290)),
                float(rng.uniform(0.2, 1)) if contact else 0.0, contact))
            t += int(rng.integers(1000, 30_000))
        t += int(rng.integers(0, 500_000))
    return samples


@pytest.mark.parametrize("seed", range(15))
def test_pipeline_segmentation_matches_batch(seed):
    samples = _random_stream(seed)
    pipe = IncrementalPipeline("p", "CDT")
    for s in samples:
        pipe._feed(s)
    pipe.finish()
    strokes, gaps = segment_strokes(samples)
    assert [st.samples for st in pipe.strokes] == [st.samples for st in strokes]
    assert pipe.gaps == gaps


def test_pipeline_features_equal_batch():
    session, _ = gen_test_session("CDT", GenParams(tremor_amp_mm=0.15), seed=5)
    samples = session.all_samples()
    pipe = IncrementalPipeline(session.session_id, "CDT",
                               page=session.page)
    for off in range(0, len(samples), 37):
        pipe.feed_batch(samples[off:off + 37])
    pipe.finish()
    doc_batch, stroke_batch, gap_batch = session_features(session)
    assert pipe.stroke_vectors == [v.values for v in stroke_batch]
    assert pipe.gap_vectors == [v.values for v in gap_batch]
    assert pipe.rolling_document() == doc_batch.values


# --- wire protocol ----------------------------------------------------------

def test_single_stroke_ingest_message_counts(tmp_path):
    async def main():
        service, server, port = await _start(tmp_path)
        try:
            async with ProtocolClient("127.0.0.1", port) as client:
                await client.hello()
                await client.start_session("one-stroke", "CDT")
                samples = [sample(i * 5000, 10 + i, 10.0) for i in range(20)]
                _, events = await client.send_batch(0, samples)
                summary, more = await client.end_session()
                events.extend(more)
            kinds = [e["type"] for e in events]
            assert kinds.count("stroke_completed") == 1
            assert kinds.count("classification") == 1
            assert summary["type"] == "session_summary"
        finally:
            server.close()
            await server.wait_closed()
    run(main())


def test_samples_before_start_rejected(tmp_path):
    async def main():
        service, server, port = await _start(tmp_path)
        try:
            async with ProtocolClient("127.0.0.1", port) as client:
                await client.hello()
                with pytest.raises(ClientError, match="ProtocolError"):
                    await client.send_batch(0, [sample(0, 1, 1)])
        finally:
            server.close()
            await server.wait_closed()
    run(main())


def test_unknown_message_type_rejected(tmp_path):
    async def main():
        service, server, port = await _start(tmp_path)
        try:
            async with ProtocolClient("127.0.0.1", port) as client:
                await client.hello()
                await client.send({"type": "frobnicate"})
                reply = await client.recv()
                assert reply["type"] == "error"
                assert reply["code"] == "ProtocolError"
        finally:
            server.close()
            await server.wait_closed()
    run(main())


def test_static_token_auth(tmp_path):
    async def main():
        service = SessionService(ServiceConfig(
            store_root=str(tmp_path / "store"), token="hunter2"))
        server = await serve_tcp(service, "127.0.0.1", 0)
        port = server.sockets[0].getsockname()[1]
        try:
            async with ProtocolClient("127.0.0.1", port) as client:
                with pytest.raises(ClientError, match="bad token"):
                    await client.hello()
            async with ProtocolClient("127.0.0.1", port) as client:
                reply = await client.hello(token="hunter2")
                assert reply["version"] == 1
        finally:
            server.close()
            await server.wait_closed()
    run(main())


def test_version_mismatch_rejected(tmp_path):
    async def main():
        service, server, port = await _start(tmp_path)
        try:
            async with ProtocolClient("127.0.0.1", port) as client:
                await client.send({"type": "hello", "version": 99})
                reply = await client.recv()
                assert reply["type"] == "error"
                assert reply["code"] == "VersionMismatch"
        finally:
            server.close()
            await server.wait_closed()
    run(main())


def test_non_monotonic_closes_session_but_keeps_log(tmp_path):
    async def main():
        service, server, port = await _start(tmp_path)
        try:
            async with ProtocolClient("127.0.0.1", port) as client:
                await client.hello()
                await client.start_session("bad-times", "CDT")
                await client.send_batch(0, [sample(t, 1, 1) for t in (0, 5000)])
                with pytest.raises(ClientError, match="NonMonotonicTimestamp"):
                    await client.send_batch(1, [sample(1000, 2, 2)])
            raw = service.store.load_raw("bad-times")
            assert [r["type"] for r in raw] == ["start_session", "samples",
                                                "samples"]
        finally:
            server.close()
            await server.wait_closed()
    run(main())


def test_duplicate_session_id_rejected(tmp_path):
    async def main():
        service, server, port = await _start(tmp_path)
        try:
            async with ProtocolClient("127.0.0.1", port) as client:
                await client.hello()
                await client.start_session("dup", "CDT")
                await client.send_batch(0, [sample(0, 1, 1), sample(5000, 2, 2)])
                await client.end_session()
            async with ProtocolClient("127.0.0.1", port) as client:
                await client.hello()
                await client.start_session("dup", "CDT")
                with pytest.raises(ClientError, match="already recorded"):
                    await client.send_batch(0, [sample(0, 1, 1)])
        finally:
            server.close()
            await server.wait_closed()
    run(main())


def test_subscriber_sees_pipeline_events_in_order(tmp_path):
    async def main():
        service, server, port = await _start(tmp_path)
        try:
            async with ProtocolClient("127.0.0.1", port) as feeder, \
                       ProtocolClient("127.0.0.1", port) as watcher:
                await feeder.hello()
                await watcher.hello()
                await feeder.start_session("watched", "CDT")
                await watcher.send({"type": "subscribe",
                                    "session_id": "watched"})
                session, _ = gen_test_session("CDT", GenParams(), seed=44)
                samples = session.all_samples()
                for seq, off in enumerate(range(0, len(samples), 100)):
                    await feeder.send_batch(seq, samples[off:off + 100])
                await feeder.end_session()
                seen = []
                while True:
                    msg = await watcher.recv(timeout=5)
                    seen.append(msg["type"])
                    if msg["type"] == "session_summary":
                        break
                assert seen.count("stroke_completed") == 15
                assert "classification" in seen
                first_stroke = seen.index("stroke_completed")
                first_class = seen.index("classification")
                assert first_stroke < first_class
        finally:
            server.close()
            await server.wait_closed()
    run(main())


def test_concurrent_sessions_are_isolated(tmp_path):
    async def main():
        service, server, port = await _start(tmp_path)
        try:
            async with ProtocolClient("127.0.0.1", port) as a, \
                       ProtocolClient("127.0.0.1", port) as b:
                await a.hello()
                await b.hello()
                await a.start_session("iso-a", "CDT")
                await b.start_session("iso-b", "CDT")
                a_events, b_events = [], []
                for i in range(3):
                    _, ev = await a.send_batch(i, [
                        sample(i * 100_000 + k * 5000, 10 + k, 10)
                        for k in range(5)])
                    a_events.extend(ev)
                    _, ev = await b.send_batch(i, [
                        sample(i * 100_000 + k * 5000, 100 + k, 100)
                        for k in range(5)])
                    b_events.extend(ev)
                summary_a, ev = await a.end_session()
                a_events.extend(ev)
                summary_b, ev = await b.end_session()
                b_events.extend(ev)
            assert all(e["session_id"] == "iso-a" for e in a_events)
            assert all(e["session_id"] == "iso-b" for e in b_events)
            assert summary_a["session_id"] == "iso-a"
            assert summary_b["session_id"] == "iso-b"
            assert sorted(service.store.list_sessions()) == ["iso-a", "iso-b"]
        finally:
            server.close()
            await server.wait_closed()
    run(main())


def test_subscribers_hear_about_aborted_ingest(tmp_path):
    async def main():
        service, server, port = await _start(tmp_path)
        try:
            async with ProtocolClient("127.0.0.1", port) as feeder, \
                       ProtocolClient("127.0.0.1", port) as watcher:
                await feeder.hello()
                await watcher.hello()
                await feeder.start_session("doomed", "CDT")
                await watcher.send({"type": "subscribe",
                                    "session_id": "doomed"})
                await feeder.send_batch(0, [sample(t, 1, 1)
                                            for t in (0, 5000)])
                with pytest.raises(ClientError):
                    await feeder.send_batch(1, [sample(1000, 2, 2)])
                while True:
                    msg = await watcher.recv(timeout=5)
                    if msg["type"] == "error":
                        assert msg["code"] == "SessionAborted"
                        break
        finally:
            server.close()
            await server.wait_closed()
    run(main())


# --- record / replay determinism --------------------------------------------

def _ingest(service_port_sessions, tmp_path, seeds):
    async def main():
        service, server, port = await _start(tmp_path)
        try:
            for seed in seeds:
                session, manifest = gen_test_session("CDT", GenParams(), seed=seed)
                async with ProtocolClient("127.0.0.1", port) as client:
                    await client.hello()
                    await client.ingest_session(
                        session, template_to_json(manifest.template),
                        batch_size=200)
            return service
        finally:
            server.close()
            await server.wait_closed()
    return run(main())


def test_reingest_reproduces_artifacts_byte_identically(tmp_path):
    service = _ingest(None, tmp_path, seeds=[70, 71])
    for sid in service.store.list_sessions():
        d = service.store.session_dir(sid)
        original_derived = (d / "derived.json").read_bytes()
        original_graph = (d / "graph.nt").read_bytes()
        rebuilt_derived, rebuilt_graph = rebuild_session_dir(
            d, _config(tmp_path))
        assert rebuilt_derived == original_derived
        assert rebuilt_graph == original_graph


# --- replay -----------------------------------------------------------------

def _record_one(tmp_path, *, rate_hz=25.0, seed=90):
    async def main():
        service, server, port = await _start(tmp_path)
        try:
            session, _ = gen_test_session(
                "CDT", GenParams(rate_hz=rate_hz, inter_symbol_pause_s=0.25),
                seed=seed, session_id="replayed")
            async with ProtocolClient("127.0.0.1", port) as client:
                await client.hello()
                await client.ingest_session(session, batch_size=500)
            return service, session
        finally:
            server.close()
            await server.wait_closed()
    return run(main())


def test_replay_window_filter_exact(tmp_path):
    service, session = _record_one(tmp_path)
    samples = session.all_samples()
    t1 = samples[len(samples) // 4].t
    t2 = samples[len(samples) // 2].t

    async def main():
        server = await serve_tcp(service, "127.0.0.1", 0)
        port = server.sockets[0].getsockname()[1]
        try:
            async with ProtocolClient("127.0.0.1", port) as client:
                await client.hello()
                got = []
                async for _, msg in client.replay("replayed", 50.0,
                                                  from_t=t1, to_t=t2):
                    if msg["type"] == "replay_event" and not msg.get("end"):
                        got.append(msg["t"])
            want = [s.t for s in samples if t1 <= s.t <= t2]
            assert got == want
        finally:
            server.close()
            await server.wait_closed()
    run(main())


def test_subscribe_to_stored_session_returns_summary(tmp_path):
    service, _ = _record_one(tmp_path)

    async def main():
        server = await serve_tcp(service, "127.0.0.1", 0)
        port = server.sockets[0].getsockname()[1]
        try:
            async with ProtocolClient("127.0.0.1", port) as client:
                await client.hello()
                await client.send({"type": "subscribe",
                                   "session_id": "replayed"})
                msg, _ = await client.recv_until("session_summary")
                assert msg["summary"]["test_id"] == "CDT"
                assert msg["summary"]["session_id"] == "replayed"
                assert msg["document"]["stroke_count"] > 0
        finally:
            server.close()
            await server.wait_closed()
    run(main())


def test_replay_unknown_session(tmp_path):
    async def main():
        service, server, port = await _start(tmp_path)
        try:
            async with ProtocolClient("127.0.0.1", port) as client:
                await client.hello()
                with pytest.raises(ClientError, match="UnknownSession"):
                    async for _ in client.replay("nope", 1.0):
                        pass
        finally:
            server.close()
            await server.wait_closed()
    run(main())


def test_replay_invalid_speed(tmp_path):
    service, _ = _record_one(tmp_path)

    async def main():
        server = await serve_tcp(service, "127.0.0.1", 0)
        port = server.sockets[0].getsockname()[1]
        try:
            async with ProtocolClient("127.0.0.1", port) as client:
                await client.hello()
                with pytest.raises(ClientError, match="InvalidSpeed"):
                    async for _ in client.replay("replayed", 0.0):
                        pass
        finally:
            server.close()
            await server.wait_closed()
    run(main())


# --- replay suggestions -----------------------------------------------------

def test_clean_fast_session_has_no_suggestions():
    session, _ = gen_test_session("CDT", GenParams(), seed=95)
    assert suggest_replays(session) == []


def test_long_pause_suggestion_covers_injected_pause():
    session, manifest = gen_test_session(
        "CDT", GenParams(inject_pause_s=5.0), seed=96)
    suggestions = suggest_replays(session)
    pauses = [s for s in suggestions if s.reason == "long_pause"]
    assert len(pauses) == 1
    want = manifest.pauses[0]
    assert pauses[0].start_us == want["start_us"]
    assert pauses[0].end_us == want["end_us"]


def test_correction_suggestion_for_overdraw():
    session, manifest = gen_test_session(
        "CDT", GenParams(inject_correction=True), seed=97)
    suggestions = suggest_replays(session)
    corrections = [s for s in suggestions if s.reason == "correction"]
    assert len(corrections) == 1
    want = manifest.corrections[0]
    assert corrections[0].evidence["stroke"] == want["stroke"]
    assert corrections[0].evidence["earlier_stroke"] == want["earlier_stroke"]
    assert corrections[0].start_us == want["start_us"]


def test_high_tremor_suggestion():
    session, manifest = gen_test_session("CDT", GenParams(), seed=98)
    # redraw with one very tremulous stroke: regenerate contour separately
    samples = []
    for st in session.strokes:
        samples.extend(st.samples)
        last = st.samples[-1]
        samples.append(RawSample(last.t + 1000, last.x, last.y, 0.0, False))
    shaky, _ = gen_test_session(
        "CDT", GenParams(tremor_amp_mm=0.8, tremor_freq_hz=8.0,
                         speed_mm_s=25.0), seed=98)
    mixed = list(shaky.strokes[0].samples)
    offset = mixed[-1].t + 1000
    mixed.append(RawSample(offset, mixed[-1].x, mixed[-1].y, 0.0, False))
    rest = [RawSample(s.t + offset + 500_000, s.x, s.y, s.pressure, s.contact)
            for s in samples]
    combined = InkSession.from_samples(mixed + rest, session_id="shk",
                                       test_id="CDT", page=session.page)
    suggestions = suggest_replays(combined)
    tremors = [s for s in suggestions if s.reason == "high_tremor"]
    assert len(tremors) >= 1
    assert tremors[0].start_us == combined.strokes[0].start_t


# --- HTTP endpoints over the WebSocket port ----------------------------------

def test_http_endpoints_and_static_dashboard(tmp_path):
    import httpx

    from inkassess.service import serve_ws

    dash = tmp_path / "dash" / "public"
    dash.mkdir(parents=True)
    (dash / "index.html").write_text("<html><body>dash</body></html>")

    service, _ = _record_one(tmp_path)
    service.config = ServiceConfig(store_root=str(tmp_path / "store"),
                                   dashboard_root=str(tmp_path / "dash"))

    async def main():
        server = await serve_ws(service, "127.0.0.1", 0)
        port = server.sockets[0].getsockname()[1]
        base = f"http://127.0.0.1:{port}"
        try:
            async with httpx.AsyncClient() as http:
                listing = (await http.get(f"{base}/sessions")).json()
                assert listing == {"sessions": ["replayed"]}
                summary = await http.get(f"{base}/sessions/replayed/summary")
                assert summary.status_code == 200
                body = summary.json()
                assert body["summary"]["test_id"] == "CDT"
                assert "document" in body and "groups" in body
                missing = await http.get(f"{base}/sessions/nope/summary")
                assert missing.status_code == 404
                page = await http.get(f"{base}/")
                assert page.status_code == 200
                assert "dash" in page.text
                escape = await http.get(f"{base}/../secrets")
                assert escape.status_code == 404
        finally:
            server.close()
            await server.wait_closed()
    run(main())


# --- store ------------------------------------------------------------------

def test_store_rejects_bad_session_ids(tmp_path):
    store = SessionStore(tmp_path / "s")
    with pytest.raises(ProtocolError):
        store.open_log("../escape")
    with pytest.raises(ProtocolError):
        store.open_log("has space")
