"""Operator command line: analyze, score, synth, serve, replay, rebuild.

Exit codes: 0 ok, 1 runtime error (machine-readable JSON on stderr),
2 usage error.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import signal
import sys
import time
from pathlib import Path

from . import ENGINE_VERSION
from .battery import score_session, template_from_json, template_to_json
from .config import ServiceConfig, load_service_config
from .derive import derive_session
from .features import vectors_to_csv, vectors_to_json
from .model import load_inkjson, dump_inkjson
from .service import rebuild_session_dir, run_service
from .synth import GenParams, gen_test_session, manifest_to_json


def _parse_target_time(text: str) -> tuple[int, int]:
    hh, _, mm = text.partition(":")
    return int(hh), int(mm)


def _load_config(path: str | None) -> ServiceConfig:
    return load_service_config(path)


def cmd_analyze(args) -> int:
    config = _load_config(args.config)
    session = load_inkjson(args.ink)
    derived = derive_session(session, config=config.engine)
    vectors = [derived.document] + derived.stroke_vectors + derived.gap_vectors
    fmt = args.features or config.feature_export
    if fmt == "csv":
        text = vectors_to_csv(vectors)
    else:
        text = json.dumps(vectors_to_json(vectors), sort_keys=True, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_score(args) -> int:
    config = _load_config(args.config)
    session = load_inkjson(args.ink)
    template = template_from_json(
        json.loads(Path(args.template).read_text(encoding="utf-8")))
    target_time = _parse_target_time(args.target_time)
    score = score_session(session, template, target_time, config.engine)
    sys.stdout.write(json.dumps(score, sort_keys=True, indent=2) + "\n")
    return 0


def cmd_synth(args) -> int:
    params = GenParams(
        tremor_amp_mm=args.tremor_amp,
        tremor_freq_hz=args.tremor_freq,
        jitter_mm=args.jitter,
        trail_errors=args.trail_errors,
        inject_pause_s=args.inject_pause,
        inject_correction=args.inject_correction,
        target_time=_parse_target_time(args.target_time),
    )
    session, manifest = gen_test_session(args.test_id, params, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dump_inkjson(session, out / "ink.json")
    (out / "manifest.json").write_text(
        json.dumps(manifest_to_json(manifest), sort_keys=True, indent=2) + "\n",
        encoding="utf-8")
    (out / "template.json").write_text(
        json.dumps(template_to_json(manifest.template), sort_keys=True,
                   indent=2) + "\n", encoding="utf-8")
    sys.stdout.write(json.dumps({
        "session_id": session.session_id,
        "strokes": len(session.strokes),
        "samples": len(session.all_samples()),
        "out": str(out),
    }, sort_keys=True) + "\n")
    return 0


def cmd_serve(args) -> int:
    config = _load_config(args.config)

    async def main() -> None:
        stop = asyncio.Event()
        loop = asyncio.get_running_loop()
        for sig in (signal.SIGINT, signal.SIGTERM):
            loop.add_signal_handler(sig, stop.set)
        ready = asyncio.Event()
        sys.stderr.write(json.dumps({
            "serving": {"tcp": f"{config.host}:{config.tcp_port}",
                        "ws": f"{config.host}:{config.ws_port}",
                        "store": config.store_root,
                        "engine": ENGINE_VERSION}}) + "\n")
        await run_service(config, ready_event=ready, stop_event=stop)

    asyncio.run(main())
    return 0


def cmd_replay(args) -> int:
    config = _load_config(args.config)
    store = Path(config.store_root if args.store is None else args.store)
    session_dir = store / args.session_id
    raw_path = session_dir / "raw.jsonl"
    if not raw_path.exists():
        raise FileNotFoundError(f"unknown session {args.session_id!r}")
    if args.speed <= 0:
        raise ValueError(f"speed must be positive, got {args.speed}")
    samples = []
    with open(raw_path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                if rec.get("type") == "samples":
                    samples.extend(rec.get("samples", []))
    if args.from_t is not None:
        samples = [s for s in samples if s["t"] >= args.from_t]
    if args.to_t is not None:
        samples = [s for s in samples if s["t"] <= args.to_t]

    derived_path = session_dir / "derived.json"
    if derived_path.exists():
        derived = json.loads(derived_path.read_text(encoding="utf-8"))
        for sug in derived.get("suggestions", []):
            sys.stdout.write(json.dumps(
                {"type": "replay_suggestion", **sug}, sort_keys=True) + "\n")

    start = time.monotonic()
    t0 = samples[0]["t"] if samples else 0
    for s in samples:
        target = start + (s["t"] - t0) / 1e6 / args.speed
        delay = target - time.monotonic()
        if delay > 0:
            time.sleep(delay)
        sys.stdout.write(json.dumps(
            {"type": "replay_event",
             "at_s": round(time.monotonic() - start, 6), **s},
            sort_keys=True) + "\n")
        sys.stdout.flush()
    sys.stdout.write(json.dumps({"type": "replay_event", "end": True}) + "\n")
    return 0


def cmd_rebuild(args) -> int:
    config = _load_config(args.config)
    derived, graph = rebuild_session_dir(args.session_dir, config)
    sys.stdout.write(json.dumps({
        "rebuilt": str(args.session_dir),
        "derived_bytes": len(derived),
        "graph_bytes": len(graph),
    }, sort_keys=True) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="inkassess",
        description="Digital-ink cognitive assessment engine")
    parser.add_argument("--config", help="flat JSON config file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="feature matrix for an ink-json file")
    p.add_argument("ink")
    p.add_argument("--features", choices=["csv", "json"])
    p.add_argument("--out")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("score", help="score an ink-json file against a template")
    p.add_argument("ink")
    p.add_argument("--template", required=True)
    p.add_argument("--target-time", default="11:10")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("synth", help="generate a synthetic test session")
    p.add_argument("test_id")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--tremor-amp", type=float, default=0.0)
    p.add_argument("--tremor-freq", type=float, default=8.0)
    p.add_argument("--jitter", type=float, default=0.0)
    p.add_argument("--trail-errors", type=int, default=0)
    p.add_argument("--inject-pause", type=float, default=0.0)
    p.add_argument("--inject-correction", action="store_true")
    p.add_argument("--target-time", default="11:10")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("serve", help="run the live session service")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("replay", help="print a timed event log from the store")
    p.add_argument("session_id")
    p.add_argument("--speed", type=float, default=1.0)
    p.add_argument("--store")
    p.add_argument("--from-t", type=int, dest="from_t")
    p.add_argument("--to-t", type=int, dest="to_t")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("rebuild", help="regenerate derived artifacts from raw.jsonl")
    p.add_argument("session_dir")
    p.set_defaults(func=cmd_rebuild)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except KeyboardInterrupt:
        return 1
    except Exception as exc:
        sys.stderr.write(json.dumps({
            "error": {"type": type(exc).__name__, "message": str(exc)}
        }, sort_keys=True) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
