// Scripted stand-in for the session service: speaks the same protocol
// over an in-process socket pair and emits recorded event streams with
// real wall-clock pacing, exactly as the service does for replays.

import type { ProtocolMessage, WireSocket } from "../src/protocol.js";

export interface RecordedSample {
  t: number; // microseconds
  x: number;
  y: number;
  p: number;
  c: boolean;
}

export interface ScriptedStream {
  /** messages pushed (in order, immediately) after a subscribe */
  liveEvents?: ProtocolMessage[];
  /** raw samples replayed with (t - t0) / speed pacing */
  recording?: RecordedSample[];
  suggestions?: ProtocolMessage[];
  sessionId: string;
}

export class MockSocket implements WireSocket {
  onopen: (() => void) | null = null;
  onmessage: ((ev: { data: string }) => void) | null = null;
  onclose: (() => void) | null = null;
  onerror: (() => void) | null = null;
  closed = false;

  constructor(private service: ScriptedService) {}

  send(data: string): void {
    if (this.closed) return;
    const msg = JSON.parse(data) as ProtocolMessage;
    this.service.receive(this, msg);
  }

  close(): void {
    this.dropped();
  }

  /** service -> client delivery, asynchronously like a real socket */
  deliver(msg: ProtocolMessage): void {
    if (this.closed) return;
    setTimeout(() => {
      if (!this.closed) this.onmessage?.({ data: JSON.stringify(msg) });
    }, 0);
  }

  dropped(): void {
    if (this.closed) return;
    this.closed = true;
    setTimeout(() => this.onclose?.(), 0);
  }
}

export class ScriptedService {
  sockets: MockSocket[] = [];
  subscribeCount = 0;
  private timers: ReturnType<typeof setTimeout>[] = [];

  constructor(private stream: ScriptedStream) {}

  makeSocket(): MockSocket {
    const socket = new MockSocket(this);
    this.sockets.push(socket);
    setTimeout(() => socket.onopen?.(), 0);
    return socket;
  }

  receive(socket: MockSocket, msg: ProtocolMessage): void {
    switch (msg.type) {
      case "hello":
        socket.deliver({ type: "hello", version: 1, engine: "scripted" });
        break;
      case "subscribe": {
        this.subscribeCount += 1;
        for (const ev of this.stream.liveEvents ?? []) {
          socket.deliver({ ...ev, session_id: this.stream.sessionId });
        }
        break;
      }
      case "replay_request": {
        const speed = msg.speed_factor as number;
        if (!(speed > 0)) {
          socket.deliver({ type: "error", code: "InvalidSpeed",
                           message: String(speed) });
          return;
        }
        const fromT = msg.from_t as number | undefined;
        const toT = msg.to_t as number | undefined;
        let samples = this.stream.recording ?? [];
        if (fromT !== undefined) samples = samples.filter(s => s.t >= fromT);
        if (toT !== undefined) samples = samples.filter(s => s.t <= toT);
        for (const sug of this.stream.suggestions ?? []) {
          socket.deliver({ ...sug, session_id: this.stream.sessionId });
        }
        const t0 = samples.length ? samples[0].t : 0;
        for (const s of samples) {
          const delayMs = (s.t - t0) / 1000 / speed;
          this.timers.push(setTimeout(() => {
            socket.deliver({ type: "replay_event",
                             session_id: this.stream.sessionId, ...s });
          }, delayMs));
        }
        const endDelay = samples.length
          ? (samples[samples.length - 1].t - t0) / 1000 / speed + 1 : 1;
        this.timers.push(setTimeout(() => {
          socket.deliver({ type: "replay_event",
                           session_id: this.stream.sessionId, end: true });
        }, endDelay));
        break;
      }
      default:
        break;
    }
  }

  dropAll(): void {
    for (const socket of this.sockets) socket.dropped();
  }

  stop(): void {
    for (const timer of this.timers) clearTimeout(timer);
  }
}

export function waitFor(predicate: () => boolean,
                        timeoutMs = 5000): Promise<void> {
  return new Promise((resolve, reject) => {
    const start = Date.now();
    const tick = () => {
      if (predicate()) return resolve();
      if (Date.now() - start > timeoutMs) {
        return reject(new Error("waitFor timed out"));
      }
      setTimeout(tick, 2);
    };
    tick();
  });
}
