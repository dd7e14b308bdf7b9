// NDJSON protocol over a WebSocket binding: one JSON object per text
// frame, mirroring the TCP line protocol of the session service.

export const PROTOCOL_VERSION = 1;

export interface ProtocolMessage {
  type: string;
  session_id?: string;
  [key: string]: unknown;
}

export interface StrokeCompletedMsg extends ProtocolMessage {
  type: "stroke_completed";
  stroke_index: number;
  points: [number, number][];
  features: Record<string, number>;
  document: Record<string, number>;
}

export interface ClassificationMsg extends ProtocolMessage {
  type: "classification";
  group_id: number;
  label: string;
  confidence: number;
  stroke_indices: number[];
  bbox: [number, number, number, number];
  evidence: Record<string, number>;
}

export interface ScoreUpdateMsg extends ProtocolMessage {
  type: "score_update";
  score: Record<string, unknown>;
}

export interface FeatureUpdateMsg extends ProtocolMessage {
  type: "feature_update";
  seq?: number;
  document: Record<string, number>;
}

export interface ReplayEventMsg extends ProtocolMessage {
  type: "replay_event";
  end?: boolean;
  t?: number;
  x?: number;
  y?: number;
  p?: number;
  c?: boolean;
}

export interface ReplaySuggestionMsg extends ProtocolMessage {
  type: "replay_suggestion";
  reason: string;
  start_us: number;
  end_us: number;
  evidence: Record<string, number>;
}

export interface SessionSummaryMsg extends ProtocolMessage {
  type: "session_summary";
  summary: {
    test_id: string;
    session_id: string;
    score: Record<string, unknown>;
    completion_time_s: number;
    flags: string[];
  };
  document: Record<string, number>;
  suggestions?: ReplaySuggestionMsg[];
}

export interface ErrorMsg extends ProtocolMessage {
  type: "error";
  code: string;
  message: string;
}

/** Minimal WebSocket surface so tests can substitute a scripted socket. */
export interface WireSocket {
  send(data: string): void;
  close(): void;
  onopen: (() => void) | null;
  onmessage: ((ev: { data: string }) => void) | null;
  onclose: (() => void) | null;
  onerror: (() => void) | null;
}

export type SocketFactory = () => WireSocket;

export type MessageHandler = (msg: ProtocolMessage) => void;
export type ConnectionHandler = (connected: boolean) => void;

/**
 * Protocol client with automatic reconnect. On every (re)connect it
 * performs the hello handshake and replays the registered subscription,
 * then invokes the resubscribed callback so the owner can backfill
 * missed state from the store.
 */
export class ServiceClient {
  private socket: WireSocket | null = null;
  private handlers: MessageHandler[] = [];
  private connectionHandlers: ConnectionHandler[] = [];
  private subscribedSession: string | null = null;
  private closed = false;
  private reconnectDelayMs = 200;

  onResubscribed: ((sessionId: string) => void) | null = null;

  constructor(private factory: SocketFactory,
              private reconnect: boolean = true) {}

  onMessage(handler: MessageHandler): void {
    this.handlers.push(handler);
  }

  onConnectionChange(handler: ConnectionHandler): void {
    this.connectionHandlers.push(handler);
  }

  connect(): Promise<void> {
    this.closed = false;
    return this.open(false);
  }

  private open(isReconnect: boolean): Promise<void> {
    return new Promise((resolve, reject) => {
      const socket = this.factory();
      this.socket = socket;
      let settled = false;
      socket.onopen = () => {
        socket.send(JSON.stringify({ type: "hello", version: PROTOCOL_VERSION }));
      };
      socket.onmessage = (ev) => {
        const msg = JSON.parse(ev.data) as ProtocolMessage;
        if (!settled && msg.type === "hello") {
          settled = true;
          for (const h of this.connectionHandlers) h(true);
          if (this.subscribedSession !== null) {
            this.sendRaw({ type: "subscribe", session_id: this.subscribedSession });
            if (isReconnect && this.onResubscribed) {
              this.onResubscribed(this.subscribedSession);
            }
          }
          resolve();
          return;
        }
        for (const h of this.handlers) h(msg);
      };
      socket.onclose = () => {
        for (const h of this.connectionHandlers) h(false);
        if (!settled) {
          settled = true;
          reject(new Error("connection closed during handshake"));
        }
        this.scheduleReconnect();
      };
      socket.onerror = () => {
        // onclose follows; nothing extra to do
      };
    });
  }

  private scheduleReconnect(): void {
    if (this.closed || !this.reconnect) return;
    const delay = this.reconnectDelayMs;
    this.reconnectDelayMs = Math.min(delay * 2, 5000);
    setTimeout(() => {
      if (this.closed) return;
      this.open(true).then(() => {
        this.reconnectDelayMs = 200;
      }).catch(() => {
        // onclose schedules the next attempt
      });
    }, delay);
  }

  sendRaw(msg: ProtocolMessage): void {
    if (!this.socket) throw new Error("not connected");
    this.socket.send(JSON.stringify(msg));
  }

  subscribe(sessionId: string): void {
    this.subscribedSession = sessionId;
    this.sendRaw({ type: "subscribe", session_id: sessionId });
  }

  requestReplay(sessionId: string, speed: number,
                windowFrom?: number, windowTo?: number): void {
    const msg: ProtocolMessage = {
      type: "replay_request",
      session_id: sessionId,
      speed_factor: speed,
    };
    if (windowFrom !== undefined) msg.from_t = windowFrom;
    if (windowTo !== undefined) msg.to_t = windowTo;
    this.sendRaw(msg);
  }

  close(): void {
    this.closed = true;
    this.socket?.close();
  }
}
