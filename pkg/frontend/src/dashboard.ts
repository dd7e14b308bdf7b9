// Composition root: protocol client -> view state -> renderer/panels.

import type { Context2DLike } from "./canvas.js";
import { InkRenderer } from "./canvas.js";
import { FocusGate, type NoticeSink } from "./notifications.js";
import {
  ServiceClient,
  type ProtocolMessage,
  type ReplaySuggestionMsg,
  type SocketFactory,
} from "./protocol.js";
import { ViewState } from "./viewstate.js";

export type FetchJson = (path: string) => Promise<unknown>;

export interface DashboardOptions {
  socketFactory: SocketFactory;
  fetchJson: FetchJson;          // store-backed HTTP endpoints
  noticeSink: NoticeSink;
  ctx?: Context2DLike;
  viewWidth?: number;
  viewHeight?: number;
  onRender?: (state: ViewState) => void;
}

export class Dashboard {
  readonly state = new ViewState();
  readonly focus: FocusGate;
  readonly client: ServiceClient;
  private renderer: InkRenderer | null = null;
  private onRender: ((state: ViewState) => void) | null;

  constructor(private opts: DashboardOptions) {
    this.focus = new FocusGate(opts.noticeSink);
    this.client = new ServiceClient(opts.socketFactory);
    this.onRender = opts.onRender ?? null;
    if (opts.ctx) {
      const w = opts.viewWidth ?? 800;
      const h = opts.viewHeight ?? 1100;
      this.renderer = new InkRenderer(opts.ctx, w, h);
      this.state.fitPage(w, h);
    }
    this.client.onMessage((msg) => this.handleMessage(msg));
    this.client.onConnectionChange((connected) => {
      this.state.connected = connected;
      if (!connected) {
        // connection-loss banner is critical: it shows even in focus mode
        this.focus.notify({ text: "connection lost — reconnecting", critical: true });
      }
    });
    this.client.onResubscribed = (sessionId) => {
      this.focus.notify({ text: "reconnected", critical: true });
      void this.backfill(sessionId);
    };
  }

  async connect(): Promise<void> {
    await this.client.connect();
  }

  /** Watch a live session; panels fill as service events arrive. */
  subscribeSession(sessionId: string): void {
    this.state.enterLive(sessionId);
    this.client.subscribe(sessionId);
    this.render();
  }

  /** Animated playback; events arrive pre-paced by the service. */
  startReplay(sessionId: string, speed: number,
              windowFrom?: number, windowTo?: number): void {
    this.state.enterReplay(sessionId, speed, windowFrom, windowTo);
    this.client.requestReplay(sessionId, speed, windowFrom, windowTo);
    this.render();
  }

  /** Clicking a suggestion jumps the replay window to its interval. */
  jumpToSuggestion(suggestion: ReplaySuggestionMsg): void {
    if (!this.state.sessionId) return;
    this.startReplay(this.state.sessionId, this.state.replay.speed,
                     suggestion.start_us, suggestion.end_us);
  }

  setFocusMode(on: boolean): void {
    this.state.focusMode = on;
    this.focus.setFocus(on);
  }

  handleMessage(msg: ProtocolMessage): void {
    if (msg.type === "error") {
      this.focus.notify({
        text: `${msg.code}: ${msg.message}`,
        critical: true,
      });
      return;
    }
    const before = this.state.revision;
    this.state.applyMessage(msg);
    if (msg.type === "session_summary") {
      this.focus.notify({ text: "session finished", critical: false });
    }
    if (this.state.revision !== before) this.render();
  }

  /** Restore panel state from the store after a reconnect. */
  async backfill(sessionId: string): Promise<void> {
    try {
      const data = await this.opts.fetchJson(`/sessions/${sessionId}/summary`) as {
        summary: { test_id: string; session_id: string;
                   score: Record<string, unknown>;
                   completion_time_s: number; flags: string[] };
        document: Record<string, number>;
        suggestions: ReplaySuggestionMsg[];
        groups: { group_id: number; label: string; confidence: number;
                  bbox: [number, number, number, number] }[];
      };
      this.state.panels.summary = {
        testId: data.summary.test_id,
        score: data.summary.score,
        completionTimeS: data.summary.completion_time_s,
        flags: data.summary.flags,
      };
      this.state.panels.document = data.document;
      this.state.suggestions = data.suggestions;
      this.state.badges = data.groups.map((g) => ({
        groupId: g.group_id, label: g.label,
        confidence: g.confidence, bbox: g.bbox,
      }));
      this.render();
    } catch {
      // store may not hold the session yet (still live); events resume anyway
    }
  }

  zoom(factor: number, anchorX: number, anchorY: number): void {
    this.state.zoomAt(factor, anchorX, anchorY);
    this.render();
  }

  pan(dx: number, dy: number): void {
    this.state.pan(dx, dy);
    this.render();
  }

  private render(): void {
    this.renderer?.render(this.state);
    this.onRender?.(this.state);
  }
}
