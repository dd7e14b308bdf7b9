// Dashboard state: everything shown in a panel arrives verbatim from
// the service; the client never recomputes analysis values.

import type {
  ClassificationMsg,
  ProtocolMessage,
  ReplayEventMsg,
  ReplaySuggestionMsg,
  ScoreUpdateMsg,
  SessionSummaryMsg,
  StrokeCompletedMsg,
} from "./protocol.js";

export type Mode = "idle" | "live" | "replay";

export interface ViewTransform {
  scale: number;   // uniform: aspect ratio is preserved by construction
  offsetX: number;
  offsetY: number;
}

export interface StrokePath {
  strokeIndex: number;
  points: [number, number][];
}

export interface GroupBadge {
  groupId: number;
  label: string;
  confidence: number;
  bbox: [number, number, number, number];
}

export interface ReplayState {
  speed: number;
  windowFrom?: number;
  windowTo?: number;
  playing: boolean;
}

export interface PanelValues {
  /** (1) summative statistics of the finished test */
  summary: {
    testId: string;
    score: Record<string, unknown>;
    completionTimeS: number;
    flags: string[];
  } | null;
  /** (2) real-time test parameters */
  liveScore: Record<string, unknown> | null;
  /** (3) real-time pen features (tremor, in-air time, ...) */
  document: Record<string, number> | null;
  lastStroke: Record<string, number> | null;
}

const MIN_SCALE = 0.05;
const MAX_SCALE = 200;

export function fitTransform(pageW: number, pageH: number,
                             viewW: number, viewH: number): ViewTransform {
  const scale = Math.min(viewW / pageW, viewH / pageH);
  return {
    scale,
    offsetX: (viewW - pageW * scale) / 2,
    offsetY: (viewH - pageH * scale) / 2,
  };
}

export class ViewState {
  sessionId: string | null = null;
  mode: Mode = "idle";
  page = { w: 210, h: 297 };
  strokes: StrokePath[] = [];
  replayTrace: [number, number][][] = [];
  badges: GroupBadge[] = [];
  suggestions: ReplaySuggestionMsg[] = [];
  panels: PanelValues = {
    summary: null, liveScore: null, document: null, lastStroke: null,
  };
  replay: ReplayState = { speed: 1.0, playing: false };
  focusMode = false;
  transform: ViewTransform = { scale: 1, offsetX: 0, offsetY: 0 };
  connected = false;
  revision = 0;

  enterLive(sessionId: string): void {
    // live and replay are mutually exclusive by construction
    this.sessionId = sessionId;
    this.mode = "live";
    this.strokes = [];
    this.replayTrace = [];
    this.badges = [];
    this.suggestions = [];
    this.panels = { summary: null, liveScore: null, document: null, lastStroke: null };
    this.replay = { speed: 1.0, playing: false };
    this.touch();
  }

  enterReplay(sessionId: string, speed: number,
              windowFrom?: number, windowTo?: number): void {
    if (!(speed > 0)) {
      throw new Error(`replay speed must be positive, got ${speed}`);
    }
    this.sessionId = sessionId;
    this.mode = "replay";
    this.strokes = [];
    this.replayTrace = [];
    this.badges = [];
    this.replay = { speed, windowFrom, windowTo, playing: true };
    this.touch();
  }

  /** Uniform zoom about a view-space anchor point. */
  zoomAt(factor: number, anchorX: number, anchorY: number): void {
    const next = Math.min(MAX_SCALE, Math.max(MIN_SCALE, this.transform.scale * factor));
    const applied = next / this.transform.scale;
    this.transform = {
      scale: next,
      offsetX: anchorX - (anchorX - this.transform.offsetX) * applied,
      offsetY: anchorY - (anchorY - this.transform.offsetY) * applied,
    };
    this.touch();
  }

  pan(dx: number, dy: number): void {
    this.transform = {
      ...this.transform,
      offsetX: this.transform.offsetX + dx,
      offsetY: this.transform.offsetY + dy,
    };
    this.touch();
  }

  fitPage(viewW: number, viewH: number): void {
    this.transform = fitTransform(this.page.w, this.page.h, viewW, viewH);
    this.touch();
  }

  /** Map a page point (mm) to view coordinates. */
  project(x: number, y: number): [number, number] {
    return [
      x * this.transform.scale + this.transform.offsetX,
      y * this.transform.scale + this.transform.offsetY,
    ];
  }

  applyMessage(msg: ProtocolMessage): void {
    if (msg.session_id !== undefined && this.sessionId !== null
        && msg.session_id !== this.sessionId) {
      return; // stale event for a deselected session
    }
    switch (msg.type) {
      case "stroke_completed": {
        const m = msg as StrokeCompletedMsg;
        this.strokes.push({ strokeIndex: m.stroke_index, points: m.points });
        this.panels.lastStroke = m.features;
        this.panels.document = m.document;
        break;
      }
      case "feature_update": {
        const document = (msg as { document?: Record<string, number> }).document;
        if (document) this.panels.document = document;
        break;
      }
      case "classification": {
        const m = msg as ClassificationMsg;
        const badge: GroupBadge = {
          groupId: m.group_id, label: m.label,
          confidence: m.confidence, bbox: m.bbox,
        };
        const existing = this.badges.findIndex(b => b.groupId === m.group_id);
        if (existing >= 0) this.badges[existing] = badge;
        else this.badges.push(badge);
        break;
      }
      case "score_update": {
        this.panels.liveScore = (msg as ScoreUpdateMsg).score;
        break;
      }
      case "session_summary": {
        const m = msg as SessionSummaryMsg;
        this.panels.summary = {
          testId: m.summary.test_id,
          score: m.summary.score,
          completionTimeS: m.summary.completion_time_s,
          flags: m.summary.flags,
        };
        if (m.document) this.panels.document = m.document;
        if (m.suggestions) this.suggestions = m.suggestions;
        break;
      }
      case "replay_suggestion": {
        this.suggestions.push(msg as ReplaySuggestionMsg);
        break;
      }
      case "replay_event": {
        const m = msg as ReplayEventMsg;
        if (m.end) {
          this.replay = { ...this.replay, playing: false };
          break;
        }
        if (m.c && m.x !== undefined && m.y !== undefined) {
          const trace = this.replayTrace;
          if (trace.length === 0) trace.push([]);
          trace[trace.length - 1].push([m.x, m.y]);
        } else if (this.replayTrace.length > 0
                   && this.replayTrace[this.replayTrace.length - 1].length > 0) {
          this.replayTrace.push([]); // pen lift splits the trace
        }
        break;
      }
      default:
        return;
    }
    this.touch();
  }

  private touch(): void {
    this.revision += 1;
  }
}
