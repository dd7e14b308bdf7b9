// Ink rendering against a minimal 2D-context surface. All geometry goes
// through ViewState.project, so what appears on screen is an affine
// image of the session coordinates — zoom and pan never change stroke
// topology or relative proportions.

import type { ViewState } from "./viewstate.js";

export interface Context2DLike {
  clearRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  stroke(): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  fillText(text: string, x: number, y: number): void;
  lineWidth: number;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  fillStyle: string | CanvasGradient | CanvasPattern;
  font: string;
}

export const COLORS = {
  page: "#cccccc",
  ink: "#1a2a44",
  replay: "#2a7de1",
  badge: "#c25b1e",
  suggestion: "#c2a41e",
};

export class InkRenderer {
  constructor(private ctx: Context2DLike,
              private width: number,
              private height: number) {}

  render(state: ViewState): void {
    const ctx = this.ctx;
    ctx.clearRect(0, 0, this.width, this.height);

    ctx.lineWidth = 1;
    ctx.strokeStyle = COLORS.page;
    const [px, py] = state.project(0, 0);
    const [qx, qy] = state.project(state.page.w, state.page.h);
    ctx.strokeRect(px, py, qx - px, qy - py);

    ctx.strokeStyle = COLORS.ink;
    ctx.lineWidth = 1.5;
    for (const stroke of state.strokes) {
      this.polyline(state, stroke.points);
    }

    ctx.strokeStyle = COLORS.replay;
    for (const trace of state.replayTrace) {
      this.polyline(state, trace);
    }

    ctx.strokeStyle = COLORS.badge;
    ctx.fillStyle = COLORS.badge;
    ctx.font = "12px sans-serif";
    ctx.lineWidth = 1;
    for (const badge of state.badges) {
      const [x0, y0] = state.project(badge.bbox[0], badge.bbox[1]);
      const [x1, y1] = state.project(badge.bbox[2], badge.bbox[3]);
      ctx.strokeRect(x0, y0, x1 - x0, y1 - y0);
      ctx.fillText(`${badge.label} ${badge.confidence.toFixed(2)}`, x0, y0 - 2);
    }
  }

  private polyline(state: ViewState, points: [number, number][]): void {
    if (points.length === 0) return;
    const ctx = this.ctx;
    ctx.beginPath();
    const [x0, y0] = state.project(points[0][0], points[0][1]);
    ctx.moveTo(x0, y0);
    for (let i = 1; i < points.length; i++) {
      const [x, y] = state.project(points[i][0], points[i][1]);
      ctx.lineTo(x, y);
    }
    ctx.stroke();
  }
}
