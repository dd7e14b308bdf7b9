// Browser bootstrap: wires the dashboard to the page. The pen, not this
// UI, is the input device — everything here is read-only toward ink.

import { Dashboard } from "./dashboard.js";
import type { ViewState } from "./viewstate.js";

function text(id: string, value: string): void {
  const el = document.getElementById(id);
  if (el) el.textContent = value;
}

function renderPanels(state: ViewState): void {
  const doc = state.panels.document;
  if (doc) {
    text("pen-tremor", (doc["stroke_mean_tremor_index_mm"] ?? 0).toFixed(3) + " mm");
    text("pen-inair", (doc["total_in_air_s"] ?? 0).toFixed(2) + " s");
    text("pen-onpaper", (doc["total_on_paper_s"] ?? 0).toFixed(2) + " s");
    text("pen-strokes", String(doc["stroke_count"] ?? 0));
  }
  const score = state.panels.liveScore ?? state.panels.summary?.score ?? null;
  const scoreEl = document.getElementById("test-params");
  if (scoreEl && score) {
    scoreEl.textContent = Object.entries(score)
      .filter(([k]) => k !== "result_type")
      .map(([k, v]) => `${k}: ${JSON.stringify(v)}`)
      .join("\n");
  }
  if (state.panels.summary) {
    text("summary-time", state.panels.summary.completionTimeS.toFixed(1) + " s");
    text("summary-flags", state.panels.summary.flags.join(", ") || "none");
  }
  const list = document.getElementById("suggestions");
  if (list) {
    list.innerHTML = "";
    for (const sug of state.suggestions) {
      const li = document.createElement("li");
      li.textContent = `${sug.reason} ${(sug.start_us / 1e6).toFixed(1)}s – ` +
        `${(sug.end_us / 1e6).toFixed(1)}s`;
      li.onclick = () => dashboard.jumpToSuggestion(sug);
      list.appendChild(li);
    }
  }
  text("conn-banner", state.connected ? "" : "connection lost — reconnecting");
}

const wsUrl = `ws://${location.hostname}:${location.port || 8701}/ws`;
const canvas = document.getElementById("ink-canvas") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;

const dashboard = new Dashboard({
  socketFactory: () => new WebSocket(wsUrl) as unknown as
    import("./protocol.js").WireSocket,
  fetchJson: async (path) => (await fetch(path)).json(),
  noticeSink: (notice) => {
    const el = document.getElementById(notice.critical ? "banner" : "notices");
    if (el) el.textContent = notice.text;
  },
  ctx,
  viewWidth: canvas.width,
  viewHeight: canvas.height,
  onRender: renderPanels,
});

async function main(): Promise<void> {
  await dashboard.connect();
  const sessions = await (await fetch("/sessions")).json() as { sessions: string[] };
  const select = document.getElementById("session-select") as HTMLSelectElement;
  for (const sid of sessions.sessions) {
    const opt = document.createElement("option");
    opt.value = sid;
    opt.textContent = sid;
    select.appendChild(opt);
  }
  (document.getElementById("watch-btn") as HTMLButtonElement).onclick = () =>
    dashboard.subscribeSession(select.value);
  (document.getElementById("replay-btn") as HTMLButtonElement).onclick = () => {
    const speed = parseFloat(
      (document.getElementById("speed-input") as HTMLInputElement).value);
    dashboard.startReplay(select.value, speed);
  };
  (document.getElementById("focus-toggle") as HTMLInputElement).onchange = (ev) =>
    dashboard.setFocusMode((ev.target as HTMLInputElement).checked);
  canvas.addEventListener("wheel", (ev) => {
    ev.preventDefault();
    dashboard.zoom(ev.deltaY < 0 ? 1.15 : 1 / 1.15, ev.offsetX, ev.offsetY);
  });
  let dragging = false;
  canvas.addEventListener("mousedown", () => { dragging = true; });
  window.addEventListener("mouseup", () => { dragging = false; });
  canvas.addEventListener("mousemove", (ev) => {
    if (dragging) dashboard.pan(ev.movementX, ev.movementY);
  });
}

void main();
