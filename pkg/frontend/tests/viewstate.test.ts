import { describe, expect, it } from "vitest";

import { ViewState, fitTransform } from "../src/viewstate.js";

function strokeMsg(index: number, points: [number, number][]) {
  return {
    type: "stroke_completed",
    session_id: "s",
    stroke_index: index,
    points,
    features: { tremor_index_mm: 0.1 },
    document: { stroke_count: index + 1, total_in_air_s: 0.5 },
  };
}

describe("view state reducers", () => {
  it("collects strokes and panel values from service messages", () => {
    const state = new ViewState();
    state.enterLive("s");
    state.applyMessage(strokeMsg(0, [[0, 0], [10, 0]]));
    expect(state.strokes).toHaveLength(1);
    expect(state.panels.document?.total_in_air_s).toBe(0.5);
    expect(state.panels.lastStroke?.tremor_index_mm).toBe(0.1);

    state.applyMessage({
      type: "classification", session_id: "s", group_id: 0,
      label: "circle", confidence: 0.9, stroke_indices: [0],
      bbox: [0, 0, 10, 10], evidence: {},
    });
    expect(state.badges).toEqual([
      { groupId: 0, label: "circle", confidence: 0.9, bbox: [0, 0, 10, 10] },
    ]);

    state.applyMessage({
      type: "score_update", session_id: "s", score: { total: 3 },
    });
    expect(state.panels.liveScore).toEqual({ total: 3 });
  });

  it("discards events for a deselected session", () => {
    const state = new ViewState();
    state.enterLive("current");
    state.applyMessage({ ...strokeMsg(0, [[0, 0], [1, 1]]),
                         session_id: "current" });
    state.applyMessage({ ...strokeMsg(1, [[2, 2], [3, 3]]),
                         session_id: "other" });
    expect(state.strokes).toHaveLength(1);
  });

  it("updates a badge in place when a group is reclassified", () => {
    const state = new ViewState();
    state.enterLive("s");
    const base = {
      type: "classification", session_id: "s", group_id: 2,
      stroke_indices: [2], bbox: [0, 0, 1, 1] as [number, number, number, number],
      evidence: {},
    };
    state.applyMessage({ ...base, label: "line", confidence: 0.5 });
    state.applyMessage({ ...base, label: "cross_out", confidence: 0.8 });
    expect(state.badges).toHaveLength(1);
    expect(state.badges[0].label).toBe("cross_out");
  });
});

describe("zoom and pan", () => {
  it("preserves aspect ratio: a single uniform scale", () => {
    const state = new ViewState();
    state.fitPage(800, 1100);
    const before = state.transform.scale;
    state.zoomAt(2.0, 400, 550);
    // one scalar scale for both axes, so aspect cannot change
    expect(state.transform.scale).toBeCloseTo(before * 2.0, 12);
  });

  it("zoom about an anchor keeps the anchor fixed", () => {
    const state = new ViewState();
    state.fitPage(800, 1100);
    const anchorPage: [number, number] = [100, 150];
    const [ax, ay] = state.project(...anchorPage);
    state.zoomAt(1.7, ax, ay);
    const [bx, by] = state.project(...anchorPage);
    expect(bx).toBeCloseTo(ax, 9);
    expect(by).toBeCloseTo(ay, 9);
  });

  it("is an affine map: relative proportions are preserved", () => {
    const state = new ViewState();
    state.fitPage(640, 480);
    state.zoomAt(1.9, 37, 11);
    state.pan(13, -29);
    const p = (x: number, y: number) => state.project(x, y);
    const [x0, y0] = p(0, 0);
    const [x1, y1] = p(10, 0);
    const [x2, y2] = p(0, 10);
    const [x3, y3] = p(20, 30);
    const dx = x1 - x0;
    const dy = y2 - y0;
    expect(x3 - x0).toBeCloseTo(2 * dx, 9);
    expect(y3 - y0).toBeCloseTo(3 * dy, 9);
    expect(y1 - y0).toBeCloseTo(0, 12);
    expect(x2 - x0).toBeCloseTo(0, 12);
  });

  it("fitTransform letterboxes while preserving aspect", () => {
    const t = fitTransform(210, 297, 800, 1100);
    expect(t.scale).toBeCloseTo(Math.min(800 / 210, 1100 / 297), 12);
  });
});

describe("mode invariants", () => {
  it("live and replay are mutually exclusive", () => {
    const state = new ViewState();
    state.enterLive("s");
    expect(state.mode).toBe("live");
    state.enterReplay("s", 0.5);
    expect(state.mode).toBe("replay");
    expect(state.replay.playing).toBe(true);
    state.enterLive("s");
    expect(state.mode).toBe("live");
    expect(state.replay.playing).toBe(false);
  });

  it("rejects non-positive replay speed", () => {
    const state = new ViewState();
    expect(() => state.enterReplay("s", 0)).toThrow(/positive/);
    expect(() => state.enterReplay("s", -1)).toThrow(/positive/);
  });

  it("splits the replay trace on pen lifts", () => {
    const state = new ViewState();
    state.enterReplay("s", 1.0);
    const ev = (t: number, x: number, c: boolean) => ({
      type: "replay_event", session_id: "s", t, x, y: 0, p: c ? 0.5 : 0, c,
    });
    state.applyMessage(ev(0, 0, true));
    state.applyMessage(ev(1, 1, true));
    state.applyMessage(ev(2, 2, false));
    state.applyMessage(ev(3, 3, true));
    expect(state.replayTrace).toHaveLength(2);
    expect(state.replayTrace[0]).toHaveLength(2);
    state.applyMessage({ type: "replay_event", session_id: "s", end: true });
    expect(state.replay.playing).toBe(false);
  });
});
