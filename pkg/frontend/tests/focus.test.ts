import { describe, expect, it } from "vitest";

import { FocusGate, type Notice } from "../src/notifications.js";

describe("focus mode", () => {
  it("queues non-critical notices while focused", () => {
    const shown: Notice[] = [];
    const gate = new FocusGate(n => shown.push(n));
    gate.setFocus(true);
    gate.notify({ text: "session finished", critical: false });
    expect(shown).toHaveLength(0);
    expect(gate.queuedCount).toBe(1);
  });

  it("flushes the queue when focus turns off", () => {
    const shown: Notice[] = [];
    const gate = new FocusGate(n => shown.push(n));
    gate.setFocus(true);
    gate.notify({ text: "a", critical: false });
    gate.notify({ text: "b", critical: false });
    gate.setFocus(false);
    expect(shown.map(n => n.text)).toEqual(["a", "b"]);
    expect(gate.queuedCount).toBe(0);
  });

  it("shows errors even during focus", () => {
    const shown: Notice[] = [];
    const gate = new FocusGate(n => shown.push(n));
    gate.setFocus(true);
    gate.notify({ text: "connection lost", critical: true });
    expect(shown.map(n => n.text)).toEqual(["connection lost"]);
  });
});
