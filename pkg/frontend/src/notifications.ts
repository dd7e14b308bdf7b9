// Focus mode: while the clinician runs a test, non-critical notices are
// queued instead of shown; error banners always get through.

export interface Notice {
  text: string;
  critical: boolean;
}

export type NoticeSink = (notice: Notice) => void;

export class FocusGate {
  private queue: Notice[] = [];
  private focused = false;

  constructor(private sink: NoticeSink) {}

  get isFocused(): boolean {
    return this.focused;
  }

  get queuedCount(): number {
    return this.queue.length;
  }

  setFocus(on: boolean): void {
    this.focused = on;
    if (!on) {
      const pending = this.queue;
      this.queue = [];
      for (const notice of pending) this.sink(notice);
    }
  }

  notify(notice: Notice): void {
    if (this.focused && !notice.critical) {
      this.queue.push(notice);
      return;
    }
    this.sink(notice);
  }
}
