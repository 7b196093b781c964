import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { Debouncer } from "../src/debounce.js";

describe("Debouncer", () => {
  beforeEach(() => vi.useFakeTimers());
  afterEach(() => vi.useRealTimers());

  it("fires only the last of a burst of calls", () => {
    const d = new Debouncer(150);
    const fired: number[] = [];
    for (let k = 0; k < 10; k++) {
      d.schedule(() => fired.push(k));
      vi.advanceTimersByTime(50); // within the window each time
    }
    expect(fired).toEqual([]);
    vi.advanceTimersByTime(150);
    expect(fired).toEqual([9]);
  });

  it("fires again after the window has passed", () => {
    const d = new Debouncer(150);
    let count = 0;
    d.schedule(() => count++);
    vi.advanceTimersByTime(150);
    d.schedule(() => count++);
    vi.advanceTimersByTime(150);
    expect(count).toBe(2);
  });

  it("cancel drops the scheduled call", () => {
    const d = new Debouncer(150);
    let count = 0;
    d.schedule(() => count++);
    d.cancel();
    vi.advanceTimersByTime(1000);
    expect(count).toBe(0);
  });
});
