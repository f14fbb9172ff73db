import { describe, expect, it } from "vitest";

import { ForceHistory } from "../src/history.js";

describe("ForceHistory", () => {
  it("keeps only the configured window", () => {
    const h = new ForceHistory(10);
    for (let t = 0; t <= 25; t++) h.push(t, t * 2);
    const span = h.span()!;
    expect(span[1]).toBe(25);
    expect(span[0]).toBeGreaterThanOrEqual(15);
    for (const [t] of h.values()) expect(t).toBeGreaterThanOrEqual(15);
  });

  it("preserves arrival order and values", () => {
    const h = new ForceHistory(10);
    h.push(0.1, 5);
    h.push(0.2, 7);
    h.push(0.3, 6);
    expect(h.values().map(([, v]) => v)).toEqual([5, 7, 6]);
    expect(h.max()).toBe(7);
  });

  it("reports an empty span when fresh", () => {
    expect(new ForceHistory().span()).toBeNull();
  });
});
