import { describe, expect, it } from "vitest";

import { ReviewQueue } from "../src/queue.js";

describe("ReviewQueue", () => {
  it("visits entries in order and reports exhaustion", () => {
    const q = new ReviewQueue([50, 120]);
    expect(q.current).toBe(50);
    expect(q.next()).toBe(50);
    expect(q.position).toBe(1);
    expect(q.next()).toBe(120);
    expect(q.exhausted).toBe(true);
    expect(q.next()).toBeNull();
  });

  it("prev steps back within bounds", () => {
    const q = new ReviewQueue([1, 2, 3]);
    expect(q.prev()).toBeNull();
    q.next();
    q.next();
    expect(q.prev()).toBe(2);
    expect(q.position).toBe(1);
  });

  it("empty queue is immediately exhausted", () => {
    const q = new ReviewQueue([]);
    expect(q.exhausted).toBe(true);
    expect(q.current).toBeNull();
  });

  it("refresh replaces contents and resets the pointer", () => {
    const q = new ReviewQueue([9]);
    q.next();
    q.refresh([4, 5]);
    expect(q.position).toBe(0);
    expect(q.length).toBe(2);
    expect(q.next()).toBe(4);
  });

  it("does not alias the caller's array", () => {
    const ids = [7, 8];
    const q = new ReviewQueue(ids);
    ids.push(99);
    expect(q.length).toBe(2);
  });
});
