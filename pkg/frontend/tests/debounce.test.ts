import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";
import { debounce } from "../src/debounce.js";

describe("debounce", () => {
  beforeEach(() => vi.useFakeTimers());
  afterEach(() => vi.useRealTimers());

  it("holds the call until the 80 ms window elapses", () => {
    const calls: number[] = [];
    const fn = debounce((v: number) => calls.push(v), 80);
    fn(1);
    vi.advanceTimersByTime(79);
    expect(calls).toEqual([]);
    vi.advanceTimersByTime(1);
    expect(calls).toEqual([1]);
  });

  it("coalesces a burst into one trailing call with the latest args", () => {
    const calls: number[] = [];
    const fn = debounce((v: number) => calls.push(v), 80);
    fn(1);
    vi.advanceTimersByTime(40);
    fn(2);
    vi.advanceTimersByTime(40);
    fn(3);
    vi.advanceTimersByTime(80);
    expect(calls).toEqual([3]);
  });

  it("cancel drops the pending call", () => {
    const calls: number[] = [];
    const fn = debounce((v: number) => calls.push(v), 80);
    fn(1);
    fn.cancel();
    vi.advanceTimersByTime(200);
    expect(calls).toEqual([]);
  });

  it("flush fires the pending call immediately, once", () => {
    const calls: number[] = [];
    const fn = debounce((v: number) => calls.push(v), 80);
    fn(7);
    fn.flush();
    expect(calls).toEqual([7]);
    vi.advanceTimersByTime(200);
    expect(calls).toEqual([7]);
    fn.flush(); // nothing pending
    expect(calls).toEqual([7]);
  });
});
