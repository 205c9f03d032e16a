import { describe, expect, it } from "vitest";
import { PreviewScheduler } from "../src/scheduler.js";

function deferred<T>() {
  let resolve!: (v: T) => void;
  let reject!: (e: unknown) => void;
  const promise = new Promise<T>((res, rej) => {
    resolve = res;
    reject = rej;
  });
  return { promise, resolve, reject };
}

const tick = () => new Promise<void>((r) => setTimeout(r, 0));

describe("PreviewScheduler", () => {
  it("keeps a single request in flight and drops superseded results", async () => {
    const applied: string[] = [];
    const s = new PreviewScheduler<string>((r) => applied.push(r));
    const first = deferred<string>();
    const started: string[] = [];

    s.submit(() => {
      started.push("a");
      return first.promise;
    });
    s.submit(() => {
      started.push("b");
      return Promise.resolve("b");
    });
    s.submit(() => {
      started.push("c");
      return Promise.resolve("c");
    });
    expect(started).toEqual(["a"]); // b, c queued behind the in-flight request

    first.resolve("a");
    await tick();
    await tick();
    // a was stale by the time it settled; b was superseded before it started
    expect(started).toEqual(["a", "c"]);
    expect(applied).toEqual(["c"]);
  });

  it("applies a lone result", async () => {
    const applied: string[] = [];
    const s = new PreviewScheduler<string>((r) => applied.push(r));
    s.submit(() => Promise.resolve("only"));
    await tick();
    expect(applied).toEqual(["only"]);
  });

  it("suppresses errors from superseded requests", async () => {
    const applied: string[] = [];
    const errors: unknown[] = [];
    const s = new PreviewScheduler<string>(
      (r) => applied.push(r),
      (e) => errors.push(e),
    );
    const doomed = deferred<string>();
    s.submit(() => doomed.promise);
    s.submit(() => Promise.resolve("fresh"));
    doomed.reject(new Error("stale failure"));
    await tick();
    await tick();
    expect(errors).toEqual([]);
    expect(applied).toEqual(["fresh"]);
  });

  it("reports errors from the newest request", async () => {
    const errors: unknown[] = [];
    const s = new PreviewScheduler<string>(() => {}, (e) => errors.push(e));
    s.submit(() => Promise.reject(new Error("boom")));
    await tick();
    expect(errors).toHaveLength(1);
    expect((errors[0] as Error).message).toBe("boom");
  });
});
