import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";
import type { ApiClient } from "../src/api.js";
import { ApiError } from "../src/api.js";
import { DEBOUNCE_MS, Editor, type EditorEvents } from "../src/editor.js";
import { identityDocument } from "../src/points.js";
import type { FlowPreview, PerturbReport, PointsDocument, WarpPreview } from "../src/types.js";

interface StubCalls {
  setPoints: PointsDocument[];
  getWarp: { size?: string; version?: number }[];
  perturb: { index: number; delta: number }[];
  getFlow: number;
}

function makeStub(overrides: Partial<Record<"setPoints" | "getWarp" | "perturb", unknown>> = {}) {
  const calls: StubCalls = { setPoints: [], getWarp: [], perturb: [], getFlow: 0 };
  let version = 1;
  const flow: FlowPreview = {
    width: 2,
    height: 2,
    data: [[0.25, 0.25], [0.75, 0.25], [0.25, 0.75], [0.75, 0.75]],
    version: 1,
    stats: { mean_displacement: 0, max_displacement: 0 },
  };
  const api = {
    async setPoints(_sid: string, doc: PointsDocument) {
      calls.setPoints.push(doc);
      if (overrides.setPoints) throw overrides.setPoints;
      version += 1;
      return version;
    },
    async getWarp(_sid: string, opts: { size?: string; version?: number } = {}) {
      calls.getWarp.push(opts);
      if (overrides.getWarp) throw overrides.getWarp;
      const preview: WarpPreview = {
        blob: new Blob([new Uint8Array([0])]),
        version: opts.version ?? version,
        meanDisplacement: 0.05,
        maxDisplacement: 0.1,
      };
      return preview;
    },
    async perturb(_sid: string, index: number, delta: number) {
      calls.perturb.push({ index, delta });
      if (overrides.perturb) throw overrides.perturb;
      const report: PerturbReport = {
        point_index: index,
        delta,
        mean_flow_change: delta / 4,
        max_flow_change: delta / 2,
        point_error_change: delta / 4,
        version,
      };
      return report;
    },
    async getFlow() {
      calls.getFlow += 1;
      return flow;
    },
  };
  return { api: api as unknown as ApiClient, calls };
}

function makeEvents() {
  const log = {
    previews: [] as WarpPreview[],
    probes: [] as PerturbReport[],
    issues: [] as string[],
    toasts: [] as string[],
  };
  const events: EditorEvents = {
    onPreview: (p) => log.previews.push(p),
    onProbe: (r) => log.probes.push(r),
    onIssue: (m) => log.issues.push(m),
    onToast: (m) => log.toasts.push(m),
    onState: () => {},
  };
  return { events, log };
}

function makeEditor(overrides?: Parameters<typeof makeStub>[0]) {
  const { api, calls } = makeStub(overrides);
  const { events, log } = makeEvents();
  const editor = new Editor(
    api,
    { id: "s1", version: 1, points: identityDocument() },
    events,
    undefined,
    { attempts: 2, baseMs: 1, sleep: async () => {} },
  );
  return { editor, calls, log };
}

const flushAsync = async () => {
  await vi.advanceTimersByTimeAsync(0);
  await vi.advanceTimersByTimeAsync(0);
};

describe("Editor drag loop", () => {
  beforeEach(() => vi.useFakeTimers());
  afterEach(() => vi.useRealTimers());

  it("debounces drag submissions behind 80 ms and submits the final document once", async () => {
    const { editor, calls } = makeEditor();
    editor.dragPoint("driving", 0, 0.2, 0.3);
    editor.dragPoint("driving", 0, 0.25, 0.35);
    await vi.advanceTimersByTimeAsync(DEBOUNCE_MS - 1);
    expect(calls.setPoints).toHaveLength(0);
    await vi.advanceTimersByTimeAsync(1);
    await flushAsync();
    expect(calls.setPoints).toHaveLength(1);
    expect(calls.setPoints[0].driving[0]).toEqual([0.25, 0.35]);
  });

  it("pins the preview fetch to the version returned by the submit", async () => {
    const { editor, calls, log } = makeEditor();
    editor.dragPoint("driving", 1, 0.4, 0.4);
    await vi.advanceTimersByTimeAsync(DEBOUNCE_MS);
    await flushAsync();
    expect(calls.getWarp).toEqual([{ size: undefined, version: 2 }]);
    expect(log.previews).toHaveLength(1);
    expect(editor.current.version).toBe(2);
  });

  it("sends nothing for a drag released with no net movement", async () => {
    const { editor, calls } = makeEditor();
    editor.dragPoint("driving", 0, 0.4, 0.4);
    editor.dragPoint("driving", 0, 0.1, 0.3); // back to the original spot
    editor.releasePoint();
    await vi.advanceTimersByTimeAsync(DEBOUNCE_MS * 4);
    await flushAsync();
    expect(calls.setPoints).toHaveLength(0);
    expect(calls.getWarp).toHaveLength(0);
  });

  it("release submits immediately without waiting out the debounce", async () => {
    const { editor, calls } = makeEditor();
    editor.dragPoint("driving", 2, 0.6, 0.6);
    editor.releasePoint();
    await flushAsync();
    expect(calls.setPoints).toHaveLength(1);
  });

  it("surfaces 409/422 inline and keeps the local edits", async () => {
    const { editor, calls, log } = makeEditor({ getWarp: new ApiError(409, "stale version") });
    editor.dragPoint("driving", 0, 0.42, 0.42);
    editor.releasePoint();
    await flushAsync();
    expect(calls.setPoints).toHaveLength(1);
    expect(log.issues).toHaveLength(1);
    expect(log.issues[0]).toMatch(/409/);
    expect(editor.current.doc.driving[0]).toEqual([0.42, 0.42]);

    // the edit is still submittable after the failure
    editor.releasePoint();
    await flushAsync();
    expect(calls.setPoints).toHaveLength(2);
  });

  it("rejects an invalid replacement document without contacting the server", async () => {
    const { editor, calls, log } = makeEditor();
    const bad = { ...identityDocument(), alpha: 7 };
    editor.replaceDocument(bad);
    await flushAsync();
    expect(log.issues).toHaveLength(1);
    expect(calls.setPoints).toHaveLength(0);
    expect(editor.current.doc.alpha).toBe(1);
  });
});

describe("Editor perturbation probe", () => {
  beforeEach(() => vi.useFakeTimers());
  afterEach(() => vi.useRealTimers());

  it("probes the selected point at the slider delta and renders the overlay", async () => {
    const { editor, calls, log } = makeEditor();
    editor.setDelta(0.2);
    editor.selectPoint(3);
    await flushAsync();
    expect(calls.perturb).toEqual([{ index: 3, delta: 0.2 }]);
    expect(calls.getFlow).toBe(1);
    expect(log.probes).toHaveLength(1);
    expect(log.probes[0].mean_flow_change).toBeCloseTo(0.05);
  });

  it("re-runs the probe when another point is selected", async () => {
    const { editor, calls } = makeEditor();
    editor.selectPoint(1);
    await flushAsync();
    editor.selectPoint(4);
    await flushAsync();
    expect(calls.perturb.map((c) => c.index)).toEqual([1, 4]);
  });

  it("clamps the slider to the noise range", () => {
    const { editor } = makeEditor();
    editor.setDelta(0.9);
    expect(editor.current.delta).toBe(0.5);
    editor.setDelta(0.001);
    expect(editor.current.delta).toBe(0.05);
  });

  it("retries transient probe failures and toasts when the budget runs out", async () => {
    const { editor, calls, log } = makeEditor({ perturb: new ApiError(503, "overloaded") });
    await editor.runPerturbProbe();
    expect(calls.perturb).toHaveLength(2); // attempts budget from the test retry options
    expect(log.toasts).toHaveLength(1);
    expect(log.toasts[0]).toMatch(/503/);
  });
});

describe("Editor export", () => {
  it("exports a fresh session as the 10-point identity grid", () => {
    const { editor } = makeEditor();
    const parsed = JSON.parse(editor.exportCurrent());
    expect(parsed.n).toBe(10);
    expect(parsed.source).toEqual(parsed.driving);
  });
});
