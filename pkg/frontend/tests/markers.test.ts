import { describe, expect, it } from "vitest";
import { MARKER_RADIUS, drawMarkers, drawPairLink, hitTest, markerColor, type Draw2D } from "../src/markers.js";
import { identityDocument } from "../src/points.js";
import type { Pair } from "../src/types.js";

interface Op {
  op: string;
  args: unknown[];
}

function recorder() {
  const ops: Op[] = [];
  const record = (op: string) => (...args: unknown[]) => void ops.push({ op, args });
  const ctx: Draw2D = {
    beginPath: record("beginPath"),
    arc: record("arc"),
    moveTo: record("moveTo"),
    lineTo: record("lineTo"),
    fill: record("fill"),
    stroke: record("stroke"),
    fillText: record("fillText"),
    fillStyle: "",
    strokeStyle: "",
    lineWidth: 0,
    font: "",
    textAlign: "left",
    textBaseline: "alphabetic",
  };
  return { ctx, ops };
}

describe("drawMarkers", () => {
  it("draws one numbered circle per point at scaled coordinates", () => {
    const { ctx, ops } = recorder();
    const doc = identityDocument();
    drawMarkers(ctx, doc.driving, 400, 200, 0);
    const arcs = ops.filter((o) => o.op === "arc");
    const labels = ops.filter((o) => o.op === "fillText");
    expect(arcs).toHaveLength(10);
    expect(labels).toHaveLength(10);
    expect(arcs[0].args.slice(0, 3)).toEqual([0.1 * 400, 0.3 * 200, MARKER_RADIUS]);
    expect(labels.map((l) => l.args[0])).toEqual(["1", "2", "3", "4", "5", "6", "7", "8", "9", "10"]);
  });

  it("gives paired panes the same color per index", () => {
    expect(markerColor(3)).toBe(markerColor(3));
    expect(markerColor(0)).not.toBe(markerColor(1));
    expect(markerColor(12)).toBe(markerColor(2)); // palette wraps
  });
});

describe("drawPairLink", () => {
  it("connects the source and driving positions of one pair", () => {
    const { ctx, ops } = recorder();
    drawPairLink(ctx, [0.1, 0.2], [0.5, 0.6], 100, 100);
    expect(ops.find((o) => o.op === "moveTo")?.args).toEqual([10, 20]);
    expect(ops.find((o) => o.op === "lineTo")?.args).toEqual([50, 60]);
    expect(ops.filter((o) => o.op === "stroke")).toHaveLength(1);
  });
});

describe("hitTest", () => {
  const points: Pair[] = [
    [0.5, 0.5],
    [0.52, 0.5], // overlapping neighbor drawn later (on top)
  ];

  it("returns the topmost marker under the cursor", () => {
    expect(hitTest(points, 100, 100, 51.5, 50)).toBe(1);
  });

  it("falls back to lower markers and misses on empty space", () => {
    expect(hitTest(points, 100, 100, 44, 50)).toBe(0);
    expect(hitTest(points, 100, 100, 90, 90)).toBe(-1);
  });
});
