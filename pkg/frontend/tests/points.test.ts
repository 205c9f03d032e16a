import { describe, expect, it } from "vitest";
import {
  clampDelta,
  documentsEqual,
  exportDocument,
  identityDocument,
  importDocument,
  movePoint,
  validateDocument,
} from "../src/points.js";

describe("identityDocument", () => {
  it("is a 10-point grid with source == driving", () => {
    const doc = identityDocument();
    expect(doc.n).toBe(10);
    expect(doc.source).toEqual(doc.driving);
    expect(doc.source).toContainEqual([0.1, 0.3]);
    expect(doc.source).toContainEqual([0.9, 0.7]);
    expect(validateDocument(doc)).toBeNull();
  });
});

describe("validateDocument", () => {
  it("rejects out-of-range coordinates", () => {
    const doc = identityDocument();
    doc.driving[0] = [1.5, 0.5];
    expect(validateDocument(doc)).toMatch(/outside \[0, 1\]/);
  });

  it("rejects length mismatches", () => {
    const doc = identityDocument();
    doc.source = doc.source.slice(0, 9);
    expect(validateDocument(doc)).toMatch(/expected 10 points/);
  });

  it("rejects bad alpha and external without a matrix", () => {
    expect(validateDocument({ ...identityDocument(), alpha: 0 })).toMatch(/alpha/);
    expect(validateDocument({ ...identityDocument(), mode: "external" })).toMatch(/external_m/);
  });
});

describe("movePoint", () => {
  it("returns a new document and leaves the original untouched", () => {
    const doc = identityDocument();
    const moved = movePoint(doc, "driving", 2, 0.42, 0.58);
    expect(moved.driving[2]).toEqual([0.42, 0.58]);
    expect(doc.driving[2]).toEqual([0.5, 0.3]);
    expect(moved.source).toEqual(doc.source);
  });

  it("clamps drags past the borders into [0, 1]", () => {
    const moved = movePoint(identityDocument(), "source", 0, -0.2, 1.7);
    expect(moved.source[0]).toEqual([0, 1]);
    expect(validateDocument(moved)).toBeNull();
  });

  it("rejects out-of-range indices", () => {
    expect(() => movePoint(identityDocument(), "source", 10, 0.5, 0.5)).toThrow(/out of range/);
  });
});

describe("documentsEqual", () => {
  it("detects a drag with no net movement as unchanged", () => {
    const doc = identityDocument();
    const wiggled = movePoint(movePoint(doc, "driving", 1, 0.6, 0.6), "driving", 1, 0.3, 0.3);
    expect(documentsEqual(doc, wiggled)).toBe(true);
    expect(documentsEqual(doc, movePoint(doc, "driving", 1, 0.31, 0.3))).toBe(false);
  });
});

describe("export / import round trip", () => {
  it("reproduces the point layout exactly", () => {
    let doc = identityDocument();
    doc = movePoint(doc, "driving", 4, 0.55, 0.62);
    const reloaded = importDocument(exportDocument(doc));
    expect(documentsEqual(doc, reloaded)).toBe(true);
  });

  it("serializes the loader's required fields", () => {
    const parsed = JSON.parse(exportDocument(identityDocument()));
    for (const key of ["n", "alpha", "mode", "source", "driving"]) {
      expect(parsed).toHaveProperty(key);
    }
    expect(parsed.source).toHaveLength(10);
  });

  it("rejects malformed or invalid files with a reason", () => {
    expect(() => importDocument("{nope")).toThrow(/not valid JSON/);
    const bad = { ...identityDocument(), driving: [[2, 2]] };
    expect(() => importDocument(JSON.stringify(bad))).toThrow(/invalid points document/);
  });
});

describe("clampDelta", () => {
  it("pins the slider to the noise range [0.05, 0.5]", () => {
    expect(clampDelta(0.01)).toBe(0.05);
    expect(clampDelta(0.3)).toBe(0.3);
    expect(clampDelta(2)).toBe(0.5);
    expect(clampDelta(Number.NaN)).toBe(0.05);
  });
});
