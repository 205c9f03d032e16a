import type { Pair, Pane, PointsDocument } from "./types.js";

const GRID_XS = [0.1, 0.3, 0.5, 0.7, 0.9];
const GRID_YS = [0.3, 0.7];

export const DELTA_MIN = 0.05;
export const DELTA_MAX = 0.5;

/** Fresh-session layout: 10 paired points on a well-spread grid. */
export function identityDocument(): PointsDocument {
  const pts: Pair[] = [];
  for (const y of GRID_YS) {
    for (const x of GRID_XS) {
      pts.push([x, y]);
    }
  }
  return {
    n: pts.length,
    alpha: 1.0,
    mode: "affine",
    source: pts.map((p) => [...p] as Pair),
    driving: pts.map((p) => [...p] as Pair),
  };
}

function validPairList(pts: Pair[], n: number): string | null {
  if (pts.length !== n) return `expected ${n} points, got ${pts.length}`;
  for (const [x, y] of pts) {
    if (!Number.isFinite(x) || !Number.isFinite(y)) return "non-finite coordinate";
    if (x < 0 || x > 1 || y < 0 || y > 1) return `coordinate (${x}, ${y}) outside [0, 1]`;
  }
  return null;
}

/** Returns null when the document is submittable, else a human-readable reason. */
export function validateDocument(doc: PointsDocument): string | null {
  if (!Number.isInteger(doc.n) || doc.n < 1) return `n must be a positive integer, got ${doc.n}`;
  if (!(doc.alpha > 0 && doc.alpha <= 1)) return `alpha must be in (0, 1], got ${doc.alpha}`;
  if (!["affine", "similarity", "external"].includes(doc.mode)) return `unknown mode ${doc.mode}`;
  if (doc.mode === "external" && !doc.external_m) return "external mode needs external_m";
  return validPairList(doc.source, doc.n) ?? validPairList(doc.driving, doc.n);
}

export function clamp01(v: number): number {
  return Math.min(1, Math.max(0, v));
}

/** Immutable point move; coordinates are clamped so the mirror stays valid. */
export function movePoint(doc: PointsDocument, pane: Pane, index: number, x: number, y: number): PointsDocument {
  if (index < 0 || index >= doc.n) throw new Error(`point index ${index} out of range`);
  const next = { ...doc, source: doc.source.map((p) => [...p] as Pair), driving: doc.driving.map((p) => [...p] as Pair) };
  next[pane][index] = [clamp01(x), clamp01(y)];
  return next;
}

export function documentsEqual(a: PointsDocument, b: PointsDocument): boolean {
  if (a.n !== b.n || a.alpha !== b.alpha || a.mode !== b.mode) return false;
  const samePairs = (p: Pair[], q: Pair[]) => p.every(([x, y], i) => q[i][0] === x && q[i][1] === y);
  if (!samePairs(a.source, b.source) || !samePairs(a.driving, b.driving)) return false;
  return JSON.stringify(a.external_m ?? null) === JSON.stringify(b.external_m ?? null);
}

/** Serialized form the CLI loads unchanged. */
export function exportDocument(doc: PointsDocument): string {
  const body: Record<string, unknown> = {
    alpha: doc.alpha,
    driving: doc.driving,
    mode: doc.mode,
    n: doc.n,
    source: doc.source,
  };
  if (doc.external_m) body.external_m = doc.external_m;
  return JSON.stringify(body, Object.keys(body).sort(), 2) + "\n";
}

/** Parses an exported file back into a validated document. */
export function importDocument(text: string): PointsDocument {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch (err) {
    throw new Error(`not valid JSON: ${(err as Error).message}`);
  }
  const doc = raw as PointsDocument;
  const reason = validateDocument(doc);
  if (reason) throw new Error(`invalid points document: ${reason}`);
  return doc;
}

export function clampDelta(v: number): number {
  if (!Number.isFinite(v)) return DELTA_MIN;
  return Math.min(DELTA_MAX, Math.max(DELTA_MIN, v));
}
