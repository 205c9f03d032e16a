import type { Pair } from "./types.js";

/** Structural subset of CanvasRenderingContext2D the markers need; tests pass a recorder. */
export interface Draw2D {
  beginPath(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  fill(): void;
  stroke(): void;
  fillText(text: string, x: number, y: number): void;
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
  textAlign: CanvasTextAlign;
  textBaseline: CanvasTextBaseline;
}

export const MARKER_RADIUS = 7;

const PALETTE = ["#e6194b", "#3cb44b", "#4363d8", "#f58231", "#911eb4",
                 "#46f0f0", "#f032e6", "#bcf60c", "#008080", "#9a6324"];

export function markerColor(index: number): string {
  return PALETTE[index % PALETTE.length];
}

/** Numbered paired markers; the selected point gets a highlight ring. */
export function drawMarkers(ctx: Draw2D, points: Pair[], width: number, height: number, selected: number): void {
  ctx.font = "10px sans-serif";
  ctx.textAlign = "center";
  ctx.textBaseline = "middle";
  points.forEach(([nx, ny], i) => {
    const x = nx * width;
    const y = ny * height;
    ctx.beginPath();
    ctx.arc(x, y, MARKER_RADIUS, 0, 2 * Math.PI);
    ctx.fillStyle = markerColor(i);
    ctx.fill();
    ctx.strokeStyle = i === selected ? "#ffffff" : "#00000066";
    ctx.lineWidth = i === selected ? 3 : 1;
    ctx.stroke();
    ctx.fillStyle = "#ffffff";
    ctx.fillText(String(i + 1), x, y);
  });
}

/** Hover highlight connecting a point's source and driving positions. */
export function drawPairLink(ctx: Draw2D, source: Pair, driving: Pair, width: number, height: number): void {
  ctx.beginPath();
  ctx.moveTo(source[0] * width, source[1] * height);
  ctx.lineTo(driving[0] * width, driving[1] * height);
  ctx.strokeStyle = "#ffd700";
  ctx.lineWidth = 2;
  ctx.stroke();
}

/** Index of the marker under (x, y) in pixels, topmost (= highest index) first; -1 if none. */
export function hitTest(points: Pair[], width: number, height: number, x: number, y: number): number {
  for (let i = points.length - 1; i >= 0; i--) {
    const dx = points[i][0] * width - x;
    const dy = points[i][1] * height - y;
    if (dx * dx + dy * dy <= MARKER_RADIUS * MARKER_RADIUS) return i;
  }
  return -1;
}
