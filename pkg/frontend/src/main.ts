import { ApiClient } from "./api.js";
import { Editor } from "./editor.js";
import { drawMarkers, drawPairLink, hitTest } from "./markers.js";
import { importDocument } from "./points.js";
import type { FlowPreview, Pane, PerturbReport } from "./types.js";

const PANE_SIZE = 384;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function toast(message: string): void {
  const box = el<HTMLDivElement>("toast");
  box.textContent = message;
  box.classList.add("visible");
  setTimeout(() => box.classList.remove("visible"), 4000);
}

function inlineIssue(message: string): void {
  el<HTMLDivElement>("issue").textContent = message;
}

async function fileToBase64(file: File): Promise<string> {
  const bytes = new Uint8Array(await file.arrayBuffer());
  let binary = "";
  bytes.forEach((b) => {
    binary += String.fromCharCode(b);
  });
  return btoa(binary);
}

function loadImage(file: File): Promise<HTMLImageElement> {
  return new Promise((resolve, reject) => {
    const img = new Image();
    img.onload = () => resolve(img);
    img.onerror = () => reject(new Error(`cannot decode ${file.name}`));
    img.src = URL.createObjectURL(file);
  });
}

interface PaneView {
  canvas: HTMLCanvasElement;
  image: HTMLImageElement | null;
  pane: Pane;
}

class Workbench {
  private editor: Editor | null = null;
  private readonly panes: Record<Pane, PaneView>;
  private dragging: { pane: Pane; index: number } | null = null;
  private hover: number = -1;

  constructor(private readonly api: ApiClient) {
    this.panes = {
      source: { canvas: el<HTMLCanvasElement>("source-pane"), image: null, pane: "source" },
      driving: { canvas: el<HTMLCanvasElement>("driving-pane"), image: null, pane: "driving" },
    };
    for (const view of Object.values(this.panes)) {
      view.canvas.width = PANE_SIZE;
      view.canvas.height = PANE_SIZE;
      this.bindPane(view);
    }
    el<HTMLInputElement>("source-file").addEventListener("change", (e) => void this.onSourceFile(e));
    el<HTMLInputElement>("driving-file").addEventListener("change", (e) => void this.onDrivingFile(e));
    el<HTMLInputElement>("delta").addEventListener("input", (e) => {
      const value = Number((e.target as HTMLInputElement).value);
      this.editor?.setDelta(value);
      el<HTMLSpanElement>("delta-value").textContent = value.toFixed(2);
    });
    el<HTMLButtonElement>("probe").addEventListener("click", () => void this.editor?.runPerturbProbe());
    el<HTMLButtonElement>("export").addEventListener("click", () => this.exportDocument());
    el<HTMLInputElement>("import-file").addEventListener("change", (e) => void this.onImportFile(e));
  }

  private async onSourceFile(event: Event): Promise<void> {
    const input = event.target as HTMLInputElement;
    const file = input.files?.[0];
    if (!file) return;
    try {
      const [b64, image] = await Promise.all([fileToBase64(file), loadImage(file)]);
      const session = await this.api.createSession(b64);
      this.panes.source.image = image;
      this.editor = new Editor(this.api, session, {
        onPreview: (preview) => {
          el<HTMLImageElement>("preview").src = URL.createObjectURL(preview.blob);
          el<HTMLSpanElement>("warp-stats").textContent =
            `v${preview.version}  mean ${preview.meanDisplacement.toFixed(4)}  max ${preview.maxDisplacement.toFixed(4)}`;
          inlineIssue("");
        },
        onProbe: (report, flow) => this.renderProbe(report, flow),
        onIssue: inlineIssue,
        onToast: toast,
        onState: () => this.redraw(),
      });
      el<HTMLImageElement>("preview").src = URL.createObjectURL(file);
      this.redraw();
      inlineIssue("");
    } catch (err) {
      toast(err instanceof Error ? err.message : String(err));
    }
  }

  private async onDrivingFile(event: Event): Promise<void> {
    const input = event.target as HTMLInputElement;
    const file = input.files?.[0];
    if (!file) return;
    try {
      this.panes.driving.image = await loadImage(file);
      this.redraw();
    } catch (err) {
      toast(err instanceof Error ? err.message : String(err));
    }
  }

  private async onImportFile(event: Event): Promise<void> {
    const input = event.target as HTMLInputElement;
    const file = input.files?.[0];
    if (!file || !this.editor) return;
    try {
      this.editor.replaceDocument(importDocument(await file.text()));
    } catch (err) {
      inlineIssue(err instanceof Error ? err.message : String(err));
    }
  }

  private exportDocument(): void {
    if (!this.editor) return;
    const blob = new Blob([this.editor.exportCurrent()], { type: "application/json" });
    const link = document.createElement("a");
    link.href = URL.createObjectURL(blob);
    link.download = "points.json";
    link.click();
  }

  private bindPane(view: PaneView): void {
    const pos = (e: MouseEvent) => {
      const rect = view.canvas.getBoundingClientRect();
      return { x: e.clientX - rect.left, y: e.clientY - rect.top };
    };
    view.canvas.addEventListener("mousedown", (e) => {
      if (!this.editor) return;
      const { x, y } = pos(e);
      const doc = this.editor.current.doc;
      const index = hitTest(doc[view.pane], PANE_SIZE, PANE_SIZE, x, y);
      if (index >= 0) {
        this.dragging = { pane: view.pane, index };
        this.editor.selectPoint(index);
      }
    });
    view.canvas.addEventListener("mousemove", (e) => {
      if (!this.editor) return;
      const { x, y } = pos(e);
      if (this.dragging && this.dragging.pane === view.pane) {
        this.editor.dragPoint(view.pane, this.dragging.index, x / PANE_SIZE, y / PANE_SIZE);
      } else {
        const index = hitTest(this.editor.current.doc[view.pane], PANE_SIZE, PANE_SIZE, x, y);
        if (index !== this.hover) {
          this.hover = index;
          this.redraw();
        }
      }
    });
    const release = () => {
      if (this.dragging) {
        this.dragging = null;
        this.editor?.releasePoint();
      }
    };
    view.canvas.addEventListener("mouseup", release);
    view.canvas.addEventListener("mouseleave", release);
  }

  private renderProbe(report: PerturbReport, flow: FlowPreview): void {
    el<HTMLSpanElement>("probe-stats").textContent =
      `point ${report.point_index + 1} delta ${report.delta.toFixed(2)}: ` +
      `mean ${report.mean_flow_change.toFixed(4)}, max ${report.max_flow_change.toFixed(4)}, ` +
      `at-point ${report.point_error_change.toFixed(4)}`;
    const canvas = el<HTMLCanvasElement>("flow-overlay");
    canvas.width = flow.width;
    canvas.height = flow.height;
    const ctx = canvas.getContext("2d");
    if (!ctx) return;
    const peak = Math.max(flow.stats.max_displacement, 1e-9);
    flow.data.forEach(([u, v], i) => {
      const col = i % flow.width;
      const row = Math.floor(i / flow.width);
      const cx = (col + 0.5) / flow.width;
      const cy = (row + 0.5) / flow.height;
      const mag = Math.hypot(u - cx, v - cy) / peak;
      ctx.fillStyle = `rgba(255, 64, 0, ${Math.min(1, mag).toFixed(3)})`;
      ctx.fillRect(col, row, 1, 1);
    });
  }

  private redraw(): void {
    if (!this.editor) return;
    const doc = this.editor.current.doc;
    for (const view of Object.values(this.panes)) {
      const ctx = view.canvas.getContext("2d");
      if (!ctx) continue;
      ctx.clearRect(0, 0, PANE_SIZE, PANE_SIZE);
      if (view.image) ctx.drawImage(view.image, 0, 0, PANE_SIZE, PANE_SIZE);
      if (this.hover >= 0) {
        drawPairLink(ctx, doc.source[this.hover], doc.driving[this.hover], PANE_SIZE, PANE_SIZE);
      }
      drawMarkers(ctx, doc[view.pane], PANE_SIZE, PANE_SIZE, this.editor.current.selected);
    }
  }
}

new Workbench(new ApiClient(""));
