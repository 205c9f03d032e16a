import { ApiClient, ApiError, retryWithBackoff, type RetryOptions } from "./api.js";
import { debounce, type Debounced } from "./debounce.js";
import { clampDelta, documentsEqual, exportDocument, movePoint, validateDocument } from "./points.js";
import { PreviewScheduler } from "./scheduler.js";
import type { EditorState, FlowPreview, Pane, PerturbReport, PointsDocument, WarpPreview } from "./types.js";

export interface EditorEvents {
  onPreview(preview: WarpPreview): void;
  onProbe(report: PerturbReport, flow: FlowPreview): void;
  /** Inline, non-destructive error surface (422/409 keep local edits). */
  onIssue(message: string): void;
  /** Transient failure surface for the probe path (toast). */
  onToast(message: string): void;
  onState(state: EditorState): void;
}

export const DEBOUNCE_MS = 80;

type WarpResult = WarpPreview;

/** Drives the edit loop: mirror updates, debounced submit, latest-wins preview. */
export class Editor {
  private state: EditorState;
  /** Document the server last acknowledged; null after a failed submit. */
  private lastSubmitted: PointsDocument | null;
  private readonly scheduler: PreviewScheduler<WarpResult>;
  private readonly submitDebounced: Debounced<[]>;

  constructor(
    private readonly api: ApiClient,
    session: { id: string; version: number; points: PointsDocument },
    private readonly events: EditorEvents,
    private readonly previewSize?: string,
    private readonly retry: RetryOptions = {},
  ) {
    this.state = {
      sessionId: session.id,
      doc: session.points,
      selected: 0,
      version: session.version,
      delta: 0.1,
    };
    this.lastSubmitted = session.points;
    this.scheduler = new PreviewScheduler<WarpResult>(
      (preview) => {
        this.state = { ...this.state, version: preview.version };
        this.events.onPreview(preview);
        this.events.onState(this.state);
      },
      (err) => {
        this.lastSubmitted = null;
        this.surface(err);
      },
    );
    this.submitDebounced = debounce(() => this.submitNow(), DEBOUNCE_MS);
  }

  get current(): EditorState {
    return this.state;
  }

  private surface(err: unknown): void {
    if (err instanceof ApiError && (err.status === 409 || err.status === 422)) {
      this.events.onIssue(err.message);
    } else {
      this.events.onToast(err instanceof Error ? err.message : String(err));
    }
  }

  selectPoint(index: number): void {
    if (index < 0 || index >= this.state.doc.n) return;
    this.state = { ...this.state, selected: index };
    this.events.onState(this.state);
    void this.runPerturbProbe();
  }

  setDelta(value: number): void {
    this.state = { ...this.state, delta: clampDelta(value) };
    this.events.onState(this.state);
  }

  /** Mirror update during a drag; submission is debounced behind DEBOUNCE_MS. */
  dragPoint(pane: Pane, index: number, x: number, y: number): void {
    this.state = { ...this.state, doc: movePoint(this.state.doc, pane, index, x, y), selected: index };
    this.events.onState(this.state);
    this.submitDebounced();
  }

  /** Drag release: submit immediately unless the document is back where it started. */
  releasePoint(): void {
    this.submitDebounced.cancel();
    if (this.lastSubmitted && documentsEqual(this.state.doc, this.lastSubmitted)) return;
    this.submitNow();
  }

  replaceDocument(doc: PointsDocument): void {
    const reason = validateDocument(doc);
    if (reason) {
      this.events.onIssue(`rejected: ${reason}`);
      return;
    }
    this.state = { ...this.state, doc, selected: Math.min(this.state.selected, doc.n - 1) };
    this.events.onState(this.state);
    this.submitNow();
  }

  private submitNow(): void {
    const doc = this.state.doc;
    const reason = validateDocument(doc);
    if (reason) {
      this.events.onIssue(`not submitted: ${reason}`);
      return;
    }
    if (this.lastSubmitted && documentsEqual(doc, this.lastSubmitted)) return;
    this.lastSubmitted = doc;
    this.scheduler.submit(async () => {
      const version = await this.api.setPoints(this.state.sessionId, doc);
      return this.api.getWarp(this.state.sessionId, { size: this.previewSize, version });
    });
  }

  /** Stability probe: perturb the selected point by the slider delta. */
  async runPerturbProbe(): Promise<void> {
    const { sessionId, selected, delta } = this.state;
    try {
      const report = await retryWithBackoff(() => this.api.perturb(sessionId, selected, delta), this.retry);
      const flow = await retryWithBackoff(() => this.api.getFlow(sessionId), this.retry);
      this.events.onProbe(report, flow);
    } catch (err) {
      this.events.onToast(err instanceof Error ? err.message : String(err));
    }
  }

  exportCurrent(): string {
    return exportDocument(this.state.doc);
  }
}
