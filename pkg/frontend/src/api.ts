import type { FlowPreview, PerturbReport, PointsDocument, SessionInfo, WarpPreview } from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

async function raise(resp: Response): Promise<never> {
  let detail = resp.statusText;
  try {
    const body = (await resp.json()) as { detail?: unknown };
    if (body && body.detail !== undefined) detail = JSON.stringify(body.detail);
  } catch {
    /* non-JSON error body; keep the status text */
  }
  throw new ApiError(resp.status, detail);
}

/** Thin typed wrapper over the warp service routes; all pixels come from here. */
export class ApiClient {
  constructor(
    private readonly baseUrl = "",
    private readonly fetchFn: FetchLike = (url, init) => globalThis.fetch(url, init),
  ) {}

  private url(path: string): string {
    return this.baseUrl + path;
  }

  async createSession(sourcePngBase64: string): Promise<SessionInfo> {
    const resp = await this.fetchFn(this.url("/sessions"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ source: sourcePngBase64 }),
    });
    if (resp.status !== 201) await raise(resp);
    return (await resp.json()) as SessionInfo;
  }

  async setPoints(sessionId: string, doc: PointsDocument): Promise<number> {
    const resp = await this.fetchFn(this.url(`/sessions/${sessionId}/points`), {
      method: "PUT",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(doc),
    });
    if (!resp.ok) await raise(resp);
    return ((await resp.json()) as { version: number }).version;
  }

  async getWarp(sessionId: string, opts: { size?: string; version?: number } = {}): Promise<WarpPreview> {
    const params = new URLSearchParams();
    if (opts.size) params.set("size", opts.size);
    if (opts.version !== undefined) params.set("version", String(opts.version));
    const query = params.size > 0 ? `?${params.toString()}` : "";
    const resp = await this.fetchFn(this.url(`/sessions/${sessionId}/warp${query}`));
    if (!resp.ok) await raise(resp);
    return {
      blob: await resp.blob(),
      version: Number(resp.headers.get("X-Snapshot-Version") ?? "0"),
      meanDisplacement: Number(resp.headers.get("X-Mean-Displacement") ?? "0"),
      maxDisplacement: Number(resp.headers.get("X-Max-Displacement") ?? "0"),
    };
  }

  async perturb(sessionId: string, pointIndex: number, delta: number): Promise<PerturbReport> {
    const resp = await this.fetchFn(this.url(`/sessions/${sessionId}/perturb`), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ point_index: pointIndex, delta }),
    });
    if (!resp.ok) await raise(resp);
    return (await resp.json()) as PerturbReport;
  }

  async getFlow(sessionId: string, size = "32x32"): Promise<FlowPreview> {
    const resp = await this.fetchFn(this.url(`/sessions/${sessionId}/flow?size=${size}`));
    if (!resp.ok) await raise(resp);
    return (await resp.json()) as FlowPreview;
  }
}

export interface RetryOptions {
  attempts?: number;
  baseMs?: number;
  sleep?: (ms: number) => Promise<void>;
  /** Retry only transient failures; client errors (4xx) surface immediately. */
  retryable?: (err: unknown) => boolean;
}

const defaultSleep = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

export function defaultRetryable(err: unknown): boolean {
  if (err instanceof ApiError) return err.status >= 500;
  return true; // network-level failure
}

/** Exponential backoff: baseMs, 2x baseMs, 4x baseMs, ... */
export async function retryWithBackoff<T>(fn: () => Promise<T>, opts: RetryOptions = {}): Promise<T> {
  const attempts = opts.attempts ?? 3;
  const baseMs = opts.baseMs ?? 150;
  const sleep = opts.sleep ?? defaultSleep;
  const retryable = opts.retryable ?? defaultRetryable;
  let lastErr: unknown;
  for (let i = 0; i < attempts; i++) {
    try {
      return await fn();
    } catch (err) {
      lastErr = err;
      if (!retryable(err) || i === attempts - 1) throw err;
      await sleep(baseMs * 2 ** i);
    }
  }
  throw lastErr;
}
