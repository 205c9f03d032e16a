export type Pair = [number, number];

export type MlsMode = "affine" | "similarity" | "external";

export interface PointsDocument {
  n: number;
  alpha: number;
  mode: MlsMode;
  source: Pair[];
  driving: Pair[];
  external_m?: [Pair, Pair];
}

export type Pane = "source" | "driving";

export interface SessionInfo {
  id: string;
  version: number;
  points: PointsDocument;
  width: number;
  height: number;
}

export interface WarpPreview {
  blob: Blob;
  version: number;
  meanDisplacement: number;
  maxDisplacement: number;
}

export interface PerturbReport {
  point_index: number;
  delta: number;
  mean_flow_change: number;
  max_flow_change: number;
  point_error_change: number;
  version: number;
}

export interface FlowPreview {
  width: number;
  height: number;
  data: Pair[];
  version: number;
  stats: { mean_displacement: number; max_displacement: number };
}

export interface EditorState {
  sessionId: string;
  /** Local mirror of the server document; must validate before any submit. */
  doc: PointsDocument;
  selected: number;
  /** Last snapshot version acknowledged by the server. */
  version: number;
  /** Perturbation slider value, clamped to the noise range [0.05, 0.5]. */
  delta: number;
}
