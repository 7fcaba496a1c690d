/** Wire types mirroring the server's JSON bodies. */

export interface BBox {
  x_min: number;
  y_min: number;
  x_max: number;
  y_max: number;
}

export interface Detection {
  label_id: number;
  bbox: BBox;
  confidence: number;
}

export type Verdict = 'confirm' | 'refute' | 'correct';

export interface ReviewDecision {
  verdict: Verdict;
  corrected_detections: Detection[];
  reviewer: string;
}

export interface ObservationRow {
  observation_id: string;
  project_id: string;
  content_digest: string;
  captured_at: string;
  sensor: Record<string, number | string> | null;
  detections: Detection[];
  model_version: string;
  received_at: string;
  review: (ReviewDecision & { decided_at: string }) | null;
  server_detections: Detection[] | null;
  media_url?: string;
}

export interface ObservationPage {
  observations: ObservationRow[];
  next_cursor: string | null;
}

export interface LabelDef {
  id: number;
  name: string;
  display_color: [number, number, number];
}

export interface ProjectManifest {
  schema_version: number;
  project_id: string;
  name: string;
  description: string;
  labels: LabelDef[];
  tutorial: string[];
}

export interface SnapshotAnnotation {
  content_digest: string;
  detection: Detection;
  source: 'model' | 'expert';
}

export interface DatasetSnapshot {
  snapshot_id: number;
  created_at: string;
  images: { content_digest: string; media_path: string }[];
  annotations: SnapshotAnnotation[];
  stats: { labels: Record<string, number>; verdicts: Record<string, number> };
}

export interface ApiError {
  code: string;
  message: string;
}
