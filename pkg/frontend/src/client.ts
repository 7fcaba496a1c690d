/**
 * Typed client for the server HTTP/JSON API. Every console capability maps
 * onto one of these documented endpoints; the console holds no other state.
 */

import type {
  ApiError,
  DatasetSnapshot,
  ObservationPage,
  ObservationRow,
  ProjectManifest,
  ReviewDecision,
} from './types.js';

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ServerError extends Error {
  constructor(public code: string, message: string, public status: number) {
    super(message);
  }
}

async function parseError(response: Response): Promise<never> {
  let body: ApiError = { code: 'error', message: response.statusText };
  try {
    body = (await response.json()) as ApiError;
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ServerError(body.code, body.message, response.status);
}

export class ConsoleApi {
  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, '');
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      await parseError(response);
    }
    return (await response.json()) as T;
  }

  createProject(manifest: ProjectManifest): Promise<{ project_id: string }> {
    return this.request('/v1/projects', {
      method: 'POST',
      body: JSON.stringify(manifest),
    });
  }

  getManifest(projectId: string): Promise<ProjectManifest> {
    return this.request(`/v1/projects/${projectId}/manifest`);
  }

  publishModel(projectId: string, bundle: ArrayBuffer | Uint8Array): Promise<unknown> {
    return this.request(`/v1/projects/${projectId}/model`, {
      method: 'POST',
      body: bundle as BodyInit,
    });
  }

  listObservations(
    projectId: string,
    opts: { reviewed?: boolean; verdict?: string; limit?: number; cursor?: string } = {},
  ): Promise<ObservationPage> {
    const params = new URLSearchParams();
    if (opts.reviewed !== undefined) params.set('reviewed', String(opts.reviewed));
    if (opts.verdict) params.set('verdict', opts.verdict);
    if (opts.limit !== undefined) params.set('limit', String(opts.limit));
    if (opts.cursor) params.set('cursor', opts.cursor);
    const qs = params.toString();
    return this.request(`/v1/projects/${projectId}/observations${qs ? `?${qs}` : ''}`);
  }

  getObservation(observationId: string): Promise<ObservationRow> {
    return this.request(`/v1/observations/${observationId}`);
  }

  submitReview(observationId: string, decision: ReviewDecision): Promise<ObservationRow> {
    return this.request(`/v1/observations/${observationId}/review`, {
      method: 'POST',
      body: JSON.stringify(decision),
    });
  }

  rescore(observationId: string, verificationModel: unknown): Promise<{ server_detections: unknown[] }> {
    return this.request(`/v1/observations/${observationId}/rescore`, {
      method: 'POST',
      body: JSON.stringify(verificationModel),
    });
  }

  exportSnapshot(projectId: string): Promise<DatasetSnapshot> {
    return this.request(`/v1/projects/${projectId}/snapshots`, { method: 'POST' });
  }

  getSnapshot(projectId: string, snapshotId: number): Promise<DatasetSnapshot> {
    return this.request(`/v1/projects/${projectId}/snapshots/${snapshotId}`);
  }

  mediaUrl(projectId: string, contentDigest: string): string {
    return `${this.baseUrl}/v1/projects/${projectId}/media/${contentDigest}`;
  }
}
