/** A 25-observation fixture in server listing order plus a mock fetch that
 * speaks the server's pagination protocol over it. */

import type { ObservationRow } from '../src/types.js';
import type { FetchLike } from '../src/client.js';

export function fixtureRows(count = 25): ObservationRow[] {
  return Array.from({ length: count }, (_, i) => ({
    observation_id: `obs-${String(i).padStart(3, '0')}`,
    project_id: 'rip-pilot',
    content_digest: 'd'.repeat(63) + String(i % 10),
    captured_at: `2026-08-01T10:${String(i % 60).padStart(2, '0')}:00.000000Z`,
    sensor: null,
    detections: [],
    model_version: '1.0.0',
    // received_at ascending with id tie-break: already the server order
    received_at: `2026-08-02T12:00:${String(i % 60).padStart(2, '0')}.000000Z`,
    review: null,
    server_detections: null,
  }));
}

export interface RecordedRequest {
  url: string;
  method: string;
  body?: string;
}

/** Serves GET /observations with limit+cursor semantics over fixed rows. */
export function pagingFetch(
  rows: ObservationRow[],
  log: RecordedRequest[] = [],
): FetchLike {
  return async (input: string, init?: RequestInit) => {
    log.push({
      url: input,
      method: init?.method ?? 'GET',
      body: typeof init?.body === 'string' ? init.body : undefined,
    });
    const url = new URL(input, 'http://server.test');
    if (url.pathname.endsWith('/observations')) {
      const limit = Number(url.searchParams.get('limit') ?? rows.length);
      const cursor = url.searchParams.get('cursor');
      const start = cursor === null ? 0 : Number(cursor) + 1;
      const page = rows.slice(start, start + limit);
      const last = start + page.length - 1;
      const next = start + page.length < rows.length ? String(last) : null;
      return jsonResponse({ observations: page, next_cursor: next });
    }
    if (url.pathname.includes('/review')) {
      const id = url.pathname.split('/')[3];
      const row = rows.find((r) => r.observation_id === id);
      if (!row) {
        return jsonResponse({ code: 'unknown_observation', message: id }, 404);
      }
      return jsonResponse({ ...row, review: JSON.parse(String(init?.body)) });
    }
    return jsonResponse({ code: 'unknown_project', message: url.pathname }, 404);
  };
}

export function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { 'content-type': 'application/json' },
  });
}
