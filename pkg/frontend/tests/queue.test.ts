import { describe, expect, it } from 'vitest';

import { ConsoleApi } from '../src/client.js';
import { ReviewQueue, buildDecision, validateDecision } from '../src/queue.js';
import { fixtureRows, pagingFetch, RecordedRequest } from './fixtures.js';
import type { Detection } from '../src/types.js';

const box: Detection = {
  label_id: 0,
  bbox: { x_min: 0.1, y_min: 0.1, x_max: 0.4, y_max: 0.4 },
  confidence: 1.0,
};

describe('decision validation', () => {
  it('accepts confirm and refute without boxes', () => {
    expect(validateDecision('confirm', [])).toEqual({ ok: true });
    expect(validateDecision('refute', [])).toEqual({ ok: true });
  });

  it('rejects refute with drawn boxes before any request', () => {
    const check = validateDecision('refute', [box]);
    expect(check.ok).toBe(false);
    expect(() => buildDecision('refute', [box], 'me')).toThrow(/refute/);
  });

  it('correct carries the drawn boxes', () => {
    const decision = buildDecision('correct', [box], 'me');
    expect(decision.corrected_detections).toEqual([box]);
    // zero drawn boxes is permitted for correct
    expect(buildDecision('correct', [], 'me').corrected_detections).toEqual([]);
  });
});

describe('review queue ordering', () => {
  it('mirrors the server listing order over a 25-observation fixture', async () => {
    const rows = fixtureRows(25);
    const api = new ConsoleApi('http://server.test', pagingFetch(rows));
    const queue = new ReviewQueue(api, 'rip-pilot', 10);
    await queue.loadAll();
    expect(queue.items.map((r) => r.observation_id)).toEqual(
      rows.map((r) => r.observation_id),
    );
  });

  it('pages never re-sort or drop rows under odd page sizes', async () => {
    const rows = fixtureRows(25);
    for (const pageSize of [1, 7, 25, 40]) {
      const api = new ConsoleApi('http://server.test', pagingFetch(rows));
      const queue = new ReviewQueue(api, 'rip-pilot', pageSize);
      await queue.loadAll();
      expect(queue.items.map((r) => r.observation_id)).toEqual(
        rows.map((r) => r.observation_id),
      );
    }
  });

  it('advances past submitted rows in order', async () => {
    const rows = fixtureRows(5);
    const log: RecordedRequest[] = [];
    const api = new ConsoleApi('http://server.test', pagingFetch(rows, log));
    const queue = new ReviewQueue(api, 'rip-pilot', 2);
    await queue.loadMore();

    expect(queue.current?.observation_id).toBe('obs-000');
    await queue.review('confirm', [], 'expert');
    expect(queue.current?.observation_id).toBe('obs-001');
    await queue.review('correct', [box], 'expert');
    expect(queue.current?.observation_id).toBe('obs-002');

    const reviewPosts = log.filter((r) => r.url.includes('/review'));
    const reviewedIds = reviewPosts.map(
      (r) => new URL(r.url).pathname.split('/')[3],
    );
    expect(reviewedIds).toEqual(['obs-000', 'obs-001']);
  });

  it('client-side validation failure sends nothing', async () => {
    const rows = fixtureRows(3);
    const log: RecordedRequest[] = [];
    const api = new ConsoleApi('http://server.test', pagingFetch(rows, log));
    const queue = new ReviewQueue(api, 'rip-pilot', 10);
    await queue.loadMore();
    const before = log.length;
    await expect(queue.review('refute', [box], 'expert')).rejects.toThrow(/refute/);
    expect(log.length).toBe(before); // no request left the client
    expect(queue.current?.observation_id).toBe('obs-000'); // queue did not advance
  });
});
