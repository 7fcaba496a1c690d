/**
 * Review queue: pages through the server's unreviewed listing in server
 * order (never re-sorts), validates decisions client-side before any
 * request, and advances past submitted rows.
 */

import type { ConsoleApi } from './client.js';
import type { Detection, ObservationRow, ReviewDecision, Verdict } from './types.js';

const PAGE_SIZE = 10;

export function validateDecision(
  verdict: Verdict,
  boxes: Detection[],
): { ok: true } | { ok: false; reason: string } {
  if (verdict !== 'correct' && boxes.length > 0) {
    return { ok: false, reason: `${verdict} must not carry corrected boxes` };
  }
  return { ok: true };
}

export function buildDecision(
  verdict: Verdict,
  boxes: Detection[],
  reviewer: string,
): ReviewDecision {
  const check = validateDecision(verdict, boxes);
  if (!check.ok) {
    throw new Error(check.reason);
  }
  return {
    verdict,
    corrected_detections: verdict === 'correct' ? boxes : [],
    reviewer,
  };
}

export class ReviewQueue {
  private rows: ObservationRow[] = [];
  private cursor: string | null = null;
  private exhausted = false;
  private position = 0;

  constructor(
    private api: ConsoleApi,
    private projectId: string,
    private pageSize: number = PAGE_SIZE,
  ) {}

  /** Rows fetched so far, in exactly the server's listing order. */
  get items(): readonly ObservationRow[] {
    return this.rows;
  }

  get current(): ObservationRow | null {
    return this.rows[this.position] ?? null;
  }

  async loadMore(): Promise<number> {
    if (this.exhausted) {
      return 0;
    }
    const page = await this.api.listObservations(this.projectId, {
      reviewed: false,
      limit: this.pageSize,
      cursor: this.cursor ?? undefined,
    });
    this.rows.push(...page.observations);
    this.cursor = page.next_cursor;
    this.exhausted = page.next_cursor === null;
    return page.observations.length;
  }

  /** Load every remaining page; order mirrors the server listing. */
  async loadAll(): Promise<void> {
    while (!this.exhausted) {
      await this.loadMore();
    }
  }

  /** Submit a review for the current row, then advance to the next one. */
  async review(verdict: Verdict, boxes: Detection[], reviewer: string): Promise<ObservationRow> {
    const row = this.current;
    if (!row) {
      throw new Error('review queue is empty');
    }
    const updated = await this.api.submitReview(
      row.observation_id,
      buildDecision(verdict, boxes, reviewer),
    );
    this.position += 1;
    if (this.position >= this.rows.length && !this.exhausted) {
      await this.loadMore();
    }
    return updated;
  }

  get remaining(): number {
    return this.rows.length - this.position;
  }
}
