/**
 * Console entry point: project inspector, review queue with box editing,
 * model publishing, and snapshot export. Plain DOM, no framework; all state
 * lives on the server.
 */

import { ConsoleApi, ServerError } from './client.js';
import { fromOverlayRect } from './geometry.js';
import { drawDetection } from './overlay.js';
import { ReviewQueue, validateDecision } from './queue.js';
import type { Detection, LabelDef, ProjectManifest, Verdict } from './types.js';

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

interface DrawnBox {
  x: number;
  y: number;
  w: number;
  h: number;
  labelId: number;
}

class ConsoleApp {
  private api: ConsoleApi | null = null;
  private manifest: ProjectManifest | null = null;
  private queue: ReviewQueue | null = null;
  private drawnBoxes: DrawnBox[] = [];
  private dragStart: { x: number; y: number } | null = null;
  private image = new Image();

  connect(): void {
    const base = ($<HTMLInputElement>('server-url')).value.trim();
    const projectId = ($<HTMLInputElement>('project-id')).value.trim();
    this.api = new ConsoleApi(base);
    this.api
      .getManifest(projectId)
      .then(async (manifest) => {
        this.manifest = manifest;
        $('project-name').textContent = `${manifest.name} (${manifest.project_id})`;
        this.queue = new ReviewQueue(this.api!, projectId);
        await this.queue.loadMore();
        this.showCurrent();
      })
      .catch((err) => this.report(err));
  }

  private labels(): LabelDef[] {
    return this.manifest ? this.manifest.labels : [];
  }

  private showCurrent(): void {
    const row = this.queue?.current ?? null;
    this.drawnBoxes = [];
    $('queue-count').textContent = this.queue ? `${this.queue.remaining} to review` : '';
    const canvas = $<HTMLCanvasElement>('viewer');
    const ctx = canvas.getContext('2d')!;
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    if (!row) {
      $('detail').textContent = 'Queue is empty.';
      return;
    }
    $('detail').textContent =
      `${row.observation_id} · captured ${row.captured_at} · model ${row.model_version}`;
    this.image = new Image();
    this.image.onload = () => this.redraw();
    this.image.src = this.api!.mediaUrl(row.project_id, row.content_digest);
  }

  private redraw(): void {
    const row = this.queue?.current;
    if (!row) return;
    const canvas = $<HTMLCanvasElement>('viewer');
    const ctx = canvas.getContext('2d')!;
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    ctx.drawImage(this.image, 0, 0, canvas.width, canvas.height);
    for (const det of row.detections) {
      drawDetection(ctx, det, this.labels());
    }
    for (const det of row.server_detections ?? []) {
      drawDetection(ctx, det, this.labels(), { dashed: true }); // server re-score
    }
    ctx.save();
    ctx.strokeStyle = '#ff00ff';
    ctx.setLineDash([2, 2]);
    for (const box of this.drawnBoxes) {
      ctx.strokeRect(box.x, box.y, box.w, box.h);
    }
    ctx.restore();
  }

  beginDrag(ev: MouseEvent): void {
    const rect = ($<HTMLCanvasElement>('viewer')).getBoundingClientRect();
    this.dragStart = { x: ev.clientX - rect.left, y: ev.clientY - rect.top };
  }

  endDrag(ev: MouseEvent): void {
    if (!this.dragStart) return;
    const canvas = $<HTMLCanvasElement>('viewer');
    const rect = canvas.getBoundingClientRect();
    const end = { x: ev.clientX - rect.left, y: ev.clientY - rect.top };
    const x = Math.round(Math.min(this.dragStart.x, end.x));
    const y = Math.round(Math.min(this.dragStart.y, end.y));
    const w = Math.round(Math.abs(end.x - this.dragStart.x));
    const h = Math.round(Math.abs(end.y - this.dragStart.y));
    this.dragStart = null;
    if (w > 2 && h > 2) {
      const labelId = Number(($<HTMLSelectElement>('label-select')).value) || 0;
      this.drawnBoxes.push({ x, y, w, h, labelId });
      this.redraw();
    }
  }

  clearBoxes(): void {
    this.drawnBoxes = [];
    this.redraw();
  }

  private boxesAsDetections(): Detection[] {
    const canvas = $<HTMLCanvasElement>('viewer');
    return this.drawnBoxes.map((box) => ({
      label_id: box.labelId,
      bbox: fromOverlayRect(box, canvas.width, canvas.height),
      confidence: 1.0,
    }));
  }

  submit(verdict: Verdict): void {
    if (!this.queue) return;
    // drawn boxes are passed as-is; validation rejects stray boxes on
    // confirm/refute before any request leaves the browser
    const boxes = this.boxesAsDetections();
    const check = validateDecision(verdict, boxes);
    if (!check.ok) {
      this.report(new Error(check.reason));
      return;
    }
    const reviewer = ($<HTMLInputElement>('reviewer')).value.trim() || 'console';
    this.queue
      .review(verdict, boxes, reviewer)
      .then(() => this.showCurrent())
      .catch((err) => this.report(err));
  }

  publishModel(file: File): void {
    if (!this.api || !this.manifest) return;
    file
      .arrayBuffer()
      .then((bytes) => this.api!.publishModel(this.manifest!.project_id, bytes))
      .then(() => this.report(`published ${file.name}`))
      .catch((err) => this.report(err));
  }

  exportSnapshot(): void {
    if (!this.api || !this.manifest) return;
    this.api
      .exportSnapshot(this.manifest.project_id)
      .then((snap) =>
        this.report(
          `snapshot ${snap.snapshot_id}: ${snap.images.length} images, ` +
          `${snap.annotations.length} annotations`,
        ),
      )
      .catch((err) => this.report(err));
  }

  private report(msg: unknown): void {
    const text =
      msg instanceof ServerError
        ? `${msg.code}: ${msg.message}`
        : msg instanceof Error
          ? msg.message
          : String(msg);
    $('status').textContent = text;
  }
}

const app = new ConsoleApp();

window.addEventListener('DOMContentLoaded', () => {
  $('connect').addEventListener('click', () => app.connect());
  $('confirm').addEventListener('click', () => app.submit('confirm'));
  $('refute').addEventListener('click', () => app.submit('refute'));
  $('correct').addEventListener('click', () => app.submit('correct'));
  $('clear-boxes').addEventListener('click', () => app.clearBoxes());
  $('export-snapshot').addEventListener('click', () => app.exportSnapshot());
  $<HTMLInputElement>('bundle-file').addEventListener('change', (ev) => {
    const file = (ev.target as HTMLInputElement).files?.[0];
    if (file) app.publishModel(file);
  });
  const viewer = $<HTMLCanvasElement>('viewer');
  viewer.addEventListener('mousedown', (ev) => app.beginDrag(ev));
  viewer.addEventListener('mouseup', (ev) => app.endDrag(ev));
});
