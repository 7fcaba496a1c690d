/** Canvas drawing for detection overlays. */

import { toOverlayRect } from './geometry.js';
import type { Detection, LabelDef } from './types.js';

export function rgbCss(color: [number, number, number]): string {
  return `rgb(${color[0]},${color[1]},${color[2]})`;
}

export function drawDetection(
  ctx: CanvasRenderingContext2D,
  det: Detection,
  labels: LabelDef[],
  options: { dashed?: boolean } = {},
): void {
  const rect = toOverlayRect(det.bbox, ctx.canvas.width, ctx.canvas.height);
  const label = labels.find((l) => l.id === det.label_id);
  const color = label ? rgbCss(label.display_color) : 'rgb(255,0,0)';

  ctx.save();
  ctx.strokeStyle = color;
  ctx.lineWidth = 2;
  ctx.setLineDash(options.dashed ? [6, 4] : []);
  ctx.strokeRect(rect.x, rect.y, rect.w, rect.h);

  const caption = `${label ? label.name : det.label_id} ${(det.confidence * 100).toFixed(0)}%`;
  ctx.font = '12px sans-serif';
  const width = ctx.measureText(caption).width + 6;
  ctx.fillStyle = color;
  ctx.fillRect(rect.x, Math.max(0, rect.y - 16), width, 16);
  ctx.fillStyle = '#fff';
  ctx.fillText(caption, rect.x + 3, Math.max(12, rect.y - 4));
  ctx.restore();
}
