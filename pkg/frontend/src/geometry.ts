/**
 * Normalized box <-> device pixel conversion.
 *
 * Detections travel as fractions of the image dimension; the canvas draws in
 * integer pixels. Quantizing to pixels and back moves each edge by at most
 * one pixel at render sizes >= 100px, which is the tolerance review
 * corrections are held to.
 */

import type { BBox } from './types.js';

export interface OverlayRect {
  x: number;
  y: number;
  w: number;
  h: number;
}

export function toOverlayRect(bbox: BBox, renderW: number, renderH: number): OverlayRect {
  if (renderW <= 0 || renderH <= 0) {
    throw new Error(`render dimensions must be positive, got ${renderW}x${renderH}`);
  }
  return {
    x: Math.round(bbox.x_min * renderW),
    y: Math.round(bbox.y_min * renderH),
    w: Math.round((bbox.x_max - bbox.x_min) * renderW),
    h: Math.round((bbox.y_max - bbox.y_min) * renderH),
  };
}

/** Inverse of toOverlayRect, for boxes drawn or edited on the canvas. */
export function fromOverlayRect(rect: OverlayRect, renderW: number, renderH: number): BBox {
  if (renderW <= 0 || renderH <= 0) {
    throw new Error(`render dimensions must be positive, got ${renderW}x${renderH}`);
  }
  const clamp = (v: number) => Math.min(1, Math.max(0, v));
  return {
    x_min: clamp(rect.x / renderW),
    y_min: clamp(rect.y / renderH),
    x_max: clamp((rect.x + rect.w) / renderW),
    y_max: clamp((rect.y + rect.h) / renderH),
  };
}

/** Max per-edge pixel error after a normalized -> pixel -> normalized trip. */
export function roundTripPixelError(bbox: BBox, renderW: number, renderH: number): number {
  const back = fromOverlayRect(toOverlayRect(bbox, renderW, renderH), renderW, renderH);
  return Math.max(
    Math.abs(back.x_min - bbox.x_min) * renderW,
    Math.abs(back.y_min - bbox.y_min) * renderH,
    Math.abs(back.x_max - bbox.x_max) * renderW,
    Math.abs(back.y_max - bbox.y_max) * renderH,
  );
}
