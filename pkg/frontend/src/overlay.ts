/**
 * Label-map compositing: per-pixel category ids become palette colors with a
 * uniform opacity; the 255 sentinel (unknown) stays fully transparent.
 */

import { Rgb } from "./palette.js";

export const UNKNOWN = 255;

export function compositeLabels(
  labels: Uint8Array | Uint8ClampedArray,
  palette: Rgb[],
  opacity: number,
): Uint8ClampedArray {
  const alpha = Math.round(Math.min(Math.max(opacity, 0), 1) * 255);
  const out = new Uint8ClampedArray(labels.length * 4);
  for (let i = 0; i < labels.length; i++) {
    const label = labels[i];
    const o = i * 4;
    if (label === UNKNOWN) continue; // leave rgba(0,0,0,0)
    const color = palette[label % palette.length];
    out[o] = color[0];
    out[o + 1] = color[1];
    out[o + 2] = color[2];
    out[o + 3] = alpha;
  }
  return out;
}

/** Extract per-pixel labels from RGBA canvas data of a grayscale label PNG. */
export function labelsFromRgba(rgba: Uint8ClampedArray): Uint8Array {
  const labels = new Uint8Array(rgba.length / 4);
  for (let i = 0; i < labels.length; i++) {
    labels[i] = rgba[i * 4]; // r == g == b == category id
  }
  return labels;
}
