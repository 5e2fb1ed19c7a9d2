/** Pure payload -> RGBA pixel buffer rendering (snapshot-testable). */

import { unpackRaster, base64ToFloat32, DecodePayload, PredictPayload } from "./api.js";

/** Binary plate bitmap: solid pixels white, holes dark. */
export function renderGeometry(payload: DecodePayload): Uint8ClampedArray {
  const [rows, cols] = payload.grid;
  const bits = unpackRaster(payload.raster, rows, cols);
  const rgba = new Uint8ClampedArray(rows * cols * 4);
  for (let i = 0; i < rows * cols; i++) {
    const v = bits[i] ? 235 : 25;
    rgba[4 * i] = v;
    rgba[4 * i + 1] = v;
    rgba[4 * i + 2] = v;
    rgba[4 * i + 3] = 255;
  }
  return rgba;
}

/** Inferno-like stops, enough for a readable heatmap without a dependency. */
const STOPS: Array<[number, number, number]> = [
  [0, 0, 4],
  [87, 16, 110],
  [188, 55, 84],
  [249, 142, 9],
  [252, 255, 164],
];

export function colormap(t: number): [number, number, number] {
  const x = Math.min(1, Math.max(0, t)) * (STOPS.length - 1);
  const i = Math.min(STOPS.length - 2, Math.floor(x));
  const f = x - i;
  const [r0, g0, b0] = STOPS[i];
  const [r1, g1, b1] = STOPS[i + 1];
  return [r0 + f * (r1 - r0), g0 + f * (g1 - g0), b0 + f * (b1 - b0)];
}

/**
 * Field heatmap with a fixed scale; pass the session's running min/max so
 * the colors stay comparable while sliders move.
 */
export function renderField(
  payload: PredictPayload,
  scaleMin: number,
  scaleMax: number,
): Uint8ClampedArray {
  const [rows, cols] = payload.grid;
  const values = base64ToFloat32(payload.field);
  const span = scaleMax - scaleMin || 1;
  const rgba = new Uint8ClampedArray(rows * cols * 4);
  for (let i = 0; i < rows * cols; i++) {
    const [r, g, b] = colormap((values[i] - scaleMin) / span);
    rgba[4 * i] = r;
    rgba[4 * i + 1] = g;
    rgba[4 * i + 2] = b;
    rgba[4 * i + 3] = 255;
  }
  return rgba;
}

/** Draw an RGBA buffer 1:1 into a canvas (caller sizes the canvas). */
export function blit(
  canvas: HTMLCanvasElement,
  rgba: Uint8ClampedArray,
  rows: number,
  cols: number,
): void {
  canvas.width = cols;
  canvas.height = rows;
  const ctx = canvas.getContext("2d");
  if (!ctx) {
    return;
  }
  // copy pins the buffer to a plain ArrayBuffer, which ImageData requires
  const pixels = new Uint8ClampedArray(rgba.length);
  pixels.set(rgba);
  ctx.putImageData(new ImageData(pixels, cols, rows), 0, 0);
}
