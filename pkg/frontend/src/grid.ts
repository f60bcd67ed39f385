/**
 * Zoomed screen geometry for the clinical grid.
 *
 * The service supplies geometry in millimetres (10 mm per mV, 25 mm
 * per second); a zoom level scales millimetres to pixels uniformly, so
 * the 10 mm/mV : 25 mm/s aspect survives every zoom by construction:
 * 1 mV spans 10 mm while 0.2 s spans 5 mm, a fixed 2:1 ratio.
 */

import type { RenderSpecJson } from "./types.js";

/** Pixels per grid millimetre at zoom 1. */
export const BASE_PX_PER_MM = 4;

export interface ZoomedGrid {
  pxPerMm: number;
  /** Trace area size in pixels (excludes the calibration margin). */
  widthPx: number;
  heightPx: number;
  /** Horizontal pixel of a sample index, from the trace-area origin. */
  xOfSample(index: number): number;
  /** Vertical pixel of a millivolt value; screen y grows downward. */
  yOfMv(mv: number): number;
  xMajorPx: number[];
  xMinorPx: number[];
  yMajorPx: number[];
  yMinorPx: number[];
}

export function zoomedGrid(spec: RenderSpecJson, zoom: number): ZoomedGrid {
  if (!(zoom > 0)) {
    throw new RangeError(`zoom must be positive, got ${zoom}`);
  }
  const pxPerMm = BASE_PX_PER_MM * zoom;
  const heightMm = spec.y_max_mm - spec.y_min_mm;
  const yPx = (mm: number) => (spec.y_max_mm - mm) * pxPerMm;
  return {
    pxPerMm,
    widthPx: spec.width_mm * pxPerMm,
    heightPx: heightMm * pxPerMm,
    xOfSample: (index) => index * spec.mm_per_sample * pxPerMm,
    yOfMv: (mv) => yPx(mv * spec.mm_per_mv),
    xMajorPx: spec.x_major_mm.map((mm) => mm * pxPerMm),
    xMinorPx: spec.x_minor_mm.map((mm) => mm * pxPerMm),
    yMajorPx: spec.y_major_mm.map(yPx),
    yMinorPx: spec.y_minor_mm.map(yPx),
  };
}

/** Height of the 1 mV calibration pulse in pixels. */
export function calPulseHeightPx(
  spec: RenderSpecJson,
  grid: ZoomedGrid,
): number {
  return spec.mm_per_mv * grid.pxPerMm;
}

/** Width of a 0.2 s interval (one major square) in pixels. */
export function majorSquareWidthPx(
  spec: RenderSpecJson,
  grid: ZoomedGrid,
): number {
  return 0.2 * spec.mm_per_s * grid.pxPerMm;
}
