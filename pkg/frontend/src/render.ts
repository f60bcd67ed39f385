/**
 * SVG strip renderer.
 *
 * Draws the 1 mm / 5 mm clinical grid, a 1 mV calibration pulse, and
 * the sample trace for one lead.  All geometry is written into element
 * attributes in pixels, so tests can measure the rendering directly.
 * Nothing here ever receives a record name or arm label; the payload
 * only carries the opaque strip id.
 */

import { zoomedGrid, type ZoomedGrid } from "./grid.js";
import type { RenderSpecJson, StripPayload } from "./types.js";

const SVG_NS = "http://www.w3.org/2000/svg";

/** Width of the calibration margin left of the trace, in grid mm. */
export const CAL_MARGIN_MM = 10;

function line(
  x1: number,
  y1: number,
  x2: number,
  y2: number,
  cls: string,
): SVGLineElement {
  const el = document.createElementNS(SVG_NS, "line");
  el.setAttribute("x1", String(x1));
  el.setAttribute("y1", String(y1));
  el.setAttribute("x2", String(x2));
  el.setAttribute("y2", String(y2));
  el.setAttribute("class", cls);
  return el;
}

function gridLines(
  svg: SVGElement,
  grid: ZoomedGrid,
  offsetX: number,
): void {
  const group = document.createElementNS(SVG_NS, "g");
  group.setAttribute("class", "grid");
  const add = (cls: string, xs: number[], vertical: boolean) => {
    for (const v of xs) {
      group.appendChild(
        vertical
          ? line(offsetX + v, 0, offsetX + v, grid.heightPx, cls)
          : line(offsetX, v, offsetX + grid.widthPx, v, cls),
      );
    }
  };
  // Minor first so major lines paint on top.
  add("grid-line minor x", grid.xMinorPx, true);
  add("grid-line minor y", grid.yMinorPx, false);
  add("grid-line major x", grid.xMajorPx, true);
  add("grid-line major y", grid.yMajorPx, false);
  svg.appendChild(group);
}

function calPulse(
  svg: SVGElement,
  spec: RenderSpecJson,
  grid: ZoomedGrid,
): void {
  const y0 = grid.yOfMv(0);
  const y1 = grid.yOfMv(1);
  const mm = (v: number) => v * grid.pxPerMm;
  // Flat lead-in, 0.2 s at 1 mV, flat lead-out.
  const d = [
    `M ${mm(1)} ${y0}`,
    `L ${mm(2.5)} ${y0}`,
    `L ${mm(2.5)} ${y1}`,
    `L ${mm(7.5)} ${y1}`,
    `L ${mm(7.5)} ${y0}`,
    `L ${mm(9)} ${y0}`,
  ].join(" ");
  const path = document.createElementNS(SVG_NS, "path");
  path.setAttribute("d", d);
  path.setAttribute("class", "cal-pulse");
  path.setAttribute("fill", "none");
  svg.appendChild(path);
}

function trace(
  svg: SVGElement,
  samples: number[],
  grid: ZoomedGrid,
  offsetX: number,
): void {
  const points = samples
    .map((v, i) => `${offsetX + grid.xOfSample(i)},${grid.yOfMv(v)}`)
    .join(" ");
  const poly = document.createElementNS(SVG_NS, "polyline");
  poly.setAttribute("points", points);
  poly.setAttribute("class", "trace");
  poly.setAttribute("fill", "none");
  svg.appendChild(poly);
}

/**
 * Render one lead of a strip into the container, replacing previous
 * content.  Returns the created svg element.
 */
export function renderStrip(
  container: HTMLElement,
  payload: StripPayload,
  lead: string,
  zoom: number,
): SVGSVGElement {
  const spec = payload.render[lead];
  const samples = payload.samples[lead];
  if (!spec || !samples) {
    throw new Error(`strip has no lead ${lead}`);
  }
  const grid = zoomedGrid(spec, zoom);
  const calPx = CAL_MARGIN_MM * grid.pxPerMm;

  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("width", String(calPx + grid.widthPx));
  svg.setAttribute("height", String(grid.heightPx));
  svg.setAttribute("class", "strip");
  svg.setAttribute("data-zoom", String(zoom));

  const area = document.createElementNS(SVG_NS, "rect");
  area.setAttribute("x", String(calPx));
  area.setAttribute("y", "0");
  area.setAttribute("width", String(grid.widthPx));
  area.setAttribute("height", String(grid.heightPx));
  area.setAttribute("class", "trace-area");
  svg.appendChild(area);

  gridLines(svg, grid, calPx);
  calPulse(svg, spec, grid);
  trace(svg, samples, grid, calPx);

  container.replaceChildren(svg);
  return svg;
}
