/**
 * Figure kinds over the simulator's table files.
 *
 * - sweep-lines:       one line per labeled sweep file, mean vs device
 *                      count with a shaded min-max band over seeds;
 * - tier-grid:         one panel per tier for a metric family
 *                      (`<metric>.<tier>` rows of a sweep table);
 * - timeseries-panel:  active-device share, mean threshold and running
 *                      satisfaction rate on the left axis, running
 *                      accuracy on the right axis.
 */

import { TableError } from "./csv.js";
import { MetricBand, SweepTable, TimeSeries } from "./tables.js";
import {
  AxisOptions, PALETTE, Rect, axes, band, document as svgDocument, legend,
  linearScale, polyline, text,
} from "./svg.js";

export interface LabeledSweep {
  label: string;
  source: string;
  table: SweepTable;
}

const WIDTH = 720;
const HEIGHT = 440;
const MARGIN = { left: 64, right: 70, top: 40, bottom: 48 };

function plotArea(width = WIDTH, height = HEIGHT): Rect {
  return {
    x: MARGIN.left,
    y: MARGIN.top,
    width: width - MARGIN.left - MARGIN.right,
    height: height - MARGIN.top - MARGIN.bottom,
  };
}

function metricBand(sweep: LabeledSweep, metric: string): MetricBand {
  const found = sweep.table.metrics.get(metric);
  if (!found) {
    throw new TableError(
      `${sweep.source}: missing column 'metric=${metric}' ` +
      `(has: ${[...sweep.table.metrics.keys()].sort().join(", ")})`,
    );
  }
  return found;
}

function extent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (Number.isNaN(v)) continue;
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (lo === Infinity) {
    throw new TableError("no finite values to plot");
  }
  if (lo === hi) {
    lo -= 1;
    hi += 1;
  }
  return [lo, hi];
}

export function renderSweepLines(sweeps: LabeledSweep[], metric: string,
                                 title: string): string {
  if (sweeps.length === 0) {
    throw new TableError("sweep-lines figure needs at least one input");
  }
  const bands = sweeps.map((s) => metricBand(s, metric));
  const area = plotArea();
  const allCounts = bands.flatMap((b) => b.devices);
  const allValues = bands.flatMap((b) => [...b.min, ...b.max]);
  const x = linearScale(extent(allCounts), [area.x, area.x + area.width]);
  const pad = (extent(allValues)[1] - extent(allValues)[0]) * 0.05;
  const [vLo, vHi] = extent(allValues);
  const y = linearScale([vLo - pad, vHi + pad], [area.y + area.height, area.y]);

  const parts: string[] = [];
  bands.forEach((b, i) => {
    const color = PALETTE[i % PALETTE.length] as string;
    const xs = b.devices.map(x);
    parts.push(band(xs, b.max.map(y), b.min.map(y), color));
    parts.push(polyline(xs, b.mean.map(y), color));
  });
  parts.push(axes(area, x, y, { xLabel: "devices", yLabel: metric }));
  parts.push(text(WIDTH / 2, 22, title, 14, "middle"));
  parts.push(legend({ x: area.x + 8, y: area.y + 4, width: 0, height: 0 },
                    sweeps.map((s, i) => ({
                      label: s.label,
                      color: PALETTE[i % PALETTE.length] as string,
                    }))));
  return svgDocument(WIDTH, HEIGHT, parts.join("\n"));
}

export function renderTierGrid(sweeps: LabeledSweep[], metric: string,
                               title: string): string {
  if (sweeps.length === 0) {
    throw new TableError("tier-grid figure needs at least one input");
  }
  const prefix = `${metric}.`;
  const tiers = [...new Set(sweeps.flatMap(
    (s) => [...s.table.metrics.keys()]
      .filter((m) => m.startsWith(prefix))
      .map((m) => m.slice(prefix.length)),
  ))].sort();
  if (tiers.length === 0) {
    throw new TableError(
      `${sweeps[0]!.source}: no '${prefix}<tier>' rows for a tier grid`);
  }
  const panelWidth = WIDTH;
  const height = HEIGHT * tiers.length;
  const parts: string[] = [];
  tiers.forEach((tier, t) => {
    const offset = t * HEIGHT;
    const area = plotArea();
    area.y += offset;
    const bands = sweeps.map((s) => metricBand(s, `${metric}.${tier}`));
    const allValues = bands.flatMap((b) => [...b.min, ...b.max]);
    const [vLo, vHi] = extent(allValues);
    const pad = (vHi - vLo) * 0.05;
    const x = linearScale(extent(bands.flatMap((b) => b.devices)),
                          [area.x, area.x + area.width]);
    const y = linearScale([vLo - pad, vHi + pad],
                          [area.y + area.height, area.y]);
    bands.forEach((b, i) => {
      const color = PALETTE[i % PALETTE.length] as string;
      const xs = b.devices.map(x);
      parts.push(band(xs, b.max.map(y), b.min.map(y), color));
      parts.push(polyline(xs, b.mean.map(y), color));
    });
    parts.push(axes(area, x, y, { xLabel: "devices", yLabel: `${metric} (${tier})` }));
    parts.push(text(panelWidth / 2, offset + 22, `${title} — ${tier} tier`, 14,
                    "middle"));
    if (t === 0) {
      parts.push(legend({ x: area.x + 8, y: area.y + 4, width: 0, height: 0 },
                        sweeps.map((s, i) => ({
                          label: s.label,
                          color: PALETTE[i % PALETTE.length] as string,
                        }))));
    }
  });
  return svgDocument(panelWidth, height, parts.join("\n"));
}

export function renderTimeSeriesPanel(series: TimeSeries, source: string,
                                      title: string): string {
  const area = plotArea();
  const x = linearScale(extent(series.timeS), [area.x, area.x + area.width]);
  // Left axis carries percentage-scaled curves: active-device share,
  // mean threshold x100 and the running satisfaction rate.
  const yLeft = linearScale([0, 105], [area.y + area.height, area.y]);
  const maxActive = Math.max(...series.activeDevices, 1);
  const accValues = series.runningAccuracy.filter((v) => !Number.isNaN(v));
  if (accValues.length === 0) {
    throw new TableError(`${source}: running_accuracy column has no values`);
  }
  const [accLo, accHi] = extent(accValues);
  const accPad = Math.max((accHi - accLo) * 0.2, 0.01);
  const yRight = linearScale([accLo - accPad, accHi + accPad],
                             [area.y + area.height, area.y]);

  const xs = series.timeS.map(x);
  const keep = (values: number[]) =>
    values.map((v, i) => [v, i] as [number, number]).filter(([v]) => !Number.isNaN(v));
  const lines: string[] = [];
  const activePct = series.activeDevices.map((a) => (100 * a) / maxActive);
  lines.push(polyline(xs, activePct.map(yLeft), PALETTE[0] as string));
  lines.push(polyline(xs, series.meanThreshold.map((v) => yLeft(100 * v)),
                      PALETTE[1] as string));
  const srPoints = keep(series.runningSr);
  lines.push(polyline(srPoints.map(([, i]) => xs[i] as number),
                      srPoints.map(([v]) => yLeft(v)), PALETTE[2] as string));
  const accPoints = keep(series.runningAccuracy);
  lines.push(polyline(accPoints.map(([, i]) => xs[i] as number),
                      accPoints.map(([v]) => yRight(v)), PALETTE[3] as string,
                      2, "6 3"));

  const opts: AxisOptions = {
    xLabel: "time (s)",
    yLabel: "% scale (active share, threshold x100, running SR)",
    yRightLabel: "running accuracy",
    yRightScale: yRight,
  };
  const parts = [
    ...lines,
    axes(area, x, yLeft, opts),
    text(WIDTH / 2, 22, title, 14, "middle"),
    legend({ x: area.x + 8, y: area.y + 4, width: 0, height: 0 }, [
      { label: "active devices (%)", color: PALETTE[0] as string },
      { label: "mean threshold (x100)", color: PALETTE[1] as string },
      { label: "running SR", color: PALETTE[2] as string },
      { label: "running accuracy (right)", color: PALETTE[3] as string, dash: "6 3" },
    ]),
  ];
  return svgDocument(WIDTH, HEIGHT, parts.join("\n"));
}
