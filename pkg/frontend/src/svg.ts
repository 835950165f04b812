/**
 * Deterministic SVG plotting primitives.
 *
 * Everything is assembled from strings with fixed two-decimal coordinate
 * precision, so rendering the same inputs always yields byte-identical
 * files (the byte-stability contract of this package).
 */

export interface Rect {
  x: number;
  y: number;
  width: number;
  height: number;
}

export interface Scale {
  (value: number): number;
  domain: [number, number];
}

export function linearScale(domain: [number, number], range: [number, number]): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0 || 1;
  const scale = ((value: number) => r0 + ((value - d0) / span) * (r1 - r0)) as Scale;
  scale.domain = domain;
  return scale;
}

export function niceTicks(lo: number, hi: number, count = 5): number[] {
  if (hi <= lo) {
    return [lo];
  }
  const rawStep = (hi - lo) / count;
  const mag = Math.pow(10, Math.floor(Math.log10(rawStep)));
  const step = [1, 2, 5, 10].map((m) => m * mag).find((s) => (hi - lo) / s <= count) ?? mag * 10;
  const first = Math.ceil(lo / step) * step;
  const ticks: number[] = [];
  for (let v = first; v <= hi + 1e-9; v += step) {
    ticks.push(Number(v.toFixed(10)));
  }
  return ticks;
}

const fmt = (v: number): string => v.toFixed(2);

export function polyline(xs: number[], ys: number[], stroke: string, width = 2,
                         dash = ""): string {
  const points = xs.map((x, i) => `${fmt(x)},${fmt(ys[i] as number)}`).join(" ");
  const dashAttr = dash ? ` stroke-dasharray="${dash}"` : "";
  return `<polyline fill="none" stroke="${stroke}" stroke-width="${width}"${dashAttr} points="${points}"/>`;
}

/** Shaded band between an upper and a lower series (min-max over seeds). */
export function band(xs: number[], upper: number[], lower: number[], fill: string): string {
  const forward = xs.map((x, i) => `${fmt(x)},${fmt(upper[i] as number)}`);
  const back = [...xs.keys()].reverse().map(
    (i) => `${fmt(xs[i] as number)},${fmt(lower[i] as number)}`,
  );
  return `<polygon fill="${fill}" fill-opacity="0.25" stroke="none" points="${[...forward, ...back].join(" ")}"/>`;
}

export function text(x: number, y: number, value: string, size = 12,
                     anchor = "start", rotate = 0): string {
  const transform = rotate ? ` transform="rotate(${rotate} ${fmt(x)} ${fmt(y)})"` : "";
  return `<text x="${fmt(x)}" y="${fmt(y)}" font-size="${size}" font-family="sans-serif" text-anchor="${anchor}"${transform}>${escapeXml(value)}</text>`;
}

export function escapeXml(value: string): string {
  return value
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function tickLabel(value: number): string {
  if (Number.isInteger(value)) {
    return String(value);
  }
  return String(Number(value.toFixed(4)));
}

export interface AxisOptions {
  xLabel: string;
  yLabel: string;
  yRightLabel?: string;
  yRightScale?: Scale;
}

/** Plot frame: border, ticks and labels for the left/bottom (and optional right) axes. */
export function axes(area: Rect, x: Scale, y: Scale, opts: AxisOptions): string {
  const parts: string[] = [];
  parts.push(
    `<rect x="${fmt(area.x)}" y="${fmt(area.y)}" width="${fmt(area.width)}" height="${fmt(area.height)}" fill="none" stroke="#333" stroke-width="1"/>`,
  );
  for (const tick of niceTicks(x.domain[0], x.domain[1])) {
    const px = x(tick);
    parts.push(`<line x1="${fmt(px)}" y1="${fmt(area.y + area.height)}" x2="${fmt(px)}" y2="${fmt(area.y + area.height + 4)}" stroke="#333"/>`);
    parts.push(text(px, area.y + area.height + 16, tickLabel(tick), 10, "middle"));
  }
  for (const tick of niceTicks(y.domain[0], y.domain[1])) {
    const py = y(tick);
    parts.push(`<line x1="${fmt(area.x - 4)}" y1="${fmt(py)}" x2="${fmt(area.x)}" y2="${fmt(py)}" stroke="#333"/>`);
    parts.push(text(area.x - 6, py + 3, tickLabel(tick), 10, "end"));
    parts.push(`<line x1="${fmt(area.x)}" y1="${fmt(py)}" x2="${fmt(area.x + area.width)}" y2="${fmt(py)}" stroke="#ddd" stroke-width="0.5"/>`);
  }
  parts.push(text(area.x + area.width / 2, area.y + area.height + 32, opts.xLabel, 12, "middle"));
  parts.push(text(area.x - 38, area.y + area.height / 2, opts.yLabel, 12, "middle", -90));
  if (opts.yRightScale && opts.yRightLabel) {
    const right = area.x + area.width;
    for (const tick of niceTicks(opts.yRightScale.domain[0], opts.yRightScale.domain[1])) {
      const py = opts.yRightScale(tick);
      parts.push(`<line x1="${fmt(right)}" y1="${fmt(py)}" x2="${fmt(right + 4)}" y2="${fmt(py)}" stroke="#333"/>`);
      parts.push(text(right + 6, py + 3, tickLabel(tick), 10, "start"));
    }
    parts.push(text(right + 40, area.y + area.height / 2, opts.yRightLabel, 12, "middle", 90));
  }
  return parts.join("\n");
}

export interface LegendEntry {
  label: string;
  color: string;
  dash?: string;
}

export function legend(area: Rect, entries: LegendEntry[]): string {
  const parts: string[] = [];
  entries.forEach((entry, i) => {
    const y = area.y + 14 + i * 16;
    const dashAttr = entry.dash ? ` stroke-dasharray="${entry.dash}"` : "";
    parts.push(`<line x1="${fmt(area.x + 6)}" y1="${fmt(y - 4)}" x2="${fmt(area.x + 26)}" y2="${fmt(y - 4)}" stroke="${entry.color}" stroke-width="2"${dashAttr}/>`);
    parts.push(text(area.x + 30, y, entry.label, 10));
  });
  return parts.join("\n");
}

export function document(width: number, height: number, body: string): string {
  return [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}">`,
    `<rect width="${width}" height="${height}" fill="white"/>`,
    body,
    "</svg>",
    "",
  ].join("\n");
}

export const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                        "#8c564b", "#17becf", "#7f7f7f"];
