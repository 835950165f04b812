/**
 * Standalone figure renderer.
 *
 *   node dist/cli.js --kind sweep-lines --metric slo_satisfaction \
 *       --in "out/scenario/sweep.csv=adaptive 100ms" [--in ...] --out fig.svg
 *   node dist/cli.js --kind tier-grid --metric slo_satisfaction \
 *       --in out/hetero/sweep.csv --out grid.svg
 *   node dist/cli.js --kind timeseries-panel \
 *       --in out/scenario/20devices/seed1/timeseries.csv --out panel.svg
 *
 * `--in` takes `path[=label]` and may repeat; a `*` in the path's final
 * segment is expanded against the directory listing.  Exit codes: 0 on
 * success, 1 on any input/schema error.
 */

import { readdirSync, readFileSync, writeFileSync } from "node:fs";
import { basename, dirname, join } from "node:path";

import { TableError } from "./csv.js";
import {
  LabeledSweep, renderSweepLines, renderTierGrid, renderTimeSeriesPanel,
} from "./figures.js";
import { parseSweepTable, parseTimeSeries } from "./tables.js";

export interface CliOptions {
  kind: "sweep-lines" | "tier-grid" | "timeseries-panel";
  inputs: { path: string; label: string }[];
  metric: string;
  title: string;
  out: string;
}

export function parseArgs(argv: string[]): CliOptions {
  let kind = "";
  let metric = "";
  let title = "";
  let out = "";
  const inputs: { path: string; label: string }[] = [];
  for (let i = 0; i < argv.length; i += 1) {
    const arg = argv[i] as string;
    const next = (): string => {
      i += 1;
      const value = argv[i];
      if (value === undefined) {
        throw new TableError(`missing value after ${arg}`);
      }
      return value;
    };
    switch (arg) {
      case "--kind":
        kind = next();
        break;
      case "--metric":
        metric = next();
        break;
      case "--title":
        title = next();
        break;
      case "--out":
        out = next();
        break;
      case "--in": {
        const spec = next();
        const eq = spec.indexOf("=");
        if (eq >= 0) {
          inputs.push({ path: spec.slice(0, eq), label: spec.slice(eq + 1) });
        } else {
          inputs.push({ path: spec, label: "" });
        }
        break;
      }
      default:
        throw new TableError(`unknown argument ${arg}`);
    }
  }
  if (!["sweep-lines", "tier-grid", "timeseries-panel"].includes(kind)) {
    throw new TableError("--kind must be sweep-lines | tier-grid | timeseries-panel");
  }
  if (inputs.length === 0 || !out) {
    throw new TableError("--in and --out are required");
  }
  if (kind !== "timeseries-panel" && !metric) {
    throw new TableError(`--metric is required for ${kind}`);
  }
  return {
    kind: kind as CliOptions["kind"],
    inputs,
    metric,
    title: title || metric || kind,
    out,
  };
}

/** Expand a `*` in the final path segment against the directory listing. */
export function expandInputs(inputs: { path: string; label: string }[]):
    { path: string; label: string }[] {
  const out: { path: string; label: string }[] = [];
  for (const input of inputs) {
    const name = basename(input.path);
    if (!name.includes("*")) {
      out.push(input);
      continue;
    }
    const dir = dirname(input.path);
    const pattern = new RegExp(
      `^${name.split("*").map(escapeRegExp).join(".*")}$`,
    );
    const matches = readdirSync(dir).filter((f) => pattern.test(f)).sort();
    if (matches.length === 0) {
      throw new TableError(`no files match ${input.path}`);
    }
    for (const match of matches) {
      out.push({ path: join(dir, match), label: input.label || match });
    }
  }
  return out;
}

function escapeRegExp(value: string): string {
  return value.replace(/[.*+?^${}()|[\]\\]/g, "\\$&");
}

export function render(opts: CliOptions): string {
  const inputs = expandInputs(opts.inputs);
  if (opts.kind === "timeseries-panel") {
    const input = inputs[0] as { path: string; label: string };
    const series = parseTimeSeries(readFileSync(input.path, "utf8"), input.path);
    return renderTimeSeriesPanel(series, input.path, opts.title);
  }
  const sweeps: LabeledSweep[] = inputs.map((input, i) => ({
    label: input.label || `series ${i + 1}`,
    source: input.path,
    table: parseSweepTable(readFileSync(input.path, "utf8"), input.path),
  }));
  if (opts.kind === "sweep-lines") {
    return renderSweepLines(sweeps, opts.metric, opts.title);
  }
  return renderTierGrid(sweeps, opts.metric, opts.title);
}

export function main(argv: string[]): number {
  try {
    const opts = parseArgs(argv);
    const svg = render(opts);
    writeFileSync(opts.out, svg);
    process.stdout.write(`wrote ${opts.out}\n`);
    return 0;
  } catch (err) {
    process.stderr.write(`error: ${(err as Error).message}\n`);
    return 1;
  }
}

const isEntry = process.argv[1] !== undefined
  && import.meta.url.endsWith(basename(process.argv[1]));
if (isEntry) {
  process.exit(main(process.argv.slice(2)));
}
