/**
 * Typed views over the simulator's two table formats.
 *
 * Sweep tables:   devices,seed_count,metric,mean,min,max
 * Time series:    time_ms,active_devices,mean_threshold,running_sr,
 *                 running_accuracy,queue_len,deployed_model,batch_size
 */

import { columnIndex, numberAt, parseCsv, TableError } from "./csv.js";

export interface MetricBand {
  devices: number[];
  mean: number[];
  min: number[];
  max: number[];
}

export interface SweepTable {
  /** metric name -> per-device-count band, device counts ascending */
  metrics: Map<string, MetricBand>;
  deviceCounts: number[];
}

export function parseSweepTable(text: string, source: string): SweepTable {
  const table = parseCsv(text, source);
  const cols = ["devices", "seed_count", "metric", "mean", "min", "max"].map(
    (name) => columnIndex(table, name, source),
  ) as [number, number, number, number, number, number];
  if (table.rows.length === 0) {
    throw new TableError(`${source}: sweep table has no data rows`);
  }
  const metrics = new Map<string, MetricBand>();
  const counts = new Set<number>();
  table.rows.forEach((row, i) => {
    const devices = numberAt(row, cols[0], source, i + 2);
    const metric = row[cols[2]] as string;
    const band = metrics.get(metric) ?? { devices: [], mean: [], min: [], max: [] };
    band.devices.push(devices);
    band.mean.push(numberAt(row, cols[3], source, i + 2));
    band.min.push(numberAt(row, cols[4], source, i + 2));
    band.max.push(numberAt(row, cols[5], source, i + 2));
    metrics.set(metric, band);
    counts.add(devices);
  });
  for (const band of metrics.values()) {
    const order = band.devices
      .map((d, i) => [d, i] as [number, number])
      .sort((a, b) => a[0] - b[0])
      .map(([, i]) => i);
    band.devices = order.map((i) => band.devices[i] as number);
    band.mean = order.map((i) => band.mean[i] as number);
    band.min = order.map((i) => band.min[i] as number);
    band.max = order.map((i) => band.max[i] as number);
  }
  return { metrics, deviceCounts: [...counts].sort((a, b) => a - b) };
}

export interface TimeSeries {
  timeS: number[];
  activeDevices: number[];
  meanThreshold: number[];
  runningSr: number[];
  runningAccuracy: number[];
  queueLen: number[];
}

export function parseTimeSeries(text: string, source: string): TimeSeries {
  const table = parseCsv(text, source);
  const idx = {
    time: columnIndex(table, "time_ms", source),
    active: columnIndex(table, "active_devices", source),
    threshold: columnIndex(table, "mean_threshold", source),
    sr: columnIndex(table, "running_sr", source),
    acc: columnIndex(table, "running_accuracy", source),
    queue: columnIndex(table, "queue_len", source),
  };
  if (table.rows.length === 0) {
    throw new TableError(`${source}: time series has no data rows`);
  }
  const out: TimeSeries = {
    timeS: [], activeDevices: [], meanThreshold: [],
    runningSr: [], runningAccuracy: [], queueLen: [],
  };
  table.rows.forEach((row, i) => {
    out.timeS.push(numberAt(row, idx.time, source, i + 2) / 1000.0);
    out.activeDevices.push(numberAt(row, idx.active, source, i + 2));
    out.meanThreshold.push(numberAt(row, idx.threshold, source, i + 2));
    out.runningSr.push(numberAt(row, idx.sr, source, i + 2));
    out.runningAccuracy.push(numberAt(row, idx.acc, source, i + 2));
    out.queueLen.push(numberAt(row, idx.queue, source, i + 2));
  });
  return out;
}
