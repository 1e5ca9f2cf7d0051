/**
 * Perplexity-vs-progress curves from run directories.
 *
 * Each run directory must hold a metrics.csv; its config.snapshot (when
 * present) supplies the group key that decides line colors, so e.g. a k1
 * sweep within one scheme shares a single color. The x axis is log-scaled
 * train sequences or train time.
 */

import { readFileSync } from "node:fs";
import { basename, join } from "node:path";

import { CsvError, parseKeyValues, parseMetricsCsv, RunSeries } from "./csv.js";
import { linePlot, LineSeries, PALETTE } from "./svg.js";

export type XAxis = "sequences" | "time";
export type GroupBy = "scheme" | "dataset" | "architecture" | "k2" | "run";

export interface LoadedRun {
  series: RunSeries;
  group: string;
}

function groupKey(snapshot: Map<string, string>, groupBy: GroupBy, fallback: string): string {
  switch (groupBy) {
    case "scheme":
      return snapshot.has("scheme") ? `scheme ${snapshot.get("scheme")}` : fallback;
    case "dataset":
      return snapshot.get("dataset") ?? fallback;
    case "k2":
      return snapshot.has("k2") ? `k2=${snapshot.get("k2")}` : fallback;
    case "architecture": {
      const r = snapshot.get("num_layers");
      const g = snapshot.get("hidden_size");
      return r && g ? `${r}x${g}` : fallback;
    }
    case "run":
      return fallback;
  }
}

export function loadRun(dir: string, groupBy: GroupBy): LoadedRun {
  const metricsPath = join(dir, "metrics.csv");
  let text: string;
  try {
    text = readFileSync(metricsPath, "utf-8");
  } catch (err) {
    throw new CsvError(`${metricsPath}: ${(err as Error).message}`);
  }
  const label = basename(dir.replace(/\/+$/, ""));
  const series = parseMetricsCsv(text, metricsPath, label);
  let group = label;
  try {
    const snapshot = parseKeyValues(readFileSync(join(dir, "config.snapshot"), "utf-8"));
    group = groupKey(snapshot, groupBy, label);
  } catch {
    // snapshot is optional; each run then gets its own color group
  }
  return { series, group };
}

export function perplexityFigure(runs: LoadedRun[], x: XAxis): string {
  const groups = [...new Set(runs.map((r) => r.group))];
  const colorOf = new Map(groups.map((g, i) => [g, PALETTE[i % PALETTE.length]]));
  const series: LineSeries[] = runs.map((r) => ({
    label: r.series.label,
    color: colorOf.get(r.group)!,
    xs: r.series.points.map((p) => (x === "sequences" ? p.sequences : p.wallMs / 1000)),
    ys: r.series.points.map((p) => p.perplexity),
  }));
  return linePlot(series, {
    title: "Test perplexity during training",
    xLabel: x === "sequences" ? "train sequences" : "train time [s]",
    yLabel: "perplexity",
  });
}

export function plotPerplexity(runDirs: string[], x: XAxis, groupBy: GroupBy): string {
  if (runDirs.length === 0) {
    throw new CsvError("no run directories given");
  }
  return perplexityFigure(runDirs.map((d) => loadRun(d, groupBy)), x);
}
