/**
 * Scheme timing comparison from bench.csv files: grouped bars of train
 * ms/batch and sample ms/token per scheme and architecture.
 */

import { readFileSync } from "node:fs";

import { BenchRow, CsvError, parseBenchCsv } from "./csv.js";
import { barPanels, BarGroup, PALETTE } from "./svg.js";

export function loadBench(files: string[]): BenchRow[] {
  if (files.length === 0) {
    throw new CsvError("no bench files given");
  }
  const rows: BenchRow[] = [];
  for (const file of files) {
    let text: string;
    try {
      text = readFileSync(file, "utf-8");
    } catch (err) {
      throw new CsvError(`${file}: ${(err as Error).message}`);
    }
    rows.push(...parseBenchCsv(text, file));
  }
  return rows;
}

function groupsBy(rows: BenchRow[], value: (r: BenchRow) => number): BarGroup[] {
  const arches = [...new Set(rows.map((r) => `${r.numLayers}x${r.hiddenSize}`))];
  return arches.map((arch) => ({
    label: arch,
    bars: rows
      .filter((r) => `${r.numLayers}x${r.hiddenSize}` === arch)
      .sort((a, b) => a.scheme - b.scheme)
      .map((r) => ({
        label: `scheme ${r.scheme}`,
        color: PALETTE[(r.scheme - 1) % PALETTE.length],
        value: value(r),
      })),
  }));
}

export function timingFigure(rows: BenchRow[]): string {
  return barPanels(
    [
      { title: "train ms/batch", yLabel: "ms", groups: groupsBy(rows, (r) => r.trainMsPerBatch) },
      { title: "sample ms/token", yLabel: "ms", groups: groupsBy(rows, (r) => r.sampleMsPerToken) },
    ],
    "Training and sampling cost per scheme",
  );
}

export function plotTiming(files: string[]): string {
  return timingFigure(loadBench(files));
}
