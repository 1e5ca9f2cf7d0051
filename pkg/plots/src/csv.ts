/**
 * Parsers for the two CSV formats the training engine writes.
 *
 * metrics.csv: batch_index,sequences_seen,wall_ms,train_loss,test_perplexity
 * bench.csv:   scheme,num_layers,hidden_size,k1,k2,
 *              train_ms_per_batch,sample_ms_per_token,train_cov,sample_cov
 *
 * Every error names the offending file so sweep failures are findable.
 */

export const METRICS_HEADER =
  "batch_index,sequences_seen,wall_ms,train_loss,test_perplexity";
export const BENCH_HEADER =
  "scheme,num_layers,hidden_size,k1,k2,train_ms_per_batch,sample_ms_per_token,train_cov,sample_cov";

export interface RunPoint {
  sequences: number;
  perplexity: number;
  wallMs: number;
}

export interface RunSeries {
  label: string;
  points: RunPoint[];
}

export class CsvError extends Error {}

function splitRows(text: string, source: string, header: string): string[][] {
  const lines = text.split(/\r?\n/).filter((l) => l.trim() !== "");
  if (lines.length === 0) {
    throw new CsvError(`${source}: empty CSV`);
  }
  if (lines[0] !== header) {
    throw new CsvError(`${source}: bad header ${JSON.stringify(lines[0])}`);
  }
  if (lines.length === 1) {
    throw new CsvError(`${source}: no data rows`);
  }
  const width = header.split(",").length;
  return lines.slice(1).map((line, i) => {
    const cells = line.split(",");
    if (cells.length !== width) {
      throw new CsvError(`${source}: row ${i + 2} has ${cells.length} fields, expected ${width}`);
    }
    return cells;
  });
}

function num(cell: string, source: string, row: number, col: string): number {
  const v = Number(cell);
  if (!Number.isFinite(v)) {
    throw new CsvError(`${source}: row ${row} column ${col}: not a number: ${JSON.stringify(cell)}`);
  }
  return v;
}

export function parseMetricsCsv(text: string, source: string, label: string): RunSeries {
  const rows = splitRows(text, source, METRICS_HEADER);
  const points: RunPoint[] = rows.map((cells, i) => ({
    sequences: num(cells[1], source, i + 2, "sequences_seen"),
    wallMs: num(cells[2], source, i + 2, "wall_ms"),
    perplexity: num(cells[4], source, i + 2, "test_perplexity"),
  }));
  for (let i = 1; i < points.length; i++) {
    if (points[i].sequences <= points[i - 1].sequences) {
      throw new CsvError(`${source}: sequences_seen not increasing at row ${i + 2}`);
    }
  }
  return { label, points };
}

export interface BenchRow {
  scheme: number;
  numLayers: number;
  hiddenSize: number;
  k1: number;
  k2: number;
  trainMsPerBatch: number;
  sampleMsPerToken: number;
}

export function parseBenchCsv(text: string, source: string): BenchRow[] {
  const rows = splitRows(text, source, BENCH_HEADER);
  return rows.map((cells, i) => ({
    scheme: num(cells[0], source, i + 2, "scheme"),
    numLayers: num(cells[1], source, i + 2, "num_layers"),
    hiddenSize: num(cells[2], source, i + 2, "hidden_size"),
    k1: num(cells[3], source, i + 2, "k1"),
    k2: num(cells[4], source, i + 2, "k2"),
    trainMsPerBatch: num(cells[5], source, i + 2, "train_ms_per_batch"),
    sampleMsPerToken: num(cells[6], source, i + 2, "sample_ms_per_token"),
  }));
}

/** Parse `key = value` lines (the config.snapshot format). */
export function parseKeyValues(text: string): Map<string, string> {
  const out = new Map<string, string>();
  for (const raw of text.split(/\r?\n/)) {
    const line = raw.split("#", 1)[0].trim();
    if (line === "" || !line.includes("=")) continue;
    const idx = line.indexOf("=");
    out.set(line.slice(0, idx).trim(), line.slice(idx + 1).trim());
  }
  return out;
}
