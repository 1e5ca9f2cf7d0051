#!/usr/bin/env node
/**
 * plot perplexity --runs <dir>... [--x sequences|time] [--group-by scheme|dataset|architecture|k2|run] --out <file>
 * plot timing --bench <file>... --out <file>
 *
 * Writes deterministic SVG figures. Exit codes: 0 ok, 1 usage/config error,
 * 2 missing or malformed input data.
 */

import { realpathSync, writeFileSync } from "node:fs";
import { pathToFileURL } from "node:url";

import { CsvError } from "./csv.js";
import { GroupBy, plotPerplexity, XAxis } from "./perplexity.js";
import { plotTiming } from "./timing.js";

const USAGE = `usage:
  plot perplexity --runs <dir>... [--x sequences|time] [--group-by scheme|dataset|architecture|k2|run] --out <file>
  plot timing --bench <file>... --out <file>`;

interface Parsed {
  command: string;
  lists: Map<string, string[]>;
  flags: Map<string, string>;
}

const LIST_FLAGS = new Set(["--runs", "--bench"]);
const VALUE_FLAGS = new Set(["--x", "--group-by", "--out"]);

export function parseArgs(argv: string[]): Parsed {
  if (argv.length === 0) {
    throw new UsageError("missing command");
  }
  const [command, ...rest] = argv;
  const lists = new Map<string, string[]>();
  const flags = new Map<string, string>();
  let i = 0;
  while (i < rest.length) {
    const arg = rest[i];
    if (LIST_FLAGS.has(arg)) {
      const values: string[] = [];
      i++;
      while (i < rest.length && !rest[i].startsWith("--")) {
        values.push(rest[i]);
        i++;
      }
      if (values.length === 0) {
        throw new UsageError(`${arg} needs at least one value`);
      }
      lists.set(arg, [...(lists.get(arg) ?? []), ...values]);
    } else if (VALUE_FLAGS.has(arg)) {
      if (i + 1 >= rest.length) {
        throw new UsageError(`${arg} needs a value`);
      }
      flags.set(arg, rest[i + 1]);
      i += 2;
    } else {
      throw new UsageError(`unknown argument ${arg}`);
    }
  }
  return { command, lists, flags };
}

export class UsageError extends Error {}

export function run(argv: string[]): number {
  let parsed: Parsed;
  try {
    parsed = parseArgs(argv);
    const out = parsed.flags.get("--out");
    if (!out) {
      throw new UsageError("--out is required");
    }
    let svg: string;
    if (parsed.command === "perplexity") {
      const runs = parsed.lists.get("--runs");
      if (!runs) {
        throw new UsageError("perplexity needs --runs");
      }
      const x = (parsed.flags.get("--x") ?? "sequences") as XAxis;
      if (x !== "sequences" && x !== "time") {
        throw new UsageError(`--x must be sequences or time, got ${x}`);
      }
      const groupBy = (parsed.flags.get("--group-by") ?? "scheme") as GroupBy;
      if (!["scheme", "dataset", "architecture", "k2", "run"].includes(groupBy)) {
        throw new UsageError(`bad --group-by ${groupBy}`);
      }
      svg = plotPerplexity(runs, x, groupBy);
    } else if (parsed.command === "timing") {
      const bench = parsed.lists.get("--bench");
      if (!bench) {
        throw new UsageError("timing needs --bench");
      }
      svg = plotTiming(bench);
    } else {
      throw new UsageError(`unknown command ${parsed.command}`);
    }
    writeFileSync(out, svg, "utf-8");
    console.log(`wrote ${out}`);
    return 0;
  } catch (err) {
    if (err instanceof UsageError) {
      console.error(`error: ${err.message}\n${USAGE}`);
      return 1;
    }
    if (err instanceof CsvError) {
      console.error(`error: ${err.message}`);
      return 2;
    }
    throw err;
  }
}

const isMain = process.argv[1] !== undefined &&
  import.meta.url === pathToFileURL(realpathSync(process.argv[1])).href;
if (isMain) {
  process.exit(run(process.argv.slice(2)));
}
