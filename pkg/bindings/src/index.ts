// Thin scripting wrapper over the partition-tree CLI. All numerics stay in
// the native core; this layer only marshals tables to the CLI's documented
// file formats (CSV data, JSON schema/model/metrics, JSONL bins).

import { execFileSync } from "node:child_process";
import {
  copyFileSync,
  mkdtempSync,
  readFileSync,
  rmSync,
  writeFileSync,
} from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

export type ColumnValues = Array<number | string>;
export type Table = Record<string, ColumnValues>;

export interface FitOptions {
  forest?: number;
  maxSplits?: number;
  explorationFraction?: number;
  minSamplesLeaf?: number;
  minSamplesLeafX?: number;
  minTargetVolume?: number;
  expansionFactor?: number;
  maxFeatures?: number;
  maxSamples?: number;
  seed?: number;
  threads?: number;
  /** column names to force categorical even when their values are numeric */
  categorical?: string[];
}

export interface BinRecord {
  y: Record<string, [number, number] | string[]>;
  value: number;
  mass: number;
}

export interface RowBins {
  bins: BinRecord[];
  normalizer: number;
  uniform_fallback: boolean;
}

export class UsageError extends Error {}
export class DataError extends Error {}

type SchemaColumn = {
  name: string;
  kind: "continuous" | { categorical: string[] };
  role: "covariate" | "outcome";
};

const BIN = process.env.PARTITION_TREE_BIN ?? "partition-tree";

function run(args: string[]): string {
  try {
    return execFileSync(BIN, args, { encoding: "utf-8" });
  } catch (err) {
    const e = err as { status?: number; stderr?: string; message: string };
    const detail = (e.stderr ?? e.message).trim();
    if (e.status === 2) throw new UsageError(detail);
    throw new DataError(detail);
  }
}

function csvField(v: number | string): string {
  const s = typeof v === "number" ? String(v) : v;
  return /[",\n\r]/.test(s) ? `"${s.replace(/"/g, '""')}"` : s;
}

function writeCsv(path: string, names: string[], table: Table, n: number): void {
  const lines = [names.join(",")];
  for (let i = 0; i < n; i++) {
    lines.push(names.map((name) => csvField(table[name][i])).join(","));
  }
  writeFileSync(path, lines.join("\n") + "\n", "utf-8");
}

function inferColumn(
  name: string,
  values: ColumnValues,
  role: "covariate" | "outcome",
  forceCategorical: boolean,
): SchemaColumn {
  const allNumeric = values.every((v) => typeof v === "number");
  if (allNumeric && !forceCategorical) return { name, kind: "continuous", role };
  const labels = [...new Set(values.map(String))];
  if (allNumeric) {
    labels.sort((a, b) => Number(a) - Number(b));
  } else {
    labels.sort();
  }
  return { name, kind: { categorical: labels }, role };
}

function tableLength(table: Table, what: string): number {
  const names = Object.keys(table);
  if (names.length === 0) throw new UsageError(`${what} table has no columns`);
  const n = table[names[0]].length;
  for (const name of names) {
    if (table[name].length !== n) {
      throw new UsageError(`${what} column ${name} has ragged length`);
    }
  }
  return n;
}

function fitFlags(options: FitOptions): string[] {
  const flags: string[] = [];
  const push = (flag: string, v: number | undefined) => {
    if (v !== undefined) flags.push(flag, String(v));
  };
  push("--forest", options.forest);
  push("--max-splits", options.maxSplits);
  push("--exploration-frac", options.explorationFraction);
  push("--min-samples-leaf", options.minSamplesLeaf);
  push("--min-samples-leaf-x", options.minSamplesLeafX);
  push("--min-target-volume", options.minTargetVolume);
  push("--expansion-factor", options.expansionFactor);
  push("--max-features", options.maxFeatures);
  push("--max-samples", options.maxSamples);
  push("--seed", options.seed);
  push("--threads", options.threads);
  return flags;
}

export class Estimator {
  private workdir: string;
  private released = false;
  readonly modelPath: string;
  readonly columns: SchemaColumn[];

  private constructor(workdir: string, modelPath: string, columns: SchemaColumn[]) {
    this.workdir = workdir;
    this.modelPath = modelPath;
    this.columns = columns;
  }

  /** Fit a tree (or forest, with options.forest = B) on column tables. */
  static fit(x: Table, y: Table, options: FitOptions = {}): Estimator {
    const nx = tableLength(x, "covariate");
    const ny = tableLength(y, "outcome");
    if (nx !== ny) throw new UsageError(`row mismatch: ${nx} covariate vs ${ny} outcome`);
    const overlap = Object.keys(x).filter((name) => name in y);
    if (overlap.length) throw new UsageError(`columns in both tables: ${overlap}`);

    const force = new Set(options.categorical ?? []);
    const columns: SchemaColumn[] = [
      ...Object.keys(x).map((n) => inferColumn(n, x[n], "covariate", force.has(n))),
      ...Object.keys(y).map((n) => inferColumn(n, y[n], "outcome", force.has(n))),
    ];
    const workdir = mkdtempSync(join(tmpdir(), "ptree-"));
    const schemaPath = join(workdir, "schema.json");
    const dataPath = join(workdir, "train.csv");
    const modelPath = join(workdir, "model.json");
    writeFileSync(schemaPath, JSON.stringify({ columns }), "utf-8");
    writeCsv(dataPath, columns.map((c) => c.name), { ...x, ...y }, nx);
    run([
      "fit",
      "--data", dataPath,
      "--schema", schemaPath,
      "--out", modelPath,
      ...fitFlags(options),
    ]);
    return new Estimator(workdir, modelPath, columns);
  }

  /** Wrap an existing model file written by save() or the CLI. */
  static load(path: string): Estimator {
    const doc = JSON.parse(readFileSync(path, "utf-8"));
    const columns: SchemaColumn[] = doc.schema.columns;
    const workdir = mkdtempSync(join(tmpdir(), "ptree-"));
    const modelPath = join(workdir, "model.json");
    copyFileSync(path, modelPath);
    return new Estimator(workdir, modelPath, columns);
  }

  save(path: string): void {
    this.assertLive();
    copyFileSync(this.modelPath, path);
  }

  /** Normalized conditional density at each (x, y) row. */
  predictDensity(x: Table, y: Table): number[] {
    this.assertLive();
    const dataPath = this.writeRows({ ...x, ...y }, "density_in.csv");
    const outPath = join(this.workdir, "density_out.csv");
    run(["predict", "--model", this.modelPath, "--data", dataPath,
         "--mode", "density", "--out", outPath]);
    const lines = readFileSync(outPath, "utf-8").trim().split("\n");
    return lines.slice(1).map(Number);
  }

  /** Predictive histogram over the outcome box for each covariate row. */
  predictiveBins(x: Table): RowBins[] {
    this.assertLive();
    const dataPath = this.writeRows(x, "bins_in.csv");
    const outPath = join(this.workdir, "bins_out.jsonl");
    run(["predict", "--model", this.modelPath, "--data", dataPath,
         "--mode", "bins", "--out", outPath]);
    return readFileSync(outPath, "utf-8")
      .trim()
      .split("\n")
      .map((line) => JSON.parse(line) as RowBins);
  }

  /** Mean negative log predictive density over the rows. */
  logLoss(x: Table, y: Table): number {
    this.assertLive();
    const dataPath = this.writeRows({ ...x, ...y }, "eval_in.csv");
    const outPath = join(this.workdir, "metrics.json");
    run(["evaluate", "--model", this.modelPath, "--data", dataPath,
         "--metrics", "logloss", "--out", outPath]);
    const report = JSON.parse(readFileSync(outPath, "utf-8"));
    return report[0].value as number;
  }

  /** Normalized gain-based covariate importances. */
  featureImportance(): Record<string, number> {
    this.assertLive();
    const dataPath = this.writeRows(this.placeholderRow(), "imp_in.csv");
    const outPath = join(this.workdir, "importance.json");
    run(["evaluate", "--model", this.modelPath, "--data", dataPath,
         "--metrics", "importance", "--out", outPath]);
    const report = JSON.parse(readFileSync(outPath, "utf-8"));
    return report[0].value as Record<string, number>;
  }

  /** Release the temporary working directory; later calls raise. */
  dispose(): void {
    if (!this.released) {
      rmSync(this.workdir, { recursive: true, force: true });
      this.released = true;
    }
  }

  private assertLive(): void {
    if (this.released) throw new UsageError("estimator handle has been released");
  }

  private writeRows(table: Table, filename: string): string {
    const names = Object.keys(table);
    const n = tableLength(table, "input");
    const path = join(this.workdir, filename);
    writeCsv(path, names, table, n);
    return path;
  }

  private placeholderRow(): Table {
    const table: Table = {};
    for (const col of this.columns) {
      table[col.name] =
        col.kind === "continuous" ? [0] : [col.kind.categorical[0]];
    }
    return table;
  }
}
