/**
 * The three figure kinds over a campaign CSV, each with a sidecar text
 * file listing the exact plotted values so figures stay auditable without
 * image diffing.
 */

import { finalStats, iterationStats } from "./aggregate.js";
import { ResultRow } from "./schema.js";
import { renderChart, Series } from "./svg.js";

export type FigureKind = "convergence" | "snr" | "pilots";

export interface FigureSpec {
  kind: FigureKind;
  algorithms?: string[];        // optional filter; empty result is an error
}

export interface FigureOutput {
  svg: string;
  sidecar: string;
  warnings: string[];
}

const PALETTE: Record<string, string> = {
  jgc_ce: "#1f77b4",
  gcse: "#d62728",
  wd_omp: "#2ca02c",
};
const FALLBACK_COLORS = ["#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

const LOG_CLIP = 1e-12;

interface PlottedValue {
  algorithm: string;
  x: number;
  value: number;
  n: number;
}

function color(algorithm: string, index: number): string {
  return PALETTE[algorithm] ?? FALLBACK_COLORS[index % FALLBACK_COLORS.length];
}

function applyFilter(rows: ResultRow[], spec: FigureSpec): ResultRow[] {
  if (!spec.algorithms || spec.algorithms.length === 0) return rows;
  const keep = new Set(spec.algorithms);
  const filtered = rows.filter((r) => keep.has(r.algorithm));
  if (filtered.length === 0) {
    throw new Error(
      `algorithm filter [${spec.algorithms.join(", ")}] matches no rows; ` +
      `present: [${[...new Set(rows.map((r) => r.algorithm))].sort().join(", ")}]`,
    );
  }
  return filtered;
}

function uniqueOrThrow(values: number[], what: string, kind: string): number {
  const distinct = [...new Set(values)].sort((a, b) => a - b);
  if (distinct.length !== 1) {
    throw new Error(
      `${kind} figure needs a single ${what} in the CSV, found [${distinct.join(", ")}]; ` +
      `filter the campaign or re-run with one value`,
    );
  }
  return distinct[0];
}

function clipForLog(values: PlottedValue[], warnings: string[]): void {
  for (const v of values) {
    if (v.value < LOG_CLIP) {
      warnings.push(
        `clipped non-positive/tiny value ${v.value} for ${v.algorithm} at x=${v.x} ` +
        `to ${LOG_CLIP} for the log axis`,
      );
      v.value = LOG_CLIP;
    }
  }
}

function collect(rows: ResultRow[], spec: FigureSpec): {
  values: PlottedValue[];
  title: string;
  xLabel: string;
  warnings: string[];
} {
  const warnings: string[] = [];
  if (spec.kind === "snr") {
    const pilot = uniqueOrThrow(rows.map((r) => r.pilot_len), "pilot length", "snr");
    const values = finalStats(rows).map((e) => ({
      algorithm: e.algorithm, x: e.snr_db, value: e.nmse_mean, n: e.trials,
    }));
    clipForLog(values, warnings);
    return { values, warnings, title: `Mean NMSE vs SNR (T = ${pilot})`, xLabel: "SNR [dB]" };
  }
  if (spec.kind === "pilots") {
    const snr = uniqueOrThrow(rows.map((r) => r.snr_db), "SNR", "pilots");
    const values = finalStats(rows).map((e) => ({
      algorithm: e.algorithm, x: e.pilot_len, value: e.nmse_mean, n: e.trials,
    }));
    clipForLog(values, warnings);
    return { values, warnings, title: `Mean NMSE vs pilot length (SNR = ${snr} dB)`, xLabel: "pilot length T" };
  }
  // convergence
  const snr = uniqueOrThrow(rows.map((r) => r.snr_db), "SNR", "convergence");
  const pilot = uniqueOrThrow(rows.map((r) => r.pilot_len), "pilot length", "convergence");
  const values = iterationStats(rows).map((e) => ({
    algorithm: e.algorithm, x: e.iteration, value: e.nmse_mean, n: e.count,
  }));
  clipForLog(values, warnings);
  return {
    values,
    warnings,
    title: `Mean NMSE vs iteration (SNR = ${snr} dB, T = ${pilot})`,
    xLabel: "iteration",
  };
}

export function renderFigure(rows: ResultRow[], spec: FigureSpec, source: string): FigureOutput {
  const filtered = applyFilter(rows, spec);
  const { values, title, xLabel, warnings } = collect(filtered, spec);

  const byAlgorithm = new Map<string, PlottedValue[]>();
  for (const v of values) {
    if (!byAlgorithm.has(v.algorithm)) byAlgorithm.set(v.algorithm, []);
    byAlgorithm.get(v.algorithm)!.push(v);
  }
  const series: Series[] = [...byAlgorithm.keys()].sort().map((alg, i) => ({
    label: alg,
    color: color(alg, i),
    points: byAlgorithm.get(alg)!
      .slice()
      .sort((a, b) => a.x - b.x)
      .map((v) => ({ x: v.x, y: v.value })),
  }));

  const svg = renderChart({ title, xLabel, yLabel: "NMSE", logY: true, series });

  const lines = [
    `# kind=${spec.kind} source=${source}`,
    `# columns: algorithm,x,nmse_mean,n`,
  ];
  for (const v of values) {
    lines.push(`${v.algorithm},${v.x},${v.value},${v.n}`);
  }
  return { svg, sidecar: lines.join("\n") + "\n", warnings };
}

export function sidecarPath(outPath: string): string {
  const dot = outPath.lastIndexOf(".");
  const slash = Math.max(outPath.lastIndexOf("/"), outPath.lastIndexOf("\\"));
  const stem = dot > slash ? outPath.slice(0, dot) : outPath;
  return `${stem}.values.txt`;
}
