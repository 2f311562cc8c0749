/**
 * Aggregation mirroring the harness `summarize()` bit for bit.
 *
 * Rows are sorted by (algorithm, snr, pilot length, trial, iteration with
 * the final sentinel last, user) and every mean/std uses plain
 * left-to-right summation, so the numbers here equal the Python side's
 * exactly for the same CSV bytes.
 */

import { FINAL_ITERATION, ResultRow } from "./schema.js";

export interface FinalStat {
  algorithm: string;
  snr_db: number;
  pilot_len: number;
  trials: number;
  nmse_mean: number;
  nmse_std: number;
}

export interface IterationStat {
  algorithm: string;
  snr_db: number;
  pilot_len: number;
  iteration: number;
  nmse_mean: number;
  count: number;
}

function sortKey(row: ResultRow): [string, number, number, number, number, number] {
  const iter = row.iteration === FINAL_ITERATION ? Number.POSITIVE_INFINITY : row.iteration;
  return [row.algorithm, row.snr_db, row.pilot_len, row.trial, iter, row.user];
}

export function sortRows(rows: ResultRow[]): ResultRow[] {
  return [...rows].sort((a, b) => {
    const ka = sortKey(a);
    const kb = sortKey(b);
    for (let i = 0; i < ka.length; i++) {
      if (ka[i] < kb[i]) return -1;
      if (ka[i] > kb[i]) return 1;
    }
    return 0;
  });
}

export function seqMeanStd(values: number[]): { mean: number; std: number } {
  const n = values.length;
  let total = 0.0;
  for (const v of values) total += v;
  const mean = total / n;
  if (n < 2) return { mean, std: 0.0 };
  let acc = 0.0;
  for (const v of values) acc += (v - mean) ** 2;
  return { mean, std: Math.sqrt(acc / (n - 1)) };
}

export function finalStats(rows: ResultRow[]): FinalStat[] {
  const groups = new Map<string, { key: [string, number, number]; values: number[] }>();
  for (const row of sortRows(rows)) {
    if (row.iteration !== FINAL_ITERATION || row.user !== 0) continue;
    const key: [string, number, number] = [row.algorithm, row.snr_db, row.pilot_len];
    const id = JSON.stringify(key);
    if (!groups.has(id)) groups.set(id, { key, values: [] });
    groups.get(id)!.values.push(row.mean_nmse);
  }
  const out = [...groups.values()].sort((a, b) => compareKeys(a.key, b.key));
  return out.map(({ key, values }) => {
    const { mean, std } = seqMeanStd(values);
    return {
      algorithm: key[0],
      snr_db: key[1],
      pilot_len: key[2],
      trials: values.length,
      nmse_mean: mean,
      nmse_std: std,
    };
  });
}

export function iterationStats(rows: ResultRow[]): IterationStat[] {
  const groups = new Map<string, { key: [string, number, number, number]; values: number[] }>();
  for (const row of sortRows(rows)) {
    if (row.iteration === FINAL_ITERATION || row.user !== 0) continue;
    const key: [string, number, number, number] =
      [row.algorithm, row.snr_db, row.pilot_len, row.iteration];
    const id = JSON.stringify(key);
    if (!groups.has(id)) groups.set(id, { key, values: [] });
    groups.get(id)!.values.push(row.mean_nmse);
  }
  const out = [...groups.values()].sort((a, b) => compareKeys(a.key, b.key));
  return out.map(({ key, values }) => ({
    algorithm: key[0],
    snr_db: key[1],
    pilot_len: key[2],
    iteration: key[3],
    nmse_mean: seqMeanStd(values).mean,
    count: values.length,
  }));
}

function compareKeys(a: (string | number)[], b: (string | number)[]): number {
  for (let i = 0; i < a.length; i++) {
    if (a[i] < b[i]) return -1;
    if (a[i] > b[i]) return 1;
  }
  return 0;
}
