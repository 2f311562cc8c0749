/**
 * Campaign CSV schema shared with the simulation harness.
 *
 * The header is matched verbatim; any drift in column names or order is a
 * hard error that names the offending columns. The `seed` column holds
 * 64-bit values that exceed Number.MAX_SAFE_INTEGER, so it stays a string.
 */

export const CSV_COLUMNS = [
  "algorithm",
  "trial",
  "seed",
  "snr_db",
  "pilot_len",
  "iteration",
  "user",
  "nmse",
  "mean_nmse",
  "residual_norm",
  "common_support_size",
  "channel_checksum",
  "wall_time_ms",
] as const;

export const FINAL_ITERATION = -1;

export interface ResultRow {
  algorithm: string;
  trial: number;
  seed: string;
  snr_db: number;
  pilot_len: number;
  iteration: number;
  user: number;
  nmse: number;
  mean_nmse: number;
  residual_norm: number;
  common_support_size: number;
  channel_checksum: string;
  wall_time_ms: number;
}

const INT_COLUMNS = new Set(["trial", "pilot_len", "iteration", "user", "common_support_size"]);
const FLOAT_COLUMNS = new Set(["snr_db", "nmse", "mean_nmse", "residual_norm", "wall_time_ms"]);

export class SchemaError extends Error {}

export function parseResults(text: string): ResultRow[] {
  const lines = text.split("\n").filter((line) => line.length > 0);
  if (lines.length === 0) {
    throw new SchemaError("empty CSV: no header row");
  }
  const header = lines[0].split(",");
  const expected = CSV_COLUMNS as readonly string[];
  if (header.length !== expected.length || header.some((h, i) => h !== expected[i])) {
    const missing = expected.filter((c) => !header.includes(c));
    const unexpected = header.filter((c) => !expected.includes(c));
    throw new SchemaError(
      `CSV columns do not match the campaign schema; ` +
      `missing: [${missing.join(", ")}], unexpected: [${unexpected.join(", ")}], ` +
      `expected exactly: ${expected.join(",")}`,
    );
  }
  const rows: ResultRow[] = [];
  for (let i = 1; i < lines.length; i++) {
    const parts = lines[i].split(",");
    if (parts.length !== expected.length) {
      throw new SchemaError(`row ${i + 1}: ${parts.length} fields, expected ${expected.length}`);
    }
    const row: Record<string, string | number> = {};
    for (let c = 0; c < expected.length; c++) {
      const name = expected[c];
      const raw = parts[c];
      if (INT_COLUMNS.has(name)) {
        row[name] = parseInt(raw, 10);
      } else if (FLOAT_COLUMNS.has(name)) {
        const v = Number(raw);
        if (Number.isNaN(v)) {
          throw new SchemaError(`row ${i + 1}: column ${name} is not a number: ${raw}`);
        }
        row[name] = v;
      } else {
        row[name] = raw;
      }
    }
    rows.push(row as unknown as ResultRow);
  }
  return rows;
}
