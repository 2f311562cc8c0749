#!/usr/bin/env node
/**
 * plots --kind {convergence,snr,pilots} --in results.csv --out fig.svg
 *       [--algorithms name ...]
 *
 * Reads a campaign CSV, renders the requested figure as SVG and writes a
 * sidecar <out-stem>.values.txt listing the plotted values. Rendering is
 * deterministic: identical CSV and flags give identical bytes.
 */

import { readFileSync, realpathSync, writeFileSync } from "node:fs";
import { exit } from "node:process";
import { pathToFileURL } from "node:url";

import { FigureKind, renderFigure, sidecarPath } from "./figures.js";
import { parseResults, SchemaError } from "./schema.js";

const KINDS = new Set(["convergence", "snr", "pilots"]);

interface Args {
  kind: FigureKind;
  input: string;
  output: string;
  algorithms?: string[];
}

function usage(message?: string): never {
  if (message) console.error(`error: ${message}`);
  console.error(
    "usage: plots --kind {convergence,snr,pilots} --in results.csv --out fig.svg " +
    "[--algorithms name ...]",
  );
  exit(2);
}

function parseArgs(argv: string[]): Args {
  let kind: string | undefined;
  let input: string | undefined;
  let output: string | undefined;
  let algorithms: string[] | undefined;
  for (let i = 0; i < argv.length; i++) {
    const flag = argv[i];
    if (flag === "--kind") kind = argv[++i];
    else if (flag === "--in") input = argv[++i];
    else if (flag === "--out") output = argv[++i];
    else if (flag === "--algorithms") {
      algorithms = [];
      while (i + 1 < argv.length && !argv[i + 1].startsWith("--")) {
        algorithms.push(argv[++i]);
      }
    } else usage(`unknown flag ${flag}`);
  }
  if (!kind || !KINDS.has(kind)) usage(`--kind must be one of convergence, snr, pilots`);
  if (!input) usage("--in is required");
  if (!output) usage("--out is required");
  return { kind: kind as FigureKind, input, output, algorithms };
}

export function main(argv: string[]): number {
  const args = parseArgs(argv);
  let text: string;
  try {
    text = readFileSync(args.input, "utf-8");
  } catch (err) {
    console.error(`error: cannot read ${args.input}: ${(err as Error).message}`);
    return 3;
  }
  try {
    const rows = parseResults(text);
    const figure = renderFigure(rows, { kind: args.kind, algorithms: args.algorithms },
                                args.input);
    for (const w of figure.warnings) console.error(`warning: ${w}`);
    writeFileSync(args.output, figure.svg, "utf-8");
    const sidecar = sidecarPath(args.output);
    writeFileSync(sidecar, figure.sidecar, "utf-8");
    console.log(`wrote ${args.output} and ${sidecar}`);
    return 0;
  } catch (err) {
    if (err instanceof SchemaError) {
      console.error(`error: ${err.message}`);
      return 2;
    }
    console.error(`error: ${(err as Error).message}`);
    return 2;
  }
}

const entryUrl = process.argv[1] ? pathToFileURL(realpathSync(process.argv[1])).href : "";
if (entryUrl === import.meta.url) {
  exit(main(process.argv.slice(2)));
}
