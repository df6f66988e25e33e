#!/usr/bin/env node
/**
 * Render a harness CSV to an SVG figure.
 *
 *   lazygap-figures --input sweep.csv --panel sweep --output sweep.svg [--model qf]
 */

import { FigureSpec, Panel, SchemaError, render } from "./figures.js";

function parseArgs(argv: string[]): FigureSpec {
  const opts = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    const value = argv[i + 1];
    if (!key?.startsWith("--") || value === undefined) {
      throw new Error(`malformed arguments near ${key}`);
    }
    opts.set(key.slice(2), value);
  }
  const input = opts.get("input");
  const output = opts.get("output");
  const panel = opts.get("panel");
  if (!input || !output || !panel) {
    throw new Error("required: --input <csv> --panel sweep|evolution --output <svg>");
  }
  if (panel !== "sweep" && panel !== "evolution") {
    throw new Error(`unknown panel ${panel}`);
  }
  return { inputCsv: input, output, panel: panel as Panel, model: opts.get("model") };
}

function main(): number {
  try {
    render(parseArgs(process.argv.slice(2)));
    return 0;
  } catch (err) {
    const kind = err instanceof SchemaError ? "schema" : "usage";
    process.stderr.write(JSON.stringify({ error: kind, message: String(err) }) + "\n");
    return 1;
  }
}

process.exit(main());
