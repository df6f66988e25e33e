/**
 * Render harness result CSVs as SVG panels.
 *
 * Two panel styles mirror the experiment layouts: "sweep" plots normalized
 * risk against the width ratio rho = N/d (theory rows as lines, finite-size
 * rows as markers, a Bayes floor as a dotted rule), and "evolution" plots
 * risk against samples consumed with theory asymptotes dashed.  Rendering is
 * a pure function of the CSV bytes, so identical inputs give identical SVG.
 */

import { readFileSync, writeFileSync } from "node:fs";
import { parseCsv } from "./csv.js";

export type Panel = "sweep" | "evolution";

export interface FigureSpec {
  inputCsv: string;
  panel: Panel;
  output: string;
  model?: string;
}

export class SchemaError extends Error {}

export interface ResultRow {
  model: string;
  regime: string;
  source: string;
  rho: number;
  samples: number;
  riskNormalized: number;
}

const REQUIRED_COLUMNS = [
  "experiment", "model", "regime", "source", "d", "N", "rho", "seed",
  "steps", "samples", "risk", "risk_normalized", "config_hash",
];

const WIDTH = 720;
const HEIGHT = 480;
const MARGIN = { left: 64, right: 180, top: 28, bottom: 48 };

const PALETTE = [
  "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
  "#8c564b", "#e377c2", "#17becf", "#7f7f7f", "#bcbd22",
];

export function loadRows(csvText: string, model?: string): ResultRow[] {
  const table = parseCsv(csvText);
  if (table.header.length === 0) {
    throw new SchemaError("empty CSV: no header row");
  }
  for (const column of REQUIRED_COLUMNS) {
    if (!table.header.includes(column)) {
      throw new SchemaError(`missing column: ${column}`);
    }
  }
  const idx = (name: string) => table.header.indexOf(name);
  const rows = table.rows
    .map((r) => ({
      model: r[idx("model")],
      regime: r[idx("regime")],
      source: r[idx("source")],
      rho: Number(r[idx("rho")]),
      samples: Number(r[idx("samples")]),
      riskNormalized: Number(r[idx("risk_normalized")]),
    }))
    .filter((r) => !model || r.model === model)
    .filter((r) => Number.isFinite(r.riskNormalized));
  if (rows.length === 0) {
    throw new SchemaError("no plottable rows after filtering");
  }
  return rows;
}

interface Series {
  regime: string;
  source: string;
  kind: "line" | "markers" | "dashed" | "dotted-rule";
  points: Array<[number, number]>;
}

function groupKey(r: ResultRow): string {
  return `${r.regime}/${r.source}`;
}

function meanBy(points: Array<[number, number]>): Array<[number, number]> {
  const acc = new Map<number, { sum: number; n: number }>();
  for (const [x, y] of points) {
    const cur = acc.get(x) ?? { sum: 0, n: 0 };
    cur.sum += y;
    cur.n += 1;
    acc.set(x, cur);
  }
  return [...acc.entries()]
    .map(([x, { sum, n }]): [number, number] => [x, sum / n])
    .sort((a, b) => a[0] - b[0]);
}

export function buildSeries(rows: ResultRow[], panel: Panel): Series[] {
  const groups = new Map<string, ResultRow[]>();
  for (const row of rows) {
    const key = groupKey(row);
    const list = groups.get(key) ?? [];
    list.push(row);
    groups.set(key, list);
  }
  const series: Series[] = [];
  for (const [key, members] of [...groups.entries()].sort()) {
    const [regime, source] = key.split("/");
    if (panel === "sweep") {
      const pts: Array<[number, number]> = members.map((m) => [m.rho, m.riskNormalized]);
      if (regime === "bayes") {
        series.push({ regime, source, kind: "dotted-rule", points: meanBy(pts) });
      } else if (source === "theory") {
        series.push({ regime, source, kind: "line", points: meanBy(pts) });
      } else {
        series.push({ regime, source, kind: "markers", points: pts });
      }
    } else {
      const pts: Array<[number, number]> = members.map((m) => [m.samples, m.riskNormalized]);
      if (source === "theory") {
        series.push({ regime, source, kind: "dashed", points: meanBy(pts) });
      } else {
        series.push({
          regime,
          source,
          kind: "line",
          points: pts.sort((a, b) => a[0] - b[0]),
        });
      }
    }
  }
  return series;
}

function extent(values: number[]): [number, number] {
  let lo = Math.min(...values);
  let hi = Math.max(...values);
  if (lo === hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  return [lo, hi];
}

function fmt(x: number): string {
  return Number.isInteger(x) ? String(x) : x.toPrecision(4);
}

export function renderSvg(rows: ResultRow[], panel: Panel): string {
  const series = buildSeries(rows, panel);
  const xsAll = series.flatMap((s) =>
    s.kind === "dotted-rule" || s.kind === "dashed" ? [] : s.points.map((p) => p[0]));
  const ysAll = series.flatMap((s) => s.points.map((p) => p[1]));
  const [xLo, xHi] = extent(xsAll.length ? xsAll : [0, 1]);
  const [yLoRaw, yHi] = extent(ysAll);
  const yLo = Math.min(0, yLoRaw);

  const plotW = WIDTH - MARGIN.left - MARGIN.right;
  const plotH = HEIGHT - MARGIN.top - MARGIN.bottom;
  const sx = (x: number) => MARGIN.left + ((x - xLo) / (xHi - xLo)) * plotW;
  const sy = (y: number) => MARGIN.top + (1 - (y - yLo) / (yHi - yLo)) * plotH;

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" ` +
    `viewBox="0 0 ${WIDTH} ${HEIGHT}" data-panel="${panel}" data-x-max="${fmt(xHi)}">`);
  parts.push(`<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`);

  // axes and ticks
  const axis = `stroke="#333" stroke-width="1"`;
  parts.push(`<line x1="${MARGIN.left}" y1="${sy(yLo)}" x2="${MARGIN.left + plotW}" y2="${sy(yLo)}" ${axis}/>`);
  parts.push(`<line x1="${MARGIN.left}" y1="${MARGIN.top}" x2="${MARGIN.left}" y2="${sy(yLo)}" ${axis}/>`);
  for (let i = 0; i <= 4; i++) {
    const xv = xLo + ((xHi - xLo) * i) / 4;
    const yv = yLo + ((yHi - yLo) * i) / 4;
    parts.push(`<text x="${sx(xv)}" y="${HEIGHT - 20}" font-size="11" text-anchor="middle">${fmt(xv)}</text>`);
    parts.push(`<text x="${MARGIN.left - 8}" y="${sy(yv) + 4}" font-size="11" text-anchor="end">${fmt(yv)}</text>`);
  }
  const xLabel = panel === "sweep" ? "width ratio N/d" : "samples";
  parts.push(`<text x="${MARGIN.left + plotW / 2}" y="${HEIGHT - 4}" font-size="12" text-anchor="middle">${xLabel}</text>`);
  parts.push(`<text x="14" y="${MARGIN.top + plotH / 2}" font-size="12" text-anchor="middle" transform="rotate(-90 14 ${MARGIN.top + plotH / 2})">normalized risk</text>`);

  series.forEach((s, i) => {
    const color = PALETTE[i % PALETTE.length];
    parts.push(`<g class="series" data-regime="${s.regime}" data-source="${s.source}" data-kind="${s.kind}">`);
    if (s.kind === "dotted-rule") {
      const y = sy(s.points[0][1]);
      parts.push(`<line x1="${MARGIN.left}" y1="${y}" x2="${MARGIN.left + plotW}" y2="${y}" stroke="${color}" stroke-width="1.5" stroke-dasharray="2 4"/>`);
    } else if (s.kind === "dashed") {
      for (const [, yv] of s.points) {
        const y = sy(yv);
        parts.push(`<line x1="${MARGIN.left}" y1="${y}" x2="${MARGIN.left + plotW}" y2="${y}" stroke="${color}" stroke-width="1.5" stroke-dasharray="7 5"/>`);
      }
    } else if (s.kind === "line") {
      const d = s.points.map(([x, y]) => `${sx(x)},${sy(y)}`).join(" ");
      parts.push(`<polyline points="${d}" fill="none" stroke="${color}" stroke-width="2"/>`);
    } else {
      for (const [x, y] of s.points) {
        parts.push(`<circle cx="${sx(x)}" cy="${sy(y)}" r="3.2" fill="${color}" fill-opacity="0.75"/>`);
      }
    }
    parts.push(`</g>`);
    const ly = MARGIN.top + 16 * i + 8;
    const lx = MARGIN.left + plotW + 12;
    parts.push(`<line x1="${lx}" y1="${ly}" x2="${lx + 22}" y2="${ly}" stroke="${color}" stroke-width="2"${s.kind === "dashed" || s.kind === "dotted-rule" ? ' stroke-dasharray="5 4"' : ""}/>`);
    parts.push(`<text x="${lx + 28}" y="${ly + 4}" font-size="11">${s.regime}/${s.source}</text>`);
  });

  parts.push("</svg>");
  return parts.join("\n");
}

export function render(spec: FigureSpec): void {
  const text = readFileSync(spec.inputCsv, "utf8");
  const rows = loadRows(text, spec.model);
  const svg = renderSvg(rows, spec.panel);
  writeFileSync(spec.output, svg);
}
