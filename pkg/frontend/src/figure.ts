/**
 * Deterministic two-panel SVG renderer: ergodic gap against cumulative
 * oracle units (top panel) and against wall time (bottom panel), one curve
 * per method.  Output depends only on the parsed logs and the spec: fixed
 * palette, sorted legends, fixed-precision coordinates, no timestamps.
 */

import { RunLog } from "./csv.js";

export interface FigureSpec {
  logX: boolean;
  panels: "both" | "top" | "bottom";
  gapFloor: number;
}

export const DEFAULT_SPEC: FigureSpec = {
  logX: false,
  panels: "both",
  gapFloor: 1e-16,
};

const WIDTH = 760;
const PANEL_HEIGHT = 300;
const MARGIN = { left: 70, right: 170, top: 36, bottom: 48 };

const PALETTE = [
  "#1f77b4",
  "#d62728",
  "#2ca02c",
  "#9467bd",
  "#ff7f0e",
  "#8c564b",
  "#17becf",
  "#7f7f7f",
];

interface Curve {
  label: string;
  xs: number[];
  ys: number[];
  clamped: number;
}

function fmt(v: number): string {
  if (!Number.isFinite(v)) throw new Error(`non-finite coordinate ${v}`);
  return v.toPrecision(7).replace(/\.?0+$/, "").replace(/\.$/, "");
}

function buildCurves(
  logs: RunLog[],
  xOf: (row: { oracleUnits: number; wallMs: number }) => number,
  floor: number,
): Curve[] {
  const curves: Curve[] = [];
  for (const log of logs) {
    const label = log.meta["config.method"] ?? log.rows[0]?.method ?? log.source;
    const xs: number[] = [];
    const ys: number[] = [];
    let clamped = 0;
    for (const row of log.rows) {
      if (row.gapErgodic === null) continue;
      let gap = row.gapErgodic;
      if (gap < floor) {
        gap = floor;
        clamped += 1;
      }
      xs.push(xOf(row));
      ys.push(gap);
    }
    curves.push({ label, xs, ys, clamped });
  }
  curves.sort((a, b) => (a.label < b.label ? -1 : a.label > b.label ? 1 : 0));
  return curves;
}

function niceLogTicks(lo: number, hi: number): number[] {
  const ticks: number[] = [];
  const start = Math.ceil(Math.log10(lo) - 1e-9);
  const stop = Math.floor(Math.log10(hi) + 1e-9);
  for (let e = start; e <= stop; e++) ticks.push(Math.pow(10, e));
  return ticks;
}

function linearTicks(lo: number, hi: number, count = 5): number[] {
  const span = hi - lo;
  if (span <= 0) return [lo];
  const raw = span / count;
  const mag = Math.pow(10, Math.floor(Math.log10(raw)));
  const step = [1, 2, 5, 10].map((m) => m * mag).find((s) => span / s <= count) ?? mag * 10;
  const ticks: number[] = [];
  for (let v = Math.ceil(lo / step) * step; v <= hi + 1e-12 * span; v += step) {
    ticks.push(v);
  }
  return ticks;
}

function tickLabel(v: number): string {
  if (v === 0) return "0";
  const exp = Math.log10(Math.abs(v));
  if (Number.isInteger(exp) && (exp < -3 || exp >= 5)) return `1e${exp}`;
  if (Math.abs(v) >= 1e5 || Math.abs(v) < 1e-3) return v.toExponential(0);
  return `${Number(v.toPrecision(6))}`;
}

function renderPanel(
  curves: Curve[],
  xLabel: string,
  offsetY: number,
  logX: boolean,
  parts: string[],
): void {
  const plotW = WIDTH - MARGIN.left - MARGIN.right;
  const plotH = PANEL_HEIGHT - MARGIN.top - MARGIN.bottom;
  const xs = curves.flatMap((c) => c.xs).filter((v) => !logX || v > 0);
  const ys = curves.flatMap((c) => c.ys);
  if (xs.length === 0 || ys.length === 0) {
    throw new Error("nothing to plot");
  }
  const xLo = Math.min(...xs);
  const xHi = Math.max(...xs);
  const yLo = Math.min(...ys);
  const yHi = Math.max(...ys);
  const xMap = (v: number): number => {
    if (logX) {
      const span = Math.log10(xHi) - Math.log10(xLo) || 1;
      return MARGIN.left + ((Math.log10(v) - Math.log10(xLo)) / span) * plotW;
    }
    const span = xHi - xLo || 1;
    return MARGIN.left + ((v - xLo) / span) * plotW;
  };
  const ySpan = Math.log10(yHi) - Math.log10(yLo) || 1;
  const yMap = (v: number): number =>
    offsetY + MARGIN.top + (1 - (Math.log10(v) - Math.log10(yLo)) / ySpan) * plotH;

  parts.push(
    `<rect x="${MARGIN.left}" y="${offsetY + MARGIN.top}" width="${plotW}" height="${plotH}" fill="none" stroke="#333" stroke-width="1"/>`,
  );
  for (const tick of niceLogTicks(yLo, yHi)) {
    const y = yMap(tick);
    parts.push(
      `<line x1="${MARGIN.left}" y1="${fmt(y)}" x2="${MARGIN.left + plotW}" y2="${fmt(y)}" stroke="#ddd" stroke-width="0.5"/>`,
      `<text x="${MARGIN.left - 6}" y="${fmt(y + 3)}" font-size="10" text-anchor="end">${tickLabel(tick)}</text>`,
    );
  }
  const xTicks = logX ? niceLogTicks(xLo, xHi) : linearTicks(xLo, xHi);
  for (const tick of xTicks) {
    const x = xMap(tick);
    parts.push(
      `<line x1="${fmt(x)}" y1="${offsetY + MARGIN.top + plotH}" x2="${fmt(x)}" y2="${offsetY + MARGIN.top + plotH + 4}" stroke="#333" stroke-width="1"/>`,
      `<text x="${fmt(x)}" y="${offsetY + MARGIN.top + plotH + 16}" font-size="10" text-anchor="middle">${tickLabel(tick)}</text>`,
    );
  }
  let clampedTotal = 0;
  curves.forEach((curve, index) => {
    clampedTotal += curve.clamped;
    const color = PALETTE[index % PALETTE.length];
    const points = curve.xs
      .map((x, i) => (!logX || x > 0 ? `${fmt(xMap(x))},${fmt(yMap(curve.ys[i]))}` : null))
      .filter((p): p is string => p !== null)
      .join(" ");
    parts.push(
      `<polyline points="${points}" fill="none" stroke="${color}" stroke-width="1.5"/>`,
    );
    const ly = offsetY + MARGIN.top + 14 + index * 16;
    const lx = MARGIN.left + plotW + 12;
    parts.push(
      `<line x1="${lx}" y1="${ly - 4}" x2="${lx + 22}" y2="${ly - 4}" stroke="${color}" stroke-width="1.5"/>`,
      `<text x="${lx + 28}" y="${ly}" font-size="11">${curve.label}</text>`,
    );
  });
  parts.push(
    `<text x="${MARGIN.left + plotW / 2}" y="${offsetY + PANEL_HEIGHT - 14}" font-size="12" text-anchor="middle">${xLabel}</text>`,
    `<text x="18" y="${offsetY + MARGIN.top + plotH / 2}" font-size="12" text-anchor="middle" transform="rotate(-90 18 ${offsetY + MARGIN.top + plotH / 2})">gap</text>`,
  );
  if (clampedTotal > 0) {
    parts.push(
      `<text x="${MARGIN.left}" y="${offsetY + MARGIN.top - 8}" font-size="9" fill="#777">${clampedTotal} points clamped to the display floor</text>`,
    );
  }
}

export function renderFigure(logs: RunLog[], spec: FigureSpec = DEFAULT_SPEC): string {
  if (logs.length === 0) {
    throw new Error("at least one input log is required");
  }
  const panels: Array<[string, (row: { oracleUnits: number; wallMs: number }) => number]> = [];
  if (spec.panels !== "bottom") panels.push(["oracle units", (row) => row.oracleUnits]);
  if (spec.panels !== "top") panels.push(["wall time (ms)", (row) => row.wallMs]);
  const height = panels.length * PANEL_HEIGHT;
  const parts: string[] = [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${height}" viewBox="0 0 ${WIDTH} ${height}">`,
    `<rect width="${WIDTH}" height="${height}" fill="white"/>`,
  ];
  panels.forEach(([label, xOf], index) => {
    const curves = buildCurves(logs, xOf, spec.gapFloor);
    renderPanel(curves, label, index * PANEL_HEIGHT, spec.logX, parts);
  });
  parts.push("</svg>");
  return parts.join("\n") + "\n";
}
