/**
 * Hand-rolled SVG charts: line plots with linear or log axes, and bar
 * charts. Output is deterministic text, so re-rendering is byte-stable.
 */

export interface Series {
  x: number[];
  y: number[];
  label: string;
  color?: string;
}

export interface ChartOptions {
  title?: string;
  xLabel?: string;
  yLabel?: string;
  logY?: boolean;
  width?: number;
  height?: number;
}

const PALETTE = [
  "#4477aa", "#ee6677", "#228833", "#ccbb44", "#66ccee",
  "#aa3377", "#bbbbbb", "#000000", "#ee8866",
];

const MARGIN = { left: 64, right: 16, top: 28, bottom: 44 };

function fmtTick(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) return v.toExponential(0).replace("+", "");
  return String(Number(v.toPrecision(4)));
}

function linTicks(lo: number, hi: number, n = 5): number[] {
  if (!(hi > lo)) return [lo];
  const raw = (hi - lo) / n;
  const mag = 10 ** Math.floor(Math.log10(raw));
  const step = [1, 2, 5, 10].map((m) => m * mag).find((s) => s >= raw) ?? raw;
  const first = Math.ceil(lo / step) * step;
  const ticks: number[] = [];
  for (let v = first; v <= hi + 1e-12 * step; v += step) ticks.push(v);
  return ticks;
}

function logTicks(lo: number, hi: number): number[] {
  const ticks: number[] = [];
  for (let e = Math.ceil(Math.log10(lo)); 10 ** e <= hi * (1 + 1e-12); e++) {
    ticks.push(10 ** e);
  }
  return ticks.length ? ticks : [lo];
}

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export function lineChart(series: Series[], opts: ChartOptions = {}): string {
  const width = opts.width ?? 640;
  const height = opts.height ?? 420;
  const plotW = width - MARGIN.left - MARGIN.right;
  const plotH = height - MARGIN.top - MARGIN.bottom;

  const pts = series.flatMap((s) =>
    s.x.map((x, i) => [x, s.y[i]] as const).filter(([x, y]) =>
      Number.isFinite(x) && Number.isFinite(y) && (!opts.logY || y > 0)),
  );
  if (pts.length === 0) {
    throw new Error("nothing to plot: no finite points");
  }
  const xs = pts.map(([x]) => x);
  const ys = pts.map(([, y]) => y);
  const xLo = Math.min(...xs);
  const xHi = Math.max(...xs);
  let yLo = Math.min(...ys);
  let yHi = Math.max(...ys);
  if (yLo === yHi) {
    yLo -= 0.5;
    yHi += 0.5;
    if (opts.logY) {
      yLo = yHi / 10;
      yHi = yHi * 10;
    }
  }

  const sx = (x: number) =>
    MARGIN.left + (xHi > xLo ? ((x - xLo) / (xHi - xLo)) * plotW : plotW / 2);
  const sy = (y: number) => {
    const t = opts.logY
      ? (Math.log10(y) - Math.log10(yLo)) / (Math.log10(yHi) - Math.log10(yLo))
      : (y - yLo) / (yHi - yLo);
    return MARGIN.top + plotH - t * plotH;
  };

  const out: string[] = [];
  out.push(`<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}" font-family="sans-serif" font-size="11">`);
  out.push(`<rect width="${width}" height="${height}" fill="white"/>`);
  if (opts.title) {
    out.push(`<text x="${width / 2}" y="16" text-anchor="middle" font-size="13">${esc(opts.title)}</text>`);
  }

  const yTicks = opts.logY ? logTicks(yLo, yHi) : linTicks(yLo, yHi);
  for (const v of yTicks) {
    const y = sy(v);
    out.push(`<line x1="${MARGIN.left}" y1="${y.toFixed(2)}" x2="${width - MARGIN.right}" y2="${y.toFixed(2)}" stroke="#dddddd"/>`);
    out.push(`<text x="${MARGIN.left - 6}" y="${(y + 3).toFixed(2)}" text-anchor="end">${fmtTick(v)}</text>`);
  }
  for (const v of linTicks(xLo, xHi, 6)) {
    const x = sx(v);
    out.push(`<line x1="${x.toFixed(2)}" y1="${MARGIN.top}" x2="${x.toFixed(2)}" y2="${height - MARGIN.bottom}" stroke="#eeeeee"/>`);
    out.push(`<text x="${x.toFixed(2)}" y="${height - MARGIN.bottom + 14}" text-anchor="middle">${fmtTick(v)}</text>`);
  }
  out.push(`<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${plotW}" height="${plotH}" fill="none" stroke="#333333"/>`);
  if (opts.xLabel) {
    out.push(`<text x="${MARGIN.left + plotW / 2}" y="${height - 8}" text-anchor="middle">${esc(opts.xLabel)}</text>`);
  }
  if (opts.yLabel) {
    out.push(`<text x="14" y="${MARGIN.top + plotH / 2}" text-anchor="middle" transform="rotate(-90 14 ${MARGIN.top + plotH / 2})">${esc(opts.yLabel)}</text>`);
  }

  series.forEach((s, i) => {
    const color = s.color ?? PALETTE[i % PALETTE.length];
    const path = s.x
      .map((x, j) => [x, s.y[j]] as const)
      .filter(([x, y]) => Number.isFinite(x) && Number.isFinite(y) && (!opts.logY || y > 0))
      .map(([x, y], j) => `${j === 0 ? "M" : "L"}${sx(x).toFixed(2)} ${sy(y).toFixed(2)}`)
      .join("");
    if (path) {
      out.push(`<path d="${path}" fill="none" stroke="${color}" stroke-width="1.6"/>`);
    }
    const ly = MARGIN.top + 14 * i + 4;
    out.push(`<line x1="${width - MARGIN.right - 120}" y1="${ly}" x2="${width - MARGIN.right - 100}" y2="${ly}" stroke="${color}" stroke-width="2"/>`);
    out.push(`<text x="${width - MARGIN.right - 96}" y="${ly + 3}">${esc(s.label)}</text>`);
  });
  out.push("</svg>");
  return out.join("\n") + "\n";
}

export function barChart(labels: string[], values: number[],
                         opts: ChartOptions = {}): string {
  const width = opts.width ?? 640;
  const height = opts.height ?? 420;
  const plotW = width - MARGIN.left - MARGIN.right;
  const plotH = height - MARGIN.top - MARGIN.bottom;
  if (labels.length === 0 || labels.length !== values.length) {
    throw new Error("bar chart needs matching labels and values");
  }
  const positive = values.filter((v) => v > 0);
  const logY = opts.logY ?? false;
  const yHi = Math.max(...values);
  const yLo = logY ? Math.min(...positive) / 2 : 0;
  const sy = (v: number) => {
    const t = logY
      ? (Math.log10(v) - Math.log10(yLo)) / (Math.log10(yHi) - Math.log10(yLo))
      : (v - yLo) / (yHi - yLo || 1);
    return MARGIN.top + plotH - Math.max(0, Math.min(1, t)) * plotH;
  };

  const out: string[] = [];
  out.push(`<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}" font-family="sans-serif" font-size="11">`);
  out.push(`<rect width="${width}" height="${height}" fill="white"/>`);
  if (opts.title) {
    out.push(`<text x="${width / 2}" y="16" text-anchor="middle" font-size="13">${esc(opts.title)}</text>`);
  }
  const ticks = logY ? logTicks(yLo, yHi) : linTicks(yLo, yHi);
  for (const v of ticks) {
    const y = sy(v);
    out.push(`<line x1="${MARGIN.left}" y1="${y.toFixed(2)}" x2="${width - MARGIN.right}" y2="${y.toFixed(2)}" stroke="#dddddd"/>`);
    out.push(`<text x="${MARGIN.left - 6}" y="${(y + 3).toFixed(2)}" text-anchor="end">${fmtTick(v)}</text>`);
  }
  const slot = plotW / labels.length;
  labels.forEach((label, i) => {
    const v = values[i];
    const x = MARGIN.left + i * slot + slot * 0.15;
    const y = v > 0 || !logY ? sy(Math.max(v, yLo)) : MARGIN.top + plotH;
    out.push(`<rect x="${x.toFixed(2)}" y="${y.toFixed(2)}" width="${(slot * 0.7).toFixed(2)}" height="${(MARGIN.top + plotH - y).toFixed(2)}" fill="${PALETTE[i % PALETTE.length]}"/>`);
    const cx = MARGIN.left + i * slot + slot / 2;
    out.push(`<text x="${cx.toFixed(2)}" y="${height - MARGIN.bottom + 14}" text-anchor="middle" transform="rotate(30 ${cx.toFixed(2)} ${height - MARGIN.bottom + 14})">${esc(label)}</text>`);
  });
  out.push(`<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${plotW}" height="${plotH}" fill="none" stroke="#333333"/>`);
  if (opts.yLabel) {
    out.push(`<text x="14" y="${MARGIN.top + plotH / 2}" text-anchor="middle" transform="rotate(-90 14 ${MARGIN.top + plotH / 2})">${esc(opts.yLabel)}</text>`);
  }
  out.push("</svg>");
  return out.join("\n") + "\n";
}
