/**
 * Figure recipes over the documented CSV artifact schemas.
 *
 * history.csv    iteration, loss_pde, loss_ic, loss_bc, loss_data,
 *                loss_total, mae, rel_l2, nu_estimate
 * combined.csv   scheme, seed, <history columns>
 * summary.csv    scheme, mae, rel_l2, iterations
 * solution.csv   <coords...>, pred, ref, abs_err   (1 or 2 coordinates)
 * reference.csv  <coords...>, value
 * checkpoint.npk.outer.csv  sweep, task_index, kind, epsilon, loss_start,
 *                loss_end, skipped
 */

import { existsSync, mkdirSync, writeFileSync } from "node:fs";
import { dirname } from "node:path";

import { column, hasColumn, readCsv, SchemaError, Table, textColumn } from "./csv.js";
import { heatmapPng, HeatPanel } from "./png.js";
import { barChart, lineChart, Series } from "./svg.js";

export type RecipeKind =
  | "loss-curves"
  | "metric-curves"
  | "nu-history"
  | "solution-field"
  | "time-slices"
  | "compare-bars"
  | "outer-loss";

export interface FigureRecipe {
  kind: RecipeKind;
  inputs: string[];
  /** output path without extension; the renderer appends .svg or .png */
  output: string;
  logY?: boolean;
  /** expected panel count; rendering fails when the data disagrees */
  panels?: number;
}

export function validateRecipe(recipe: FigureRecipe): void {
  if (recipe.inputs.length === 0) {
    throw new SchemaError("recipe has no inputs");
  }
  for (const input of recipe.inputs) {
    if (!existsSync(input)) {
      throw new SchemaError(`input ${input} does not exist`);
    }
  }
}

function writeOut(path: string, data: string | Buffer): string {
  mkdirSync(dirname(path), { recursive: true });
  writeFileSync(path, data);
  return path;
}

const LOSS_COLUMNS = ["loss_pde", "loss_ic", "loss_bc", "loss_data", "loss_total"];

function requireColumns(table: Table, names: string[]): void {
  for (const name of names) {
    if (!hasColumn(table, name)) {
      throw new SchemaError(`missing column "${name}"`);
    }
  }
}

function historyGroups(table: Table): Map<string, Table> {
  // combined.csv carries (scheme, seed); plain history.csv is one group.
  // Combined tables plot each scheme's first seed.
  if (!hasColumn(table, "scheme")) {
    return new Map([["", table]]);
  }
  const schemes = textColumn(table, "scheme");
  const seeds = hasColumn(table, "seed") ? textColumn(table, "seed")
    : schemes.map(() => "0");
  const groups = new Map<string, Table>();
  const firstSeed = new Map<string, string>();
  table.rows.forEach((row, i) => {
    if (!firstSeed.has(schemes[i])) {
      firstSeed.set(schemes[i], seeds[i]);
    }
    if (seeds[i] !== firstSeed.get(schemes[i])) {
      return;
    }
    const grp = groups.get(schemes[i]) ?? { columns: table.columns, rows: [] };
    grp.rows.push(row);
    groups.set(schemes[i], grp);
  });
  return groups;
}

function renderLossCurves(recipe: FigureRecipe): string[] {
  const table = readCsv(recipe.inputs[0]);
  requireColumns(table, ["iteration", "loss_total"]);
  const groups = historyGroups(table);
  const series: Series[] = [];
  for (const [label, grp] of groups) {
    if (label === "") {
      for (const name of LOSS_COLUMNS) {
        requireColumns(grp, [name]);
        const y = column(grp, name);
        if (y.some((v) => v > 0)) {
          series.push({ x: column(grp, "iteration"), y, label: name.replace("loss_", "") });
        }
      }
    } else {
      series.push({ x: column(grp, "iteration"), y: column(grp, "loss_total"), label });
    }
  }
  const svg = lineChart(series, {
    title: "training loss", xLabel: "iteration", yLabel: "loss",
    logY: recipe.logY ?? true,
  });
  return [writeOut(recipe.output + ".svg", svg)];
}

function renderMetricCurves(recipe: FigureRecipe): string[] {
  const table = readCsv(recipe.inputs[0]);
  requireColumns(table, ["iteration", "mae", "rel_l2"]);
  const groups = historyGroups(table);
  const series: Series[] = [];
  for (const [label, grp] of groups) {
    const prefix = label === "" ? "" : `${label} `;
    series.push({ x: column(grp, "iteration"), y: column(grp, "mae"), label: `${prefix}mae` });
    series.push({ x: column(grp, "iteration"), y: column(grp, "rel_l2"), label: `${prefix}rel_l2` });
  }
  const svg = lineChart(series, {
    title: "error vs reference", xLabel: "iteration", yLabel: "error",
    logY: recipe.logY ?? true,
  });
  return [writeOut(recipe.output + ".svg", svg)];
}

function renderNuHistory(recipe: FigureRecipe): string[] {
  const table = readCsv(recipe.inputs[0]);
  requireColumns(table, ["iteration", "nu_estimate"]);
  const groups = historyGroups(table);
  const series: Series[] = [];
  for (const [label, grp] of groups) {
    const y = column(grp, "nu_estimate");
    if (y.every(Number.isNaN)) {
      continue; // forward-problem history: no viscosity panel
    }
    series.push({ x: column(grp, "iteration"), y, label: label || "estimate" });
  }
  if (series.length === 0) {
    throw new SchemaError('column "nu_estimate" is empty in every row');
  }
  const svg = lineChart(series, {
    title: "viscosity estimate", xLabel: "iteration", yLabel: "nu",
    logY: false,
  });
  return [writeOut(recipe.output + ".svg", svg)];
}

interface FieldData {
  coordNames: string[];
  coords: number[][];
  fields: Map<string, number[]>;
}

function fieldData(table: Table): FieldData {
  const known = ["pred", "ref", "abs_err", "value"];
  const coordNames = table.columns.filter((c) => !known.includes(c));
  const fields = new Map<string, number[]>();
  for (const name of known) {
    if (hasColumn(table, name)) {
      fields.set(name, column(table, name));
    }
  }
  if (fields.size === 0) {
    throw new SchemaError('missing column "pred" (or "value")');
  }
  return { coordNames, coords: coordNames.map((c) => column(table, c)), fields };
}

function toGrid(a: number[], b: number[], v: number[]): number[][] {
  const as = [...new Set(a)].sort((x, y) => x - y);
  const bs = [...new Set(b)].sort((x, y) => x - y);
  const ai = new Map(as.map((x, i) => [x, i]));
  const bi = new Map(bs.map((x, i) => [x, i]));
  const grid = as.map(() => bs.map(() => NaN));
  v.forEach((value, k) => {
    grid[ai.get(a[k])!][bi.get(b[k])!] = value;
  });
  return grid;
}

function renderSolutionField(recipe: FigureRecipe): string[] {
  const table = readCsv(recipe.inputs[0]);
  const data = fieldData(table);
  const panelNames = ["pred", "ref", "abs_err", "value"].filter((n) => data.fields.has(n));
  if (recipe.panels !== undefined && recipe.panels !== panelNames.length) {
    throw new SchemaError(
      `recipe expects ${recipe.panels} panels, data provides ${panelNames.length}`);
  }
  if (data.coordNames.length === 1) {
    const x = data.coords[0];
    const series: Series[] = panelNames
      .filter((n) => n !== "abs_err")
      .map((n) => ({ x, y: data.fields.get(n)!, label: n }));
    const out = [writeOut(recipe.output + ".svg", lineChart(series, {
      title: "solution", xLabel: data.coordNames[0], yLabel: "u", logY: false,
    }))];
    if (data.fields.has("abs_err")) {
      out.push(writeOut(recipe.output + "_err.svg", lineChart(
        [{ x, y: data.fields.get("abs_err")!, label: "abs_err" }],
        { title: "pointwise error", xLabel: data.coordNames[0], yLabel: "|err|", logY: true },
      )));
    }
    return out;
  }
  if (data.coordNames.length !== 2) {
    throw new SchemaError(`cannot render ${data.coordNames.length}-coordinate fields`);
  }
  const [a, b] = data.coords;
  const panels: HeatPanel[] = panelNames.map((n) => ({
    values: toGrid(a, b, data.fields.get(n)!),
    label: n,
  }));
  return [writeOut(recipe.output + ".png", heatmapPng(panels))];
}

function renderTimeSlices(recipe: FigureRecipe): string[] {
  const table = readCsv(recipe.inputs[0]);
  requireColumns(table, ["t", "pred", "ref"]);
  const data = fieldData(table);
  const tIdx = data.coordNames.indexOf("t");
  const spaceIdx = data.coordNames.findIndex((n) => n !== "t");
  const t = data.coords[tIdx];
  const x = data.coords[spaceIdx];
  const times = [...new Set(t)].sort((p, q) => p - q);
  const picks = [0.25, 0.5, 0.75].map(
    (f) => times[Math.min(times.length - 1, Math.round(f * (times.length - 1)))]);
  const series: Series[] = [];
  for (const tv of picks) {
    const sel = t.map((v, i) => i).filter((i) => t[i] === tv);
    sel.sort((i, j) => x[i] - x[j]);
    series.push({
      x: sel.map((i) => x[i]),
      y: sel.map((i) => data.fields.get("ref")![i]),
      label: `ref t=${tv.toFixed(2)}`,
    });
    series.push({
      x: sel.map((i) => x[i]),
      y: sel.map((i) => data.fields.get("pred")![i]),
      label: `pred t=${tv.toFixed(2)}`,
    });
  }
  const svg = lineChart(series, {
    title: "solution slices", xLabel: data.coordNames[spaceIdx], yLabel: "u", logY: false,
  });
  return [writeOut(recipe.output + ".svg", svg)];
}

function renderCompareBars(recipe: FigureRecipe): string[] {
  const table = readCsv(recipe.inputs[0]);
  requireColumns(table, ["scheme", "mae"]);
  const svg = barChart(textColumn(table, "scheme"), column(table, "mae"), {
    title: "final error by initialization", yLabel: "mae", logY: true,
  });
  return [writeOut(recipe.output + ".svg", svg)];
}

function renderOuterLoss(recipe: FigureRecipe): string[] {
  const table = readCsv(recipe.inputs[0]);
  requireColumns(table, ["sweep", "task_index", "loss_start", "loss_end"]);
  const n = table.rows.length;
  const idx = [...Array(n).keys()].map((i) => i);
  const svg = lineChart([
    { x: idx, y: column(table, "loss_start"), label: "before adapt" },
    { x: idx, y: column(table, "loss_end"), label: "after adapt" },
  ], { title: "meta-training task losses", xLabel: "task", yLabel: "loss", logY: true });
  return [writeOut(recipe.output + ".svg", svg)];
}

const RENDERERS: Record<RecipeKind, (r: FigureRecipe) => string[]> = {
  "loss-curves": renderLossCurves,
  "metric-curves": renderMetricCurves,
  "nu-history": renderNuHistory,
  "solution-field": renderSolutionField,
  "time-slices": renderTimeSlices,
  "compare-bars": renderCompareBars,
  "outer-loss": renderOuterLoss,
};

/** Render one recipe; returns the written image paths. */
export function render(recipe: FigureRecipe): string[] {
  validateRecipe(recipe);
  return RENDERERS[recipe.kind](recipe);
}
