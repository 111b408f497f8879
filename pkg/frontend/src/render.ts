/**
 * Directory-level rendering: map a run directory's artifacts to every
 * applicable figure recipe.
 */

import { readdirSync, statSync } from "node:fs";
import { join, basename, relative } from "node:path";

import { hasColumn, readCsv } from "./csv.js";
import { FigureRecipe, render } from "./recipes.js";

/** Recipes that apply to one artifact file, by schema inspection. */
export function recipesFor(csvPath: string, outDir: string): FigureRecipe[] {
  const name = basename(csvPath);
  const table = readCsv(csvPath);
  const out = (suffix: string) => join(outDir, name.replace(/\.csv$/, "") + "_" + suffix);
  const recipes: FigureRecipe[] = [];

  if (hasColumn(table, "iteration") && hasColumn(table, "loss_total")) {
    recipes.push({ kind: "loss-curves", inputs: [csvPath], output: out("loss") });
    recipes.push({ kind: "metric-curves", inputs: [csvPath], output: out("error") });
    const nuIdx = table.columns.indexOf("nu_estimate");
    if (nuIdx >= 0 && table.rows.some((r) => r[nuIdx] !== "")) {
      recipes.push({ kind: "nu-history", inputs: [csvPath], output: out("nu") });
    }
    return recipes;
  }
  if (hasColumn(table, "pred") || hasColumn(table, "value")) {
    recipes.push({ kind: "solution-field", inputs: [csvPath], output: out("field") });
    if (hasColumn(table, "t") && hasColumn(table, "pred")) {
      recipes.push({ kind: "time-slices", inputs: [csvPath], output: out("slices") });
    }
    return recipes;
  }
  if (hasColumn(table, "scheme") && hasColumn(table, "mae")) {
    recipes.push({ kind: "compare-bars", inputs: [csvPath], output: out("bars") });
    return recipes;
  }
  if (hasColumn(table, "loss_start") && hasColumn(table, "loss_end")) {
    recipes.push({ kind: "outer-loss", inputs: [csvPath], output: out("outer") });
  }
  return recipes;
}

export interface RenderReport {
  written: string[];
  skipped: string[];
}

/** Render every applicable recipe for every CSV under a run directory,
 * mirroring the directory layout so artifact names cannot collide. */
export function renderAll(runDir: string, outDir: string): RenderReport {
  const written: string[] = [];
  const skipped: string[] = [];
  const stack = [runDir];
  while (stack.length) {
    const dir = stack.pop()!;
    for (const entry of readdirSync(dir).sort()) {
      const path = join(dir, entry);
      if (statSync(path).isDirectory()) {
        stack.push(path);
      } else if (entry.endsWith(".csv")) {
        const recipes = recipesFor(path, join(outDir, relative(runDir, dir)));
        if (recipes.length === 0) {
          skipped.push(path);
        }
        for (const recipe of recipes) {
          written.push(...render(recipe));
        }
      }
    }
  }
  return { written, skipped };
}
