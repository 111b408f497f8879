#!/usr/bin/env node
/**
 * CLI for rendering training artifacts into figures.
 *
 *   nrpinn-plots render --kind loss-curves --input runs/x/history.csv --out figs/x
 *   nrpinn-plots render-dir runs/x figs/x
 */

import { FigureRecipe, RecipeKind, render } from "./recipes.js";
import { renderAll } from "./render.js";

function usage(): never {
  console.error(
    "usage: nrpinn-plots render --kind <kind> --input <csv> [--input <csv>] " +
    "--out <path> [--linear] [--panels N]\n" +
    "       nrpinn-plots render-dir <run-dir> <out-dir>");
  process.exit(2);
}

export function main(argv: string[]): number {
  if (argv.length === 0) {
    usage();
  }
  const [command, ...rest] = argv;
  try {
    if (command === "render-dir") {
      if (rest.length !== 2) {
        usage();
      }
      const report = renderAll(rest[0], rest[1]);
      for (const path of report.written) {
        console.log(path);
      }
      if (report.written.length === 0) {
        console.error("no applicable artifacts found");
        return 1;
      }
      return 0;
    }
    if (command !== "render") {
      usage();
    }
    const recipe: FigureRecipe = { kind: "loss-curves", inputs: [], output: "" };
    for (let i = 0; i < rest.length; i++) {
      switch (rest[i]) {
        case "--kind":
          recipe.kind = rest[++i] as RecipeKind;
          break;
        case "--input":
          recipe.inputs.push(rest[++i]);
          break;
        case "--out":
          recipe.output = rest[++i];
          break;
        case "--linear":
          recipe.logY = false;
          break;
        case "--panels":
          recipe.panels = Number(rest[++i]);
          break;
        default:
          usage();
      }
    }
    if (!recipe.output || recipe.inputs.length === 0) {
      usage();
    }
    for (const path of render(recipe)) {
      console.log(path);
    }
    return 0;
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
}

if (process.argv[1] && process.argv[1].endsWith("main.js")) {
  process.exit(main(process.argv.slice(2)));
}
