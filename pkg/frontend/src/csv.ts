/**
 * Minimal CSV handling for the training artifacts: comma-separated, one
 * header row, no quoting (the producer never emits commas inside fields).
 */

import { readFileSync } from "node:fs";

export interface Table {
  columns: string[];
  rows: string[][];
}

export class SchemaError extends Error {}

export function parseCsv(text: string): Table {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length === 0) {
    throw new SchemaError("empty CSV file");
  }
  const columns = lines[0].split(",");
  const rows = lines.slice(1).map((l) => l.split(","));
  for (const row of rows) {
    if (row.length !== columns.length) {
      throw new SchemaError(
        `row has ${row.length} fields, header has ${columns.length}`,
      );
    }
  }
  return { columns, rows };
}

export function readCsv(path: string): Table {
  return parseCsv(readFileSync(path, "utf-8"));
}

/** Numeric column accessor; empty cells become NaN. */
export function column(table: Table, name: string): number[] {
  const idx = table.columns.indexOf(name);
  if (idx < 0) {
    throw new SchemaError(`missing column "${name}"`);
  }
  return table.rows.map((r) => (r[idx] === "" ? NaN : Number(r[idx])));
}

export function textColumn(table: Table, name: string): string[] {
  const idx = table.columns.indexOf(name);
  if (idx < 0) {
    throw new SchemaError(`missing column "${name}"`);
  }
  return table.rows.map((r) => r[idx]);
}

export function hasColumn(table: Table, name: string): boolean {
  return table.columns.includes(name);
}
