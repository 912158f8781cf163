/** Minimal CSV reading for the runner's fixed-format data files. */

import { readFileSync } from "fs";

import { SchemaError } from "./schema.js";

export interface Table {
  columns: string[];
  rows: number[][];
}

export function readCsv(path: string): Table {
  const text = readFileSync(path, "utf-8").trimEnd();
  const lines = text.split("\n");
  if (lines.length === 0 || lines[0].length === 0) {
    throw new SchemaError(`empty csv ${path}`);
  }
  const columns = lines[0].split(",");
  const rows: number[][] = [];
  for (let i = 1; i < lines.length; i++) {
    if (lines[i].length === 0) continue;
    const parts = lines[i].split(",");
    if (parts.length !== columns.length) {
      throw new SchemaError(`ragged row ${i} in ${path}`);
    }
    rows.push(parts.map(Number));
  }
  if (rows.length === 0) {
    throw new SchemaError(`no data rows in ${path}`);
  }
  return { columns, rows };
}

export function column(t: Table, name: string): number[] {
  const i = t.columns.indexOf(name);
  if (i < 0) {
    throw new SchemaError(`missing column ${name} (have ${t.columns.join(",")})`);
  }
  return t.rows.map((r) => r[i]);
}
