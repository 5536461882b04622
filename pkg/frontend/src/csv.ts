import { readFileSync, existsSync } from "fs";
import Papa from "papaparse";

export type Row = Record<string, number | string | null>;

export class SchemaError extends Error {}

/** Reads a CSV with a header row and checks the required columns exist. */
export function loadCsv(path: string, required: readonly string[]): Row[] {
  const text = readFileSync(path, "utf8");
  const parsed = Papa.parse<Row>(text.trim(), {
    delimiter: ",",
    header: true,
    dynamicTyping: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    throw new SchemaError(`${path}: ${parsed.errors[0].message}`);
  }
  const found = parsed.meta.fields ?? [];
  const missing = required.filter((c) => !found.includes(c));
  if (missing.length > 0) {
    throw new SchemaError(
      `${path}: expected columns [${required.join(", ")}], ` +
        `found [${found.join(", ")}], missing [${missing.join(", ")}]`
    );
  }
  return parsed.data;
}

/** Like loadCsv but returns null when the file does not exist. */
export function loadOptionalCsv(
  path: string,
  required: readonly string[]
): Row[] | null {
  if (!existsSync(path)) return null;
  return loadCsv(path, required);
}

/** Extracts one numeric column, dropping rows whose entry is not finite. */
export function column(rows: readonly Row[], name: string): number[] {
  const out: number[] = [];
  for (const row of rows) {
    const cell = row[name];
    if (cell === null || cell === "") continue; // empty cell marks NaN
    const v = Number(cell);
    if (Number.isFinite(v)) out.push(v);
  }
  return out;
}

/** Splits rows into groups keyed by the stringified value of one column. */
export function groupBy(
  rows: readonly Row[],
  name: string
): Map<string, Row[]> {
  const groups = new Map<string, Row[]>();
  for (const row of rows) {
    const key = String(row[name]);
    const bucket = groups.get(key);
    if (bucket) bucket.push(row);
    else groups.set(key, [row]);
  }
  return groups;
}
