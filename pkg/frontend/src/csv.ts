/** Minimal CSV reader for the experiment harness output.
 *
 * The harness writes plain comma-separated UTF-8 with a header row, '.'
 * decimals and no quoting, so a straight split is exact here.
 */

export interface Table {
  header: string[];
  rows: string[][];
}

export class SchemaError extends Error {}

export function parseCsv(text: string): Table {
  const lines = text
    .split("\n")
    .map((l) => l.trimEnd())
    .filter((l) => l.length > 0);
  if (lines.length === 0) throw new SchemaError("empty CSV");
  const header = lines[0].split(",");
  const rows = lines.slice(1).map((l) => l.split(","));
  return { header, rows };
}

/** Column accessor that names the missing column in its error. */
export function columnIndex(table: Table, name: string): number {
  const idx = table.header.indexOf(name);
  if (idx < 0) {
    throw new SchemaError(
      `missing column '${name}' (header: ${table.header.join(", ")})`,
    );
  }
  return idx;
}

export function requireColumns(table: Table, names: string[]): void {
  for (const name of names) columnIndex(table, name);
}

export function numColumn(table: Table, name: string): number[] {
  const idx = columnIndex(table, name);
  return table.rows.map((r) => Number(r[idx]));
}

export function strColumn(table: Table, name: string): string[] {
  const idx = columnIndex(table, name);
  return table.rows.map((r) => r[idx]);
}

export function groupBy<T>(
  keys: string[],
  values: T[],
): Map<string, T[]> {
  const out = new Map<string, T[]>();
  keys.forEach((k, i) => {
    const bucket = out.get(k);
    if (bucket) bucket.push(values[i]);
    else out.set(k, [values[i]]);
  });
  return out;
}

export function mean(xs: number[]): number {
  return xs.reduce((a, b) => a + b, 0) / xs.length;
}

export function std(xs: number[]): number {
  if (xs.length < 2) return 0;
  const m = mean(xs);
  return Math.sqrt(xs.reduce((a, b) => a + (b - m) * (b - m), 0) / (xs.length - 1));
}
