/**
 * Minimal CSV handling for the simulator's output tables.
 *
 * The producing side never quotes or escapes fields, so a plain split is
 * both sufficient and keeps this package dependency-free.
 */

export class TableError extends Error {}

export interface RawTable {
  header: string[];
  rows: string[][];
}

export function parseCsv(text: string, source: string): RawTable {
  const lines = text.split(/\r?\n/).filter((line) => line.length > 0);
  if (lines.length === 0) {
    throw new TableError(`${source}: empty table`);
  }
  const header = (lines[0] as string).split(",");
  const rows = lines.slice(1).map((line, i) => {
    const parts = line.split(",");
    if (parts.length !== header.length) {
      throw new TableError(
        `${source}, line ${i + 2}: expected ${header.length} fields, got ${parts.length}`,
      );
    }
    return parts;
  });
  return { header, rows };
}

/** Column accessor that names the file and the missing column on failure. */
export function columnIndex(table: RawTable, name: string, source: string): number {
  const idx = table.header.indexOf(name);
  if (idx < 0) {
    throw new TableError(
      `${source}: missing column '${name}' (header: ${table.header.join(",")})`,
    );
  }
  return idx;
}

export function numberAt(row: string[], idx: number, source: string, line: number): number {
  const raw = row[idx];
  if (raw === undefined || raw === "") {
    return NaN;
  }
  const value = Number(raw);
  if (Number.isNaN(value)) {
    throw new TableError(`${source}, line ${line}: '${raw}' is not a number`);
  }
  return value;
}
