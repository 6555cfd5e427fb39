/** Minimal strict CSV reader for the simulator's comma-separated outputs. */

export interface CsvTable {
  header: string[];
  rows: string[][];
}

export class CsvError extends Error {}

export function parseCsv(text: string): CsvTable {
  const lines = text.split('\n').filter((line) => line.trim().length > 0);
  if (lines.length === 0) {
    throw new CsvError('CSV is empty');
  }
  const header = lines[0].split(',');
  const rows = lines.slice(1).map((line, i) => {
    const cells = line.split(',');
    if (cells.length !== header.length) {
      throw new CsvError(`row ${i + 1} has ${cells.length} cells, header has ${header.length}`);
    }
    return cells;
  });
  if (rows.length === 0) {
    throw new CsvError('CSV has a header but no data rows');
  }
  return { header, rows };
}

export function columnIndex(table: CsvTable, name: string): number {
  const idx = table.header.indexOf(name);
  if (idx < 0) {
    throw new CsvError(`missing column "${name}" (header: ${table.header.join(',')})`);
  }
  return idx;
}
