/** Turn one figure spec plus its CSV into an SVG file. */

import * as fs from 'fs';
import * as path from 'path';

import { buildChart, Point, Series } from './chart';
import { columnIndex, CsvError, parseCsv } from './csv';
import { FigureSpec, loadFigureSpec } from './figspec';

function matches(row: string[], table: { header: string[] }, filter?: Record<string, string>): boolean {
  if (!filter) return true;
  for (const [key, value] of Object.entries(filter)) {
    const idx = table.header.indexOf(key);
    if (idx < 0) {
      throw new CsvError(`missing column "${key}" used by a row filter`);
    }
    if (row[idx] !== value) return false;
  }
  return true;
}

function numeric(cell: string, column: string): number {
  const v = Number(cell);
  if (!Number.isFinite(v)) {
    throw new CsvError(`column "${column}" holds non-numeric value "${cell}"`);
  }
  return v;
}

export function renderSpec(spec: FigureSpec, baseDir: string): { output: string; svg: string } {
  const inputPath = path.resolve(baseDir, spec.input);
  let text: string;
  try {
    text = fs.readFileSync(inputPath, 'utf8');
  } catch {
    throw new CsvError(`cannot read input CSV ${inputPath}`);
  }
  const table = parseCsv(text);
  const xi = columnIndex(table, spec.x_column);
  const yi = columnIndex(table, spec.y_column);
  const si = spec.series_column ? columnIndex(table, spec.series_column) : -1;

  const valueRows = table.rows.filter((r) => matches(r, table, spec.filter));
  if (valueRows.length === 0) {
    throw new CsvError('no rows left after applying the filter');
  }

  // error bars come from sibling rows selected by error_filter, keyed on (x, series)
  const errByKey = new Map<string, number>();
  if (spec.error_filter) {
    for (const r of table.rows.filter((r) => matches(r, table, spec.error_filter))) {
      const key = `${r[xi]}|${si >= 0 ? r[si] : ''}`;
      errByKey.set(key, numeric(r[yi], spec.y_column));
    }
  }

  const byLabel = new Map<string, Point[]>();
  for (const r of valueRows) {
    const label = si >= 0 ? r[si] : spec.y_column;
    const point: Point = { x: numeric(r[xi], spec.x_column), y: numeric(r[yi], spec.y_column) };
    const err = errByKey.get(`${r[xi]}|${si >= 0 ? r[si] : ''}`);
    if (err !== undefined) point.err = err;
    if (!byLabel.has(label)) byLabel.set(label, []);
    byLabel.get(label)!.push(point);
  }

  const series: Series[] = [...byLabel.keys()].sort().map((label) => ({
    label,
    points: byLabel.get(label)!.slice().sort((a, b) => a.x - b.x),
  }));

  const svg = buildChart({
    title: spec.title,
    xLabel: spec.x_label,
    yLabel: spec.y_label,
    series,
  });
  const output = path.resolve(baseDir, spec.output);
  fs.mkdirSync(path.dirname(output), { recursive: true });
  fs.writeFileSync(output, svg);
  return { output, svg };
}

export function renderSpecFile(specPath: string): { output: string; svg: string } {
  const { spec, baseDir } = loadFigureSpec(specPath);
  return renderSpec(spec, baseDir);
}
