/** Figure descriptions: which CSV, which columns, where the image goes. */

import * as fs from 'fs';
import * as path from 'path';

export interface FigureSpec {
  /** CSV path, resolved relative to the spec file's directory. */
  input: string;
  x_column: string;
  y_column: string;
  /** Column whose distinct values become one line each; omit for one line. */
  series_column?: string;
  /** Row filter for the line values, e.g. {"stat": "mean"}. */
  filter?: Record<string, string>;
  /** Row filter for error-bar rows; reads the same y_column. */
  error_filter?: Record<string, string>;
  title: string;
  x_label: string;
  y_label: string;
  /** SVG output path, resolved relative to the spec file's directory. */
  output: string;
}

const REQUIRED: (keyof FigureSpec)[] = [
  'input',
  'x_column',
  'y_column',
  'title',
  'x_label',
  'y_label',
  'output',
];

export class SpecError extends Error {}

export function loadFigureSpec(specPath: string): { spec: FigureSpec; baseDir: string } {
  let raw: string;
  try {
    raw = fs.readFileSync(specPath, 'utf8');
  } catch {
    throw new SpecError(`cannot read spec file ${specPath}`);
  }
  let parsed: unknown;
  try {
    parsed = JSON.parse(raw);
  } catch {
    throw new SpecError(`${specPath}: not valid JSON`);
  }
  const spec = parsed as FigureSpec;
  for (const key of REQUIRED) {
    if (typeof spec[key] !== 'string' || spec[key] === '') {
      throw new SpecError(`${specPath}: missing or empty field "${key}"`);
    }
  }
  return { spec, baseDir: path.dirname(specPath) };
}
