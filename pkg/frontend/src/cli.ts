/** CLI: render figure specs into SVG files.
 *
 * Usage:
 *   node dist/src/cli.js spec.json [spec2.json ...]
 *   node dist/src/cli.js --all <directory-of-specs>
 *
 * Exits nonzero on the first failure, naming the offending file/column.
 */

import * as fs from 'fs';
import * as path from 'path';

import { renderSpecFile } from './render';

export function main(argv: string[]): number {
  let specFiles: string[];
  if (argv[0] === '--all') {
    const dir = argv[1];
    if (!dir || !fs.existsSync(dir)) {
      console.error(`error: spec directory not found: ${dir}`);
      return 2;
    }
    specFiles = fs
      .readdirSync(dir)
      .filter((f) => f.endsWith('.json'))
      .sort()
      .map((f) => path.join(dir, f));
  } else {
    specFiles = argv;
  }
  if (specFiles.length === 0) {
    console.error('usage: cli.js <spec.json...> | --all <dir>');
    return 2;
  }
  for (const file of specFiles) {
    try {
      const { output } = renderSpecFile(file);
      console.log(`rendered ${file} -> ${output}`);
    } catch (err) {
      console.error(`error: ${file}: ${(err as Error).message}`);
      return 1;
    }
  }
  return 0;
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
