#!/usr/bin/env node
/** render --csv PATH --kind {sweep|trace} --out DIR */

import { render } from './render.js';

export function main(argv: string[]): number {
  const args = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    const value = argv[i + 1];
    if (!key?.startsWith('--') || value === undefined) {
      console.error('usage: render --csv PATH --kind {sweep|trace} --out DIR');
      return 2;
    }
    args.set(key.slice(2), value);
  }
  const csv = args.get('csv');
  const kind = args.get('kind');
  const out = args.get('out');
  if (!csv || !out || (kind !== 'sweep' && kind !== 'trace')) {
    console.error('usage: render --csv PATH --kind {sweep|trace} --out DIR');
    return 2;
  }
  try {
    const result = render(kind, csv, out);
    for (const file of result.files) {
      console.log(file);
    }
    return 0;
  } catch (err) {
    console.error(`render failed: ${(err as Error).message}`);
    return 1;
  }
}

if (process.argv[1] && /cli\.(ts|js)$/.test(process.argv[1])) {
  process.exit(main(process.argv.slice(2)));
}
