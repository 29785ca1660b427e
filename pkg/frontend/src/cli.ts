#!/usr/bin/env node
/** plots <kind> --in <file> [--in2 <file>] --out <image.svg>
 *
 * kinds: paving | rae_bars | convergence. Exit codes: 0 ok, 1 bad input
 * (schema mismatch names the offending piece), 2 usage error.
 */

import * as fs from 'node:fs';

import { parseBenchCsv, SchemaError } from './csv.js';
import { renderConvergence, renderPaving, renderRaeBars } from './figures.js';
import { parsePaving } from './paving.js';

const KINDS = ['paving', 'rae_bars', 'convergence'];

interface Args {
  kind: string;
  inputs: string[];
  out: string;
}

function parseArgs(argv: string[]): Args {
  const [kind, ...rest] = argv;
  if (!kind || !KINDS.includes(kind)) {
    throw new UsageError(`usage: plots <${KINDS.join('|')}> --in <file> [--in2 <file>] --out <image.svg>`);
  }
  const inputs: string[] = [];
  let out = '';
  for (let i = 0; i < rest.length; i += 1) {
    const flag = rest[i];
    if (flag === '--in' || flag === '--in2') {
      inputs.push(expect(rest, ++i, flag));
    } else if (flag === '--out') {
      out = expect(rest, ++i, flag);
    } else {
      throw new UsageError(`unknown flag ${flag}`);
    }
  }
  if (inputs.length === 0) throw new UsageError('at least one --in file is required');
  if (!out) throw new UsageError('--out is required');
  return { kind, inputs, out };
}

function expect(rest: string[], i: number, flag: string): string {
  if (i >= rest.length) throw new UsageError(`${flag} needs a value`);
  return rest[i];
}

class UsageError extends Error {}

export function run(argv: string[]): number {
  let args: Args;
  try {
    args = parseArgs(argv);
  } catch (e) {
    process.stderr.write(`${(e as Error).message}\n`);
    return 2;
  }
  try {
    let svg: string;
    if (args.kind === 'paving') {
      svg = renderPaving(parsePaving(read(args.inputs[0])));
    } else {
      const rows = args.inputs.flatMap((p) => parseBenchCsv(read(p)));
      svg = args.kind === 'convergence' ? renderConvergence(rows) : renderRaeBars(rows);
    }
    fs.writeFileSync(args.out, svg);
    return 0;
  } catch (e) {
    if (e instanceof SchemaError || e instanceof Error) {
      process.stderr.write(`error: ${e.message}\n`);
      return 1;
    }
    throw e;
  }
}

function read(path: string): string {
  if (!fs.existsSync(path)) throw new SchemaError(`input file not found: ${path}`);
  return fs.readFileSync(path, 'utf8');
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url.endsWith(process.argv[1].split('/').pop() as string);
if (invokedDirectly) {
  process.exit(run(process.argv.slice(2)));
}
