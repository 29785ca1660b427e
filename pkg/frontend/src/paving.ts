/** Reader for the paving JSON emitted by the `pave` subcommand. */

import { SchemaError } from './csv.js';

export type Bounds = [number, number][];

export interface Paving {
  accuracy: number;
  exhausted: boolean;
  inner: Bounds[];
  outer: Bounds[];
  vars?: string[];
  subject?: string;
}

export function parsePaving(text: string): Paving {
  let doc: unknown;
  try {
    doc = JSON.parse(text);
  } catch (e) {
    throw new SchemaError(`paving file is not valid JSON: ${(e as Error).message}`);
  }
  const d = doc as Record<string, unknown>;
  for (const key of ['accuracy', 'exhausted', 'inner', 'outer']) {
    if (!(key in d)) throw new SchemaError(`missing paving field: ${key}`);
  }
  const boxes = (raw: unknown, name: string): Bounds[] => {
    if (!Array.isArray(raw)) throw new SchemaError(`paving field ${name} must be a list`);
    return raw.map((b) => {
      if (!Array.isArray(b) || b.some((iv) => !Array.isArray(iv) || iv.length !== 2)) {
        throw new SchemaError(`paving field ${name}: boxes are lists of [lo, hi] pairs`);
      }
      return b as Bounds;
    });
  };
  return {
    accuracy: d.accuracy as number,
    exhausted: d.exhausted as boolean,
    inner: boxes(d.inner, 'inner'),
    outer: boxes(d.outer, 'outer'),
    vars: d.vars as string[] | undefined,
    subject: d.subject as string | undefined,
  };
}
