import * as fs from 'node:fs';
import * as path from 'node:path';
import { describe, expect, it } from 'vitest';

import { parseBenchCsv, SchemaError } from '../src/csv.js';
import { parsePaving } from '../src/paving.js';

const FIXTURES = path.join(__dirname, 'fixtures');

describe('bench CSV parsing', () => {
  it('reads the backend-produced fixture', () => {
    const rows = parseBenchCsv(fs.readFileSync(path.join(FIXTURES, 'sphere_bench.csv'), 'utf8'));
    expect(rows.length).toBe(27);
    expect(rows[0].subject).toBe('sphere-d2');
    expect(rows[0].rae).toBeGreaterThan(0);
    expect(rows[0].wallMs).toBeNull();
  });

  it('names the missing column', () => {
    expect(() => parseBenchCsv('subject,method\nfoo,dmc')).toThrow(/missing column: budget/);
  });

  it('rejects an empty file', () => {
    expect(() => parseBenchCsv('')).toThrow(SchemaError);
  });

  it('rejects a header-only file', () => {
    const header = 'subject,method,budget,repetition,seed,samples_used,mean,variance,rae,wall_ms';
    expect(() => parseBenchCsv(header)).toThrow(/no data rows/);
  });
});

describe('paving JSON parsing', () => {
  it('reads the backend-produced fixture', () => {
    const paving = parsePaving(fs.readFileSync(path.join(FIXTURES, 'circle_paving.json'), 'utf8'));
    expect(paving.inner.length).toBeGreaterThan(0);
    expect(paving.outer.length).toBeGreaterThan(0);
    expect(paving.exhausted).toBe(true);
    expect(paving.vars).toEqual(['x', 'y']);
  });

  it('names the missing field', () => {
    expect(() => parsePaving('{"inner": []}')).toThrow(/missing paving field: accuracy/);
  });
});
