/** Reader for the bench results CSV emitted by the estimation backend. */

export interface BenchRow {
  subject: string;
  method: string;
  budget: number;
  repetition: number;
  seed: number;
  samplesUsed: number;
  mean: number | null;
  variance: number | null;
  rae: number | null;
  wallMs: number | null;
}

const REQUIRED = [
  'subject',
  'method',
  'budget',
  'repetition',
  'seed',
  'samples_used',
  'mean',
  'variance',
  'rae',
  'wall_ms',
];

export class SchemaError extends Error {}

function numOrNull(cell: string): number | null {
  if (cell === '' || cell === 'NA') return null;
  const v = Number(cell);
  if (Number.isNaN(v)) throw new SchemaError(`not a number: ${cell}`);
  return v;
}

export function parseBenchCsv(text: string): BenchRow[] {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length === 0) throw new SchemaError('empty CSV: no header row');
  const header = lines[0].split(',');
  for (const col of REQUIRED) {
    if (!header.includes(col)) throw new SchemaError(`missing column: ${col}`);
  }
  const idx = Object.fromEntries(REQUIRED.map((c) => [c, header.indexOf(c)]));
  if (lines.length === 1) throw new SchemaError('empty CSV: no data rows');

  return lines.slice(1).map((line, i) => {
    const cells = line.split(',');
    if (cells.length !== header.length) {
      throw new SchemaError(`row ${i + 1}: expected ${header.length} cells, got ${cells.length}`);
    }
    const cell = (c: string) => cells[idx[c]];
    return {
      subject: cell('subject'),
      method: cell('method'),
      budget: Number(cell('budget')),
      repetition: Number(cell('repetition')),
      seed: Number(cell('seed')),
      samplesUsed: Number(cell('samples_used')),
      mean: numOrNull(cell('mean')),
      variance: numOrNull(cell('variance')),
      rae: numOrNull(cell('rae')),
      wallMs: numOrNull(cell('wall_ms')),
    };
  });
}
