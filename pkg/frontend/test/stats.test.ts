import { describe, expect, it } from 'vitest';

import { median, groupedMedian } from '../src/stats.js';
import { convergenceSeries } from '../src/figures.js';
import { parseBenchCsv } from '../src/csv.js';

const HEADER = 'subject,method,budget,repetition,seed,samples_used,mean,variance,rae,wall_ms';

describe('median', () => {
  it('odd count takes the middle value', () => {
    expect(median([0.4, 0.1, 0.2])).toBe(0.2);
  });

  it('even count averages the middle pair', () => {
    expect(median([4, 1, 3, 2])).toBe(2.5);
  });

  it('rejects empty input', () => {
    expect(() => median([])).toThrow();
  });
});

describe('median aggregation over bench rows', () => {
  // the three-row hand fixture: same method and sample count, RAEs 0.1/0.4/0.2
  const csv = [
    HEADER,
    'sphere-d2,dmc,1000,0,7,1000,0.18,1e-6,0.1,',
    'sphere-d2,dmc,1000,1,7,1000,0.19,1e-6,0.4,',
    'sphere-d2,dmc,1000,2,7,1000,0.17,1e-6,0.2,',
  ].join('\n');

  it('matches the hand-computed median of the 3-row fixture', () => {
    const series = convergenceSeries(parseBenchCsv(csv));
    expect(series).toEqual([{ method: 'dmc', samplesUsed: 1000, medianRae: 0.2 }]);
  });

  it('skips not-applicable rows', () => {
    const rows = parseBenchCsv(
      [HEADER, 'torus-correlated,stratified,1000,0,7,0,NA,NA,NA,'].join('\n'),
    );
    const med = groupedMedian(rows, (r) => r.method, (r) => r.rae);
    expect(med.size).toBe(0);
  });
});
