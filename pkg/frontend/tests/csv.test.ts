import { describe, expect, it } from 'vitest';

import {
  SchemaError, parseSweepCsv, parseTraceCsv, sweepSeries,
} from '../src/csv.js';

const SWEEP = `sweepName,sweepValue,seed,schemeId,objectiveDbm,iterations,wallMillis,feasible,gapAtTermination,binarityResidual
minSINR,4,0,B1,54.2,1,2.2,1,,
minSINR,4,0,SCA,39.7,2,1442.4,1,,-4.8e-09
minSINR,4,1,B1,58.5,1,2.1,1,,
minSINR,4,1,SCA,48.1,2,1046.6,1,,1.7e-09
minSINR,10,0,B1,INF,1,2.3,0,,
minSINR,10,0,SCA,41.8,2,900.0,1,,2e-09
minSINR,10,1,B1,60.0,1,2.0,1,,
minSINR,10,1,SCA,49.9,2,901.0,1,,3e-09
`;

const TRACE = `iteration,lowerBoundMw,upperBoundMw,openNodes
1,1000,INF,1
2,1200,9000,2
3,2000,8500,2
4,8500,8500,0
`;

describe('sweep CSV', () => {
  it('parses records and the INF sentinel', () => {
    const records = parseSweepCsv(SWEEP);
    expect(records).toHaveLength(8);
    expect(records[4].objectiveDbm).toBeNull();
    expect(records[4].feasible).toBe(false);
    expect(records[1].objectiveDbm).toBeCloseTo(39.7);
  });

  it('rejects a wrong header', () => {
    expect(() => parseSweepCsv('a,b,c\n1,2,3\n')).toThrow(SchemaError);
  });

  it('rejects header-only files as empty data', () => {
    const headerOnly = SWEEP.split('\n')[0] + '\n';
    expect(() => parseSweepCsv(headerOnly)).toThrow(/empty data/);
  });

  it('aggregates means over feasible rows only', () => {
    const series = sweepSeries(parseSweepCsv(SWEEP));
    expect([...series.keys()]).toEqual(['B1', 'SCA']);
    const b1 = series.get('B1')!;
    expect(b1).toHaveLength(2);
    expect(b1[0].y).toBeCloseTo((54.2 + 58.5) / 2);
    expect(b1[1].feasibleCount).toBe(1);
    expect(b1[1].totalCount).toBe(2);
    expect(b1[1].y).toBeCloseTo(60.0);
    const sca = series.get('SCA')!;
    expect(sca[1].y).toBeCloseTo((41.8 + 49.9) / 2);
  });
});

describe('trace CSV', () => {
  it('parses bounds with the INF sentinel', () => {
    const rows = parseTraceCsv(TRACE);
    expect(rows).toHaveLength(4);
    expect(rows[0].upperBoundMw).toBeNull();
    expect(rows[3].lowerBoundMw).toBe(8500);
  });

  it('rejects malformed rows', () => {
    expect(() => parseTraceCsv('iteration,lowerBoundMw\n1,2\n')).toThrow(SchemaError);
  });
});
