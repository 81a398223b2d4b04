/**
 * Parsers for the two CSV formats the benchmark emits: sweep records
 * (one row per sweep point / seed / scheme) and solver convergence traces.
 * Schema mismatches throw; callers surface them as nonzero exits.
 */

export const SWEEP_HEADER = [
  'sweepName', 'sweepValue', 'seed', 'schemeId', 'objectiveDbm',
  'iterations', 'wallMillis', 'feasible', 'gapAtTermination',
  'binarityResidual',
] as const;

export const TRACE_HEADER = [
  'iteration', 'lowerBoundMw', 'upperBoundMw', 'openNodes',
] as const;

export interface SweepRecord {
  sweepName: string;
  sweepValue: number;
  seed: number;
  schemeId: string;
  objectiveDbm: number | null;
  feasible: boolean;
}

export interface TraceRow {
  iteration: number;
  lowerBoundMw: number;
  upperBoundMw: number | null; // null while no incumbent exists
  openNodes: number;
}

export class SchemaError extends Error {}

function splitCsv(text: string): string[][] {
  return text
    .split(/\r?\n/)
    .filter((line) => line.length > 0)
    .map((line) => line.split(','));
}

function expectHeader(got: string[], want: readonly string[], what: string): void {
  if (got.length !== want.length || want.some((w, i) => got[i] !== w)) {
    throw new SchemaError(
      `${what}: expected header ${want.join(',')} but found ${got.join(',')}`);
  }
}

export function parseSweepCsv(text: string): SweepRecord[] {
  const rows = splitCsv(text);
  if (rows.length === 0) {
    throw new SchemaError('sweep CSV: empty file');
  }
  expectHeader(rows[0], SWEEP_HEADER, 'sweep CSV');
  if (rows.length === 1) {
    throw new SchemaError('sweep CSV: empty data');
  }
  return rows.slice(1).map((cols, i) => {
    if (cols.length !== SWEEP_HEADER.length) {
      throw new SchemaError(`sweep CSV: row ${i + 2} has ${cols.length} columns`);
    }
    const objective = cols[4] === 'INF' ? null : Number(cols[4]);
    if (objective !== null && !Number.isFinite(objective)) {
      throw new SchemaError(`sweep CSV: bad objective in row ${i + 2}`);
    }
    return {
      sweepName: cols[0],
      sweepValue: Number(cols[1]),
      seed: Number(cols[2]),
      schemeId: cols[3],
      objectiveDbm: objective,
      feasible: cols[7] === '1',
    };
  });
}

export function parseTraceCsv(text: string): TraceRow[] {
  const rows = splitCsv(text);
  if (rows.length === 0) {
    throw new SchemaError('trace CSV: empty file');
  }
  expectHeader(rows[0], TRACE_HEADER, 'trace CSV');
  if (rows.length === 1) {
    throw new SchemaError('trace CSV: empty data');
  }
  return rows.slice(1).map((cols, i) => {
    if (cols.length !== TRACE_HEADER.length) {
      throw new SchemaError(`trace CSV: row ${i + 2} has ${cols.length} columns`);
    }
    return {
      iteration: Number(cols[0]),
      lowerBoundMw: Number(cols[1]),
      upperBoundMw: cols[2] === 'INF' ? null : Number(cols[2]),
      openNodes: Number(cols[3]),
    };
  });
}

export interface SeriesPoint {
  x: number;
  y: number;
  feasibleCount: number;
  totalCount: number;
}

/** Mean feasible objective per (scheme, sweep value), dB domain, x ascending. */
export function sweepSeries(records: SweepRecord[]): Map<string, SeriesPoint[]> {
  const bucket = new Map<string, Map<number, SweepRecord[]>>();
  for (const rec of records) {
    const byValue = bucket.get(rec.schemeId) ?? new Map();
    bucket.set(rec.schemeId, byValue);
    const cell = byValue.get(rec.sweepValue) ?? [];
    cell.push(rec);
    byValue.set(rec.sweepValue, cell);
  }
  const out = new Map<string, SeriesPoint[]>();
  for (const scheme of [...bucket.keys()].sort()) {
    const byValue = bucket.get(scheme)!;
    const points: SeriesPoint[] = [];
    for (const value of [...byValue.keys()].sort((a, b) => a - b)) {
      const cell = byValue.get(value)!;
      const feasible = cell.filter((r) => r.feasible && r.objectiveDbm !== null);
      const mean = feasible.length
        ? feasible.reduce((acc, r) => acc + (r.objectiveDbm as number), 0) /
          feasible.length
        : NaN;
      points.push({
        x: value,
        y: mean,
        feasibleCount: feasible.length,
        totalCount: cell.length,
      });
    }
    out.set(scheme, points);
  }
  return out;
}
