/**
 * Figure emission: sweep figures (mean power per scheme against the swept
 * parameter) and solver convergence figures (lower/upper bound per
 * iteration) from the benchmark CSV outputs.
 */

import * as fs from 'node:fs';
import * as path from 'node:path';

import { parseSweepCsv, parseTraceCsv, sweepSeries } from './csv.js';
import { renderChart, Series } from './svg.js';

const AXIS_LABELS: Record<string, string> = {
  minSINR: 'Minimum required SINR (dB)',
  targetModeSetSize: 'Refined transmission mode set size',
  numAntennas: 'Number of transmit antennas',
  numIRs: 'Number of information receivers',
  omega: 'Energy-receiver weight factor',
  minHarvest: 'Minimum harvested power (uW)',
};

export function renderSweepFigure(csvText: string): string {
  const records = parseSweepCsv(csvText);
  const series = sweepSeries(records);
  const sweepName = records[0].sweepName;
  const charted: Series[] = [];
  for (const [scheme, points] of series) {
    const skipped = points
      .filter((p) => p.feasibleCount < p.totalCount)
      .map((p) => `x=${p.x}: ${p.totalCount - p.feasibleCount} infeasible`);
    charted.push({
      label: scheme,
      points: points.map((p) => ({ x: p.x, y: p.y })),
      annotations: skipped,
    });
  }
  return renderChart({
    title: `Average total transmit power vs ${sweepName}`,
    xLabel: AXIS_LABELS[sweepName] ?? sweepName,
    yLabel: 'Average total transmit power (dBm)',
    series: charted,
  });
}

export function renderTraceFigure(csvText: string): string {
  const rows = parseTraceCsv(csvText);
  const lower: Series = {
    label: 'lower bound',
    points: rows.map((r) => ({ x: r.iteration, y: 10 * Math.log10(r.lowerBoundMw) })),
  };
  const upper: Series = {
    label: 'upper bound',
    points: rows
      .filter((r) => r.upperBoundMw !== null)
      .map((r) => ({ x: r.iteration, y: 10 * Math.log10(r.upperBoundMw as number) })),
  };
  return renderChart({
    title: 'Search convergence: bounds per iteration',
    xLabel: 'Iteration',
    yLabel: 'Objective bound (dBm)',
    series: [lower, upper],
  });
}

export interface RenderResult {
  files: string[];
}

export function render(kind: 'sweep' | 'trace', csvPath: string,
                       outDir: string): RenderResult {
  const text = fs.readFileSync(csvPath, 'utf-8');
  fs.mkdirSync(outDir, { recursive: true });
  const stem = path.basename(csvPath).replace(/\.csv$/i, '');
  const svg = kind === 'sweep' ? renderSweepFigure(text) : renderTraceFigure(text);
  const file = path.join(outDir, `${stem}.svg`);
  fs.writeFileSync(file, svg, 'utf-8');
  return { files: [file] };
}
