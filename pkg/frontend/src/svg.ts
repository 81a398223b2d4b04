/**
 * Minimal deterministic SVG chart builder: fixed canvas, fixed palette,
 * fixed number formatting, no timestamps — identical inputs give identical
 * bytes.
 */

export interface Series {
  label: string;
  points: Array<{ x: number; y: number }>;
  annotations?: string[];
}

export interface ChartSpec {
  title: string;
  xLabel: string;
  yLabel: string;
  series: Series[];
}

const WIDTH = 780;
const HEIGHT = 520;
const MARGIN = { left: 72, right: 180, top: 48, bottom: 56 };

const PALETTE = [
  '#1f77b4', '#d62728', '#2ca02c', '#9467bd',
  '#ff7f0e', '#8c564b', '#17becf', '#7f7f7f',
];

const MARKERS = ['circle', 'square', 'diamond', 'triangle'] as const;

function fmt(v: number): string {
  return Number.isInteger(v) ? v.toString() : v.toFixed(3).replace(/\.?0+$/, '');
}

function ticks(lo: number, hi: number, count = 6): number[] {
  if (!(hi > lo)) {
    return [lo];
  }
  const span = hi - lo;
  const step = 10 ** Math.floor(Math.log10(span / count));
  const scaled = [1, 2, 5, 10].find((m) => span / (step * m) <= count) ?? 10;
  const inc = step * scaled;
  const first = Math.ceil(lo / inc) * inc;
  const out: number[] = [];
  for (let v = first; v <= hi + 1e-12; v += inc) {
    out.push(Number(v.toFixed(12)));
  }
  return out;
}

function marker(shape: (typeof MARKERS)[number], cx: number, cy: number,
                color: string): string {
  const r = 4;
  switch (shape) {
    case 'circle':
      return `<circle cx="${fmt(cx)}" cy="${fmt(cy)}" r="${r}" fill="${color}"/>`;
    case 'square':
      return `<rect x="${fmt(cx - r)}" y="${fmt(cy - r)}" width="${2 * r}" ` +
        `height="${2 * r}" fill="${color}"/>`;
    case 'diamond':
      return `<path d="M ${fmt(cx)} ${fmt(cy - r - 1)} L ${fmt(cx + r + 1)} ${fmt(cy)} ` +
        `L ${fmt(cx)} ${fmt(cy + r + 1)} L ${fmt(cx - r - 1)} ${fmt(cy)} Z" fill="${color}"/>`;
    case 'triangle':
      return `<path d="M ${fmt(cx)} ${fmt(cy - r - 1)} L ${fmt(cx + r + 1)} ${fmt(cy + r)} ` +
        `L ${fmt(cx - r - 1)} ${fmt(cy + r)} Z" fill="${color}"/>`;
  }
}

export function renderChart(spec: ChartSpec): string {
  const pts = spec.series.flatMap((s) => s.points)
    .filter((p) => Number.isFinite(p.x) && Number.isFinite(p.y));
  if (pts.length === 0) {
    throw new Error('empty data: nothing to plot');
  }
  let xLo = Math.min(...pts.map((p) => p.x));
  let xHi = Math.max(...pts.map((p) => p.x));
  let yLo = Math.min(...pts.map((p) => p.y));
  let yHi = Math.max(...pts.map((p) => p.y));
  if (xHi === xLo) {
    xHi = xLo + 1;
  }
  const yPad = (yHi - yLo || 1) * 0.08;
  yLo -= yPad;
  yHi += yPad;

  const plotW = WIDTH - MARGIN.left - MARGIN.right;
  const plotH = HEIGHT - MARGIN.top - MARGIN.bottom;
  const sx = (x: number) => MARGIN.left + ((x - xLo) / (xHi - xLo)) * plotW;
  const sy = (y: number) => MARGIN.top + plotH - ((y - yLo) / (yHi - yLo)) * plotH;

  const parts: string[] = [];
  parts.push(`<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" ` +
    `height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}" ` +
    `font-family="Helvetica, Arial, sans-serif">`);
  parts.push(`<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`);
  parts.push(`<text x="${WIDTH / 2}" y="26" text-anchor="middle" ` +
    `font-size="16">${spec.title}</text>`);

  for (const tx of ticks(xLo, xHi)) {
    const px = sx(tx);
    parts.push(`<line x1="${fmt(px)}" y1="${MARGIN.top}" x2="${fmt(px)}" ` +
      `y2="${MARGIN.top + plotH}" stroke="#dddddd" stroke-width="1"/>`);
    parts.push(`<text x="${fmt(px)}" y="${MARGIN.top + plotH + 20}" ` +
      `text-anchor="middle" font-size="12">${fmt(tx)}</text>`);
  }
  for (const ty of ticks(yLo, yHi)) {
    const py = sy(ty);
    parts.push(`<line x1="${MARGIN.left}" y1="${fmt(py)}" ` +
      `x2="${MARGIN.left + plotW}" y2="${fmt(py)}" stroke="#dddddd" stroke-width="1"/>`);
    parts.push(`<text x="${MARGIN.left - 8}" y="${fmt(py + 4)}" ` +
      `text-anchor="end" font-size="12">${fmt(ty)}</text>`);
  }
  parts.push(`<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${plotW}" ` +
    `height="${plotH}" fill="none" stroke="#333333"/>`);
  parts.push(`<text x="${MARGIN.left + plotW / 2}" y="${HEIGHT - 12}" ` +
    `text-anchor="middle" font-size="13">${spec.xLabel}</text>`);
  parts.push(`<text x="20" y="${MARGIN.top + plotH / 2}" text-anchor="middle" ` +
    `font-size="13" transform="rotate(-90 20 ${MARGIN.top + plotH / 2})">` +
    `${spec.yLabel}</text>`);

  let legendY = MARGIN.top + 16;
  const legendX = MARGIN.left + plotW + 14;
  spec.series.forEach((series, idx) => {
    const color = PALETTE[idx % PALETTE.length];
    const shape = MARKERS[idx % MARKERS.length];
    const finite = series.points.filter((p) => Number.isFinite(p.y));
    if (finite.length > 1) {
      const d = finite
        .map((p, i) => `${i ? 'L' : 'M'} ${fmt(sx(p.x))} ${fmt(sy(p.y))}`)
        .join(' ');
      parts.push(`<path d="${d}" fill="none" stroke="${color}" stroke-width="2"/>`);
    }
    for (const p of finite) {
      parts.push(marker(shape, sx(p.x), sy(p.y), color));
    }
    parts.push(marker(shape, legendX + 6, legendY - 4, color));
    parts.push(`<text x="${legendX + 18}" y="${legendY}" font-size="12">` +
      `${series.label}</text>`);
    legendY += 18;
    for (const note of series.annotations ?? []) {
      parts.push(`<text x="${legendX + 18}" y="${legendY}" font-size="10" ` +
        `fill="#777777">${note}</text>`);
      legendY += 14;
    }
  });
  parts.push('</svg>');
  return parts.join('\n') + '\n';
}
