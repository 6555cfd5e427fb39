/** Deterministic SVG line charts with optional error bars.
 *
 * Pure string building: identical inputs give byte-identical output.
 */

export interface Point {
  x: number;
  y: number;
  err?: number;
}

export interface Series {
  label: string;
  points: Point[];
}

export interface ChartOptions {
  title: string;
  xLabel: string;
  yLabel: string;
  series: Series[];
}

const WIDTH = 720;
const HEIGHT = 480;
const MARGIN = { top: 48, right: 28, bottom: 58, left: 78 };
const PALETTE = ['#1f6fb2', '#d7301f', '#2e8b57', '#7b3294', '#e08214', '#636363'];

const fmt = (v: number): string => v.toFixed(2);

function fmtTick(v: number): string {
  if (v === 0) return '0';
  const abs = Math.abs(v);
  if (abs >= 1e6 || abs < 1e-3) {
    return v.toExponential(1).replace('e+', 'e');
  }
  const s = v.toFixed(4).replace(/0+$/, '').replace(/\.$/, '');
  return s;
}

/** Tick positions at 1/2/5 multiples covering [lo, hi]. */
export function niceTicks(lo: number, hi: number, target = 5): number[] {
  if (lo === hi) {
    hi = lo + (lo === 0 ? 1 : Math.abs(lo) * 0.1);
    lo = lo - (lo === 0 ? 1 : Math.abs(lo) * 0.1);
  }
  const span = hi - lo;
  const rawStep = span / target;
  const mag = Math.pow(10, Math.floor(Math.log10(rawStep)));
  let step = mag;
  for (const mult of [1, 2, 5, 10]) {
    if (mag * mult >= rawStep) {
      step = mag * mult;
      break;
    }
  }
  const ticks: number[] = [];
  let t = Math.ceil(lo / step) * step;
  // snap tiny float error onto the grid
  for (; t <= hi + step * 1e-9; t += step) {
    ticks.push(Math.abs(t) < step * 1e-9 ? 0 : t);
  }
  return ticks;
}

function extent(series: Series[]): { x0: number; x1: number; y0: number; y1: number } {
  let x0 = Infinity;
  let x1 = -Infinity;
  let y0 = Infinity;
  let y1 = -Infinity;
  for (const s of series) {
    for (const p of s.points) {
      x0 = Math.min(x0, p.x);
      x1 = Math.max(x1, p.x);
      const e = p.err ?? 0;
      y0 = Math.min(y0, p.y - e);
      y1 = Math.max(y1, p.y + e);
    }
  }
  if (x0 === x1) {
    x0 -= 1;
    x1 += 1;
  }
  if (y0 === y1) {
    y0 -= 1;
    y1 += 1;
  }
  const pad = (y1 - y0) * 0.06;
  return { x0, x1, y0: y0 - pad, y1: y1 + pad };
}

const esc = (s: string): string =>
  s.replace(/&/g, '&amp;').replace(/</g, '&lt;').replace(/>/g, '&gt;');

export function buildChart(options: ChartOptions): string {
  const { series } = options;
  if (series.length === 0 || series.every((s) => s.points.length === 0)) {
    throw new Error('chart has no data points');
  }
  const { x0, x1, y0, y1 } = extent(series);
  const plotW = WIDTH - MARGIN.left - MARGIN.right;
  const plotH = HEIGHT - MARGIN.top - MARGIN.bottom;
  const sx = (x: number) => MARGIN.left + ((x - x0) / (x1 - x0)) * plotW;
  const sy = (y: number) => MARGIN.top + plotH - ((y - y0) / (y1 - y0)) * plotH;

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" ` +
      `viewBox="0 0 ${WIDTH} ${HEIGHT}" font-family="Helvetica, Arial, sans-serif">`
  );
  parts.push(`<rect width="${WIDTH}" height="${HEIGHT}" fill="#ffffff"/>`);
  parts.push(
    `<text x="${WIDTH / 2}" y="26" text-anchor="middle" font-size="16">${esc(options.title)}</text>`
  );

  // gridlines and axis ticks
  for (const t of niceTicks(y0, y1)) {
    const y = fmt(sy(t));
    parts.push(
      `<line x1="${MARGIN.left}" y1="${y}" x2="${WIDTH - MARGIN.right}" y2="${y}" ` +
        `stroke="#dddddd" stroke-width="1"/>`
    );
    parts.push(
      `<text x="${MARGIN.left - 8}" y="${y}" text-anchor="end" dominant-baseline="middle" ` +
        `font-size="11">${fmtTick(t)}</text>`
    );
  }
  for (const t of niceTicks(x0, x1)) {
    const x = fmt(sx(t));
    parts.push(
      `<line x1="${x}" y1="${MARGIN.top + plotH}" x2="${x}" y2="${MARGIN.top + plotH + 5}" ` +
        `stroke="#000000" stroke-width="1"/>`
    );
    parts.push(
      `<text x="${x}" y="${MARGIN.top + plotH + 18}" text-anchor="middle" font-size="11">` +
        `${fmtTick(t)}</text>`
    );
  }

  // plot frame
  parts.push(
    `<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${plotW}" height="${plotH}" ` +
      `fill="none" stroke="#000000" stroke-width="1"/>`
  );

  series.forEach((s, si) => {
    const color = PALETTE[si % PALETTE.length];
    const coords = s.points.map((p) => `${fmt(sx(p.x))},${fmt(sy(p.y))}`).join(' ');
    parts.push(
      `<polyline points="${coords}" fill="none" stroke="${color}" stroke-width="1.8"/>`
    );
    for (const p of s.points) {
      const cx = fmt(sx(p.x));
      parts.push(`<circle cx="${cx}" cy="${fmt(sy(p.y))}" r="3" fill="${color}"/>`);
      if (p.err !== undefined && p.err > 0) {
        const top = fmt(sy(p.y + p.err));
        const bot = fmt(sy(p.y - p.err));
        parts.push(
          `<line x1="${cx}" y1="${top}" x2="${cx}" y2="${bot}" stroke="${color}" stroke-width="1.2"/>`
        );
        for (const yy of [top, bot]) {
          parts.push(
            `<line x1="${fmt(sx(p.x) - 4)}" y1="${yy}" x2="${fmt(sx(p.x) + 4)}" y2="${yy}" ` +
              `stroke="${color}" stroke-width="1.2"/>`
          );
        }
      }
    }
  });

  // legend (only when there is more than one line)
  if (series.length > 1) {
    const lx = MARGIN.left + 12;
    series.forEach((s, si) => {
      const ly = MARGIN.top + 14 + si * 18;
      const color = PALETTE[si % PALETTE.length];
      parts.push(
        `<line x1="${lx}" y1="${ly}" x2="${lx + 22}" y2="${ly}" stroke="${color}" stroke-width="1.8"/>`
      );
      parts.push(
        `<text x="${lx + 28}" y="${ly + 4}" font-size="12">${esc(s.label)}</text>`
      );
    });
  }

  parts.push(
    `<text x="${MARGIN.left + plotW / 2}" y="${HEIGHT - 14}" text-anchor="middle" ` +
      `font-size="13">${esc(options.xLabel)}</text>`
  );
  parts.push(
    `<text x="20" y="${MARGIN.top + plotH / 2}" text-anchor="middle" font-size="13" ` +
      `transform="rotate(-90 20 ${MARGIN.top + plotH / 2})">${esc(options.yLabel)}</text>`
  );
  parts.push('</svg>');
  return parts.join('\n') + '\n';
}
