/**
 * Minimal deterministic SVG line-chart renderer: fixed size and style, no
 * timestamps or random identifiers, log or linear y axis. Output depends
 * only on the series passed in.
 */

export interface Series {
  label: string;
  color: string;
  points: Array<{ x: number; y: number }>;
}

export interface ChartSpec {
  title: string;
  xLabel: string;
  yLabel: string;
  logY: boolean;
  series: Series[];
}

const WIDTH = 860;
const HEIGHT = 520;
const MARGIN = { left: 78, right: 24, top: 44, bottom: 56 };

function fmt(v: number): string {
  return Number(v.toFixed(2)).toString();
}

function fmtTick(v: number, logY: boolean): string {
  if (logY) {
    const exp = Math.log10(v);
    if (Number.isInteger(exp)) return `1e${exp}`;
  }
  return Number(v.toPrecision(3)).toString();
}

export function renderChart(spec: ChartSpec): string {
  const innerW = WIDTH - MARGIN.left - MARGIN.right;
  const innerH = HEIGHT - MARGIN.top - MARGIN.bottom;

  const xs = spec.series.flatMap((s) => s.points.map((p) => p.x));
  const ys = spec.series.flatMap((s) => s.points.map((p) => p.y));
  const xMin = Math.min(...xs);
  const xMax = Math.max(...xs);
  const yVal = (v: number) => (spec.logY ? Math.log10(v) : v);
  let yMin = Math.min(...ys.map(yVal));
  let yMax = Math.max(...ys.map(yVal));
  if (yMin === yMax) {
    yMin -= 0.5;
    yMax += 0.5;
  }
  if (spec.logY) {
    yMin = Math.floor(yMin);
    yMax = Math.ceil(yMax);
    if (yMin === yMax) yMax += 1;
  }
  const xSpan = xMax > xMin ? xMax - xMin : 1;

  const px = (x: number) => MARGIN.left + ((x - xMin) / xSpan) * innerW;
  const py = (y: number) => MARGIN.top + (1 - (yVal(y) - yMin) / (yMax - yMin)) * innerH;

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" ` +
    `viewBox="0 0 ${WIDTH} ${HEIGHT}" font-family="Helvetica, Arial, sans-serif">`,
  );
  parts.push(`<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`);
  parts.push(
    `<text x="${WIDTH / 2}" y="24" text-anchor="middle" font-size="17">${spec.title}</text>`,
  );

  // frame
  parts.push(
    `<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${innerW}" height="${innerH}" ` +
    `fill="none" stroke="#333" stroke-width="1"/>`,
  );

  // y ticks: decades when log, 5 even steps otherwise
  const yTicks: number[] = [];
  if (spec.logY) {
    for (let e = yMin; e <= yMax; e++) yTicks.push(10 ** e);
  } else {
    for (let i = 0; i <= 5; i++) yTicks.push(yMin + ((yMax - yMin) * i) / 5);
  }
  for (const tick of yTicks) {
    const y = py(tick);
    parts.push(
      `<line x1="${MARGIN.left}" x2="${WIDTH - MARGIN.right}" y1="${fmt(y)}" y2="${fmt(y)}" ` +
      `stroke="#ddd" stroke-width="0.7"/>`,
    );
    parts.push(
      `<text x="${MARGIN.left - 8}" y="${fmt(y + 4)}" text-anchor="end" font-size="12">` +
      `${fmtTick(tick, spec.logY)}</text>`,
    );
  }

  // x ticks at (possibly decimated) data positions
  const xValues = [...new Set(xs)].sort((a, b) => a - b);
  const stride = Math.max(1, Math.ceil(xValues.length / 12));
  xValues.filter((_, i) => i % stride === 0).forEach((x) => {
    const xPix = px(x);
    parts.push(
      `<line x1="${fmt(xPix)}" x2="${fmt(xPix)}" y1="${HEIGHT - MARGIN.bottom}" ` +
      `y2="${HEIGHT - MARGIN.bottom + 5}" stroke="#333" stroke-width="1"/>`,
    );
    parts.push(
      `<text x="${fmt(xPix)}" y="${HEIGHT - MARGIN.bottom + 20}" text-anchor="middle" ` +
      `font-size="12">${Number(x.toPrecision(4))}</text>`,
    );
  });

  parts.push(
    `<text x="${WIDTH / 2}" y="${HEIGHT - 14}" text-anchor="middle" font-size="13">` +
    `${spec.xLabel}</text>`,
  );
  parts.push(
    `<text x="20" y="${HEIGHT / 2}" text-anchor="middle" font-size="13" ` +
    `transform="rotate(-90 20 ${HEIGHT / 2})">${spec.yLabel}</text>`,
  );

  // curves + markers
  for (const s of spec.series) {
    const coords = s.points.map((p) => `${fmt(px(p.x))},${fmt(py(p.y))}`).join(" ");
    parts.push(
      `<polyline points="${coords}" fill="none" stroke="${s.color}" stroke-width="2"/>`,
    );
    for (const p of s.points) {
      parts.push(
        `<circle cx="${fmt(px(p.x))}" cy="${fmt(py(p.y))}" r="3" fill="${s.color}"/>`,
      );
    }
  }

  // legend
  spec.series.forEach((s, i) => {
    const y = MARGIN.top + 16 + i * 20;
    const x = WIDTH - MARGIN.right - 150;
    parts.push(
      `<line x1="${x}" x2="${x + 26}" y1="${y}" y2="${y}" stroke="${s.color}" stroke-width="2"/>`,
    );
    parts.push(`<text x="${x + 32}" y="${y + 4}" font-size="13">${s.label}</text>`);
  });

  parts.push("</svg>");
  return parts.join("\n") + "\n";
}
