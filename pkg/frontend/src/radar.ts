import type { RadarExport } from "./types.js";

export interface RadarOptions {
  size?: number;
  max?: number;
  levels?: number;
}

const PALETTE = [
  "rgba(59,130,246,1)", // blue
  "rgba(239,68,68,1)", // red
  "rgba(34,197,94,1)", // green
  "rgba(234,179,8,1)", // yellow
];

const FILLS = [
  "rgba(59,130,246,0.18)",
  "rgba(239,68,68,0.14)",
  "rgba(34,197,94,0.14)",
  "rgba(234,179,8,0.14)",
];

/** "TechnicalDepthReproducibility" -> "Technical Depth Reproducibility" */
export function labelize(dimension: string): string {
  return dimension.replace(/([a-z])([A-Z])/g, "$1 $2");
}

export function axisPoint(
  index: number,
  count: number,
  value: number,
  max: number,
  radius: number,
): { x: number; y: number } {
  const angle = (Math.PI * 2 * index) / count - Math.PI / 2;
  const r = (Math.max(0, Math.min(value, max)) / max) * radius;
  return { x: r * Math.cos(angle), y: r * Math.sin(angle) };
}

const fmt = (n: number) => String(Math.round(n * 100) / 100);

/**
 * Renders a score-table export as an SVG string: one polygon per system
 * overlaid on a shared set of axes. Pure string building so it can run
 * (and be tested) without a DOM.
 */
export function renderRadar(exp: RadarExport, opts: RadarOptions = {}): string {
  const size = opts.size ?? 380;
  const max = opts.max ?? 100;
  const levels = opts.levels ?? 5;
  const n = exp.dimensions.length;
  if (n < 3) throw new Error(`radar needs >= 3 dimensions, got ${n}`);
  const c = size / 2;
  const radius = c - 66;

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${size} ${size}" ` +
      `width="${size}" height="${size}" class="radar" role="img" ` +
      `aria-label="scores for ${exp.paper_id}">`,
  );
  parts.push(`<g transform="translate(${c},${c})">`);

  for (let level = 1; level <= levels; level++) {
    const pts: string[] = [];
    for (let i = 0; i < n; i++) {
      const p = axisPoint(i, n, (max * level) / levels, max, radius);
      pts.push(`${fmt(p.x)},${fmt(p.y)}`);
    }
    parts.push(
      `<polygon class="grid" points="${pts.join(" ")}" fill="none" ` +
        `stroke="rgba(128,128,160,0.25)" stroke-width="1"/>`,
    );
  }

  for (let i = 0; i < n; i++) {
    const tip = axisPoint(i, n, max, max, radius);
    parts.push(
      `<line class="axis" x1="0" y1="0" x2="${fmt(tip.x)}" y2="${fmt(tip.y)}" ` +
        `stroke="rgba(128,128,160,0.25)" stroke-width="1"/>`,
    );
    const lp = axisPoint(i, n, max * 1.18, max * 1.18, radius * 1.18);
    const anchor = Math.abs(lp.x) < 1 ? "middle" : lp.x > 0 ? "start" : "end";
    parts.push(
      `<text class="dim-label" x="${fmt(lp.x)}" y="${fmt(lp.y)}" ` +
        `text-anchor="${anchor}" font-size="10">${labelize(exp.dimensions[i])}</text>`,
    );
  }

  exp.series.forEach((series, k) => {
    const pts: string[] = [];
    for (let i = 0; i < n; i++) {
      const p = axisPoint(i, n, series.values[i] ?? 0, max, radius);
      pts.push(`${fmt(p.x)},${fmt(p.y)}`);
    }
    parts.push(
      `<polygon class="series" data-system="${series.system}" ` +
        `points="${pts.join(" ")}" fill="${FILLS[k % FILLS.length]}" ` +
        `stroke="${PALETTE[k % PALETTE.length]}" stroke-width="2"/>`,
    );
  });

  // legend under the chart
  exp.series.forEach((series, k) => {
    const y = radius + 40 + k * 14;
    parts.push(
      `<rect x="${-radius}" y="${y - 8}" width="9" height="9" ` +
        `fill="${PALETTE[k % PALETTE.length]}"/>`,
    );
    parts.push(
      `<text class="legend" x="${-radius + 14}" y="${y}" font-size="11">` +
        `${series.system}</text>`,
    );
  });

  parts.push("</g></svg>");
  return parts.join("");
}
