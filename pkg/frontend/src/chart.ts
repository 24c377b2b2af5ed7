// Allocation timeseries: turn a campaign history into per-arm weight
// series, stack them into bands, and render a stacked-area SVG. All pure
// string/array work so it runs unchanged in node and in the browser.

import type { ArmSeries, HistoryResponse } from "./types.js";

export interface BandPoint {
  epoch: number;
  lower: number;
  upper: number;
}

export interface Band {
  arm: string;
  blacklisted: boolean;
  points: BandPoint[];
}

export interface ChartOptions {
  width?: number;
  height?: number;
  margin?: number;
}

const PALETTE = [
  "#4e79a7",
  "#f28e2b",
  "#59a14f",
  "#e15759",
  "#b07aa1",
  "#76b7b2",
  "#edc948",
  "#ff9da7",
];

export function buildSeries(history: HistoryResponse): ArmSeries[] {
  const arms = new Set<string>();
  for (const entry of history.epochs) {
    for (const arm of Object.keys(entry.weights)) {
      arms.add(arm);
    }
  }
  const blacklisted = new Set(history.blacklist);
  return [...arms].sort().map((arm) => {
    const points = history.epochs.map((entry) => ({
      epoch: entry.epoch,
      weight: entry.weights[arm] ?? 0,
    }));
    const last = points[points.length - 1];
    return {
      arm,
      points,
      blacklisted: blacklisted.has(arm),
      finalWeight: last ? last.weight : 0,
    };
  });
}

export function stackSeries(series: ArmSeries[]): Band[] {
  const epochCount = series[0]?.points.length ?? 0;
  const lower = new Array<number>(epochCount).fill(0);
  return series.map((s) => {
    const points = s.points.map((p, i) => {
      const lo = lower[i] ?? 0;
      const hi = lo + p.weight;
      lower[i] = hi;
      return { epoch: p.epoch, lower: lo, upper: hi };
    });
    return { arm: s.arm, blacklisted: s.blacklisted, points };
  });
}

function fmt(x: number): string {
  return Number(x.toFixed(4)).toString();
}

function areaPath(
  band: Band,
  sx: (epoch: number) => number,
  sy: (weight: number) => number,
): string {
  const forward = band.points.map(
    (p, i) => `${i === 0 ? "M" : "L"}${fmt(sx(p.epoch))},${fmt(sy(p.upper))}`,
  );
  const back = [...band.points]
    .reverse()
    .map((p) => `L${fmt(sx(p.epoch))},${fmt(sy(p.lower))}`);
  return `${forward.join(" ")} ${back.join(" ")} Z`;
}

// Stacked-area chart of allocation weights per epoch. Blacklisted arms get
// a "blacklisted" class, a faded fill and a flag at the epoch where the
// ban took effect, so a band collapsing to zero reads as deliberate.
export function renderSeries(
  series: ArmSeries[],
  label: string,
  options: ChartOptions = {},
): string {
  const width = options.width ?? 640;
  const height = options.height ?? 320;
  const margin = options.margin ?? 40;
  const bands = stackSeries(series);
  const epochs = (series[0]?.points ?? []).map((p) => p.epoch);
  if (epochs.length === 0) {
    return (
      `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${width} ${height}" ` +
      `width="${width}" height="${height}" role="img" aria-label="allocation by ` +
      `epoch for ${label}"><text x="${width / 2}" y="${height / 2}" ` +
      `text-anchor="middle">no epochs yet</text></svg>`
    );
  }
  const minEpoch = Math.min(...epochs);
  const maxEpoch = Math.max(...epochs);
  const span = Math.max(maxEpoch - minEpoch, 1);
  const sx = (epoch: number) =>
    margin + ((epoch - minEpoch) / span) * (width - 2 * margin);
  const sy = (weight: number) => height - margin - weight * (height - 2 * margin);

  const parts: string[] = [
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${width} ${height}" ` +
      `width="${width}" height="${height}" role="img" ` +
      `aria-label="allocation by epoch for ${label}">`,
    `<rect x="0" y="0" width="${width}" height="${height}" fill="#ffffff"/>`,
  ];
  bands.forEach((band, i) => {
    const color = PALETTE[i % PALETTE.length];
    const cls = band.blacklisted ? "arm blacklisted" : "arm";
    const dash = band.blacklisted ? ` stroke-dasharray="4 3"` : "";
    parts.push(
      `<path class="${cls}" data-arm="${band.arm}" d="${areaPath(band, sx, sy)}" ` +
        `fill="${color}" fill-opacity="${band.blacklisted ? 0.25 : 0.7}" ` +
        `stroke="${color}"${dash}/>`,
    );
  });
  for (const band of bands) {
    if (!band.blacklisted) {
      continue;
    }
    const zeroed = band.points.find((p) => p.upper - p.lower === 0);
    if (zeroed) {
      const x = fmt(sx(zeroed.epoch));
      parts.push(
        `<g class="blacklist-flag" data-arm="${band.arm}">` +
          `<line x1="${x}" y1="${fmt(sy(0))}" x2="${x}" y2="${fmt(sy(1))}" ` +
          `stroke="#b00020" stroke-dasharray="2 2"/>` +
          `<text x="${x}" y="${fmt(sy(1) - 6)}" fill="#b00020" font-size="11" ` +
          `text-anchor="middle">${band.arm} blacklisted</text></g>`,
      );
    }
  }
  parts.push(
    `<line class="axis" x1="${margin}" y1="${fmt(sy(0))}" x2="${width - margin}" ` +
      `y2="${fmt(sy(0))}" stroke="#333"/>`,
    `<line class="axis" x1="${margin}" y1="${fmt(sy(0))}" x2="${margin}" ` +
      `y2="${fmt(sy(1))}" stroke="#333"/>`,
  );
  for (const epoch of epochs) {
    parts.push(
      `<text class="tick" x="${fmt(sx(epoch))}" y="${height - margin + 16}" ` +
        `font-size="10" text-anchor="middle">${epoch}</text>`,
    );
  }
  for (const w of [0, 0.5, 1]) {
    parts.push(
      `<text class="tick" x="${margin - 6}" y="${fmt(sy(w) + 3)}" font-size="10" ` +
        `text-anchor="end">${w}</text>`,
    );
  }
  parts.push("</svg>");
  return parts.join("\n");
}

export function renderTimeseries(
  history: HistoryResponse,
  options: ChartOptions = {},
): string {
  return renderSeries(buildSeries(history), history.campaign_id, options);
}
