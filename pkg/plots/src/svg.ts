/**
 * Minimal deterministic SVG chart builders: a log-x line plot and a grouped
 * bar figure. No timestamps, no randomness: identical inputs give identical
 * bytes. Layout constants are fixed; callers only supply data and labels.
 */

export const WIDTH = 860;
export const HEIGHT = 520;
const MARGIN = { left: 72, right: 24, top: 34, bottom: 56 };

/** Scheme-indexed palette, extended for ad-hoc groups. */
export const PALETTE = [
  "#1f77b4", // blue
  "#2ca02c", // green
  "#d62728", // red
  "#e0a800", // yellow
  "#9467bd",
  "#17becf",
  "#8c564b",
  "#7f7f7f",
];

export function escapeXml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function fmt(v: number): string {
  return Number(v.toPrecision(6)).toString();
}

function niceTicks(lo: number, hi: number, target = 5): number[] {
  if (!(hi > lo)) return [lo];
  const span = hi - lo;
  const step0 = span / target;
  const mag = Math.pow(10, Math.floor(Math.log10(step0)));
  const step = [1, 2, 5, 10].map((m) => m * mag).find((s) => span / s <= target) ?? 10 * mag;
  const ticks: number[] = [];
  for (let v = Math.ceil(lo / step) * step; v <= hi + 1e-12 * span; v += step) {
    ticks.push(v);
  }
  return ticks;
}

export interface LineSeries {
  label: string;
  color: string;
  xs: number[];
  ys: number[];
}

export interface LinePlotOptions {
  title: string;
  xLabel: string;
  yLabel: string;
}

/** Log-x line plot with a legend row per series. */
export function linePlot(series: LineSeries[], opts: LinePlotOptions): string {
  const pts = series.flatMap((s) => s.xs.map((x, i) => [x, s.ys[i]]));
  const xsPos = pts.map(([x]) => x).filter((x) => x > 0);
  if (xsPos.length === 0) {
    throw new Error("line plot needs positive x values for the log axis");
  }
  const xLo = Math.log10(Math.min(...xsPos));
  const xHi = Math.log10(Math.max(...xsPos));
  const xSpan = xHi > xLo ? xHi - xLo : 1;
  const ysAll = pts.map(([, y]) => y);
  const yMin = Math.min(...ysAll);
  const yLo = yMin > 0 ? 0 : yMin * 1.05;
  const yHi = Math.max(...ysAll) * 1.05 || 1;

  const plotW = WIDTH - MARGIN.left - MARGIN.right;
  const plotH = HEIGHT - MARGIN.top - MARGIN.bottom;
  const px = (x: number) => MARGIN.left + ((Math.log10(x) - xLo) / xSpan) * plotW;
  const py = (y: number) => MARGIN.top + (1 - (y - yLo) / (yHi - yLo)) * plotH;

  const out: string[] = [];
  out.push(`<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}" font-family="Helvetica, Arial, sans-serif">`);
  out.push(`<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`);
  out.push(`<text x="${WIDTH / 2}" y="20" text-anchor="middle" font-size="15">${escapeXml(opts.title)}</text>`);

  // log-x ticks at powers of ten, with minor decade gridlines
  for (let e = Math.ceil(xLo - 1e-9); e <= Math.floor(xHi + 1e-9); e++) {
    const x = px(Math.pow(10, e));
    out.push(`<line class="xtick" x1="${fmt(x)}" y1="${MARGIN.top}" x2="${fmt(x)}" y2="${MARGIN.top + plotH}" stroke="#dddddd"/>`);
    out.push(`<text x="${fmt(x)}" y="${MARGIN.top + plotH + 18}" text-anchor="middle" font-size="12">1e${e}</text>`);
  }
  for (const t of niceTicks(yLo, yHi)) {
    const y = py(t);
    out.push(`<line class="ytick" x1="${MARGIN.left}" y1="${fmt(y)}" x2="${MARGIN.left + plotW}" y2="${fmt(y)}" stroke="#eeeeee"/>`);
    out.push(`<text x="${MARGIN.left - 8}" y="${fmt(y + 4)}" text-anchor="end" font-size="12">${fmt(t)}</text>`);
  }
  out.push(`<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${plotW}" height="${plotH}" fill="none" stroke="#333333"/>`);

  for (const s of series) {
    const coords = s.xs
      .map((x, i) => [x, s.ys[i]])
      .filter(([x]) => x > 0)
      .map(([x, y]) => `${fmt(px(x))},${fmt(py(y))}`)
      .join(" ");
    out.push(`<polyline class="series" data-label="${escapeXml(s.label)}" points="${coords}" fill="none" stroke="${s.color}" stroke-width="1.8"/>`);
  }

  // legend, top right inside the plot area
  const legendX = MARGIN.left + plotW - 230;
  series.forEach((s, i) => {
    const y = MARGIN.top + 16 + i * 18;
    out.push(`<line x1="${legendX}" y1="${y - 4}" x2="${legendX + 26}" y2="${y - 4}" stroke="${s.color}" stroke-width="3"/>`);
    out.push(`<text class="legend" x="${legendX + 34}" y="${y}" font-size="12">${escapeXml(s.label)}</text>`);
  });

  out.push(`<text x="${MARGIN.left + plotW / 2}" y="${HEIGHT - 14}" text-anchor="middle" font-size="13">${escapeXml(opts.xLabel)}</text>`);
  out.push(`<text x="18" y="${MARGIN.top + plotH / 2}" text-anchor="middle" font-size="13" transform="rotate(-90 18 ${MARGIN.top + plotH / 2})">${escapeXml(opts.yLabel)}</text>`);
  out.push("</svg>");
  return out.join("\n") + "\n";
}

export interface BarGroup {
  label: string; // e.g. the architecture "1x128"
  bars: { label: string; color: string; value: number }[];
}

export interface PanelSpec {
  title: string;
  yLabel: string;
  groups: BarGroup[];
}

/** Side-by-side bar panels sharing one legend (train cost | sample cost). */
export function barPanels(panels: PanelSpec[], title: string): string {
  const panelW = (WIDTH - MARGIN.left - MARGIN.right - 40 * (panels.length - 1)) / panels.length;
  const plotH = HEIGHT - MARGIN.top - MARGIN.bottom - 20;
  const out: string[] = [];
  out.push(`<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}" font-family="Helvetica, Arial, sans-serif">`);
  out.push(`<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`);
  out.push(`<text x="${WIDTH / 2}" y="20" text-anchor="middle" font-size="15">${escapeXml(title)}</text>`);

  panels.forEach((panel, pi) => {
    const x0 = MARGIN.left + pi * (panelW + 40);
    const y0 = MARGIN.top + 20;
    const values = panel.groups.flatMap((g) => g.bars.map((b) => b.value));
    const vMax = Math.max(...values, 1e-9) * 1.1;
    const py = (v: number) => y0 + (1 - v / vMax) * plotH;

    for (const t of niceTicks(0, vMax, 4)) {
      out.push(`<line x1="${fmt(x0)}" y1="${fmt(py(t))}" x2="${fmt(x0 + panelW)}" y2="${fmt(py(t))}" stroke="#eeeeee"/>`);
      out.push(`<text x="${fmt(x0 - 6)}" y="${fmt(py(t) + 4)}" text-anchor="end" font-size="11">${fmt(t)}</text>`);
    }
    out.push(`<rect x="${fmt(x0)}" y="${y0}" width="${fmt(panelW)}" height="${plotH}" fill="none" stroke="#333333"/>`);
    out.push(`<text x="${fmt(x0 + panelW / 2)}" y="${y0 - 8}" text-anchor="middle" font-size="13">${escapeXml(panel.title)}</text>`);

    const groupW = panelW / Math.max(panel.groups.length, 1);
    panel.groups.forEach((group, gi) => {
      const slot = groupW / (group.bars.length + 1);
      group.bars.forEach((bar, bi) => {
        const bx = x0 + gi * groupW + slot * (bi + 0.5);
        const by = py(bar.value);
        out.push(`<rect class="bar" data-panel="${escapeXml(panel.title)}" data-group="${escapeXml(group.label)}" data-label="${escapeXml(bar.label)}" x="${fmt(bx)}" y="${fmt(by)}" width="${fmt(slot * 0.9)}" height="${fmt(y0 + plotH - by)}" fill="${bar.color}"/>`);
      });
      out.push(`<text x="${fmt(x0 + gi * groupW + groupW / 2)}" y="${y0 + plotH + 16}" text-anchor="middle" font-size="12">${escapeXml(group.label)}</text>`);
    });
  });

  // shared legend from the first panel's first group
  const legend = panels[0]?.groups[0]?.bars ?? [];
  legend.forEach((bar, i) => {
    const lx = MARGIN.left + i * 150;
    const ly = HEIGHT - 16;
    out.push(`<rect x="${lx}" y="${ly - 10}" width="12" height="12" fill="${bar.color}"/>`);
    out.push(`<text class="legend" x="${lx + 18}" y="${ly}" font-size="12">${escapeXml(bar.label)}</text>`);
  });
  out.push("</svg>");
  return out.join("\n") + "\n";
}
