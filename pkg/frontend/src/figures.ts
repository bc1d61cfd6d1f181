/** Figure builders: one per experiment CSV, series = schemes, error bars =
 * across-seed standard deviation. */

import {
  Table, SchemaError, requireColumns, strColumn, numColumn, groupBy, mean, std,
} from "./csv.ts";
import { frame, legend, seriesColor, Frame } from "./svg.ts";

export interface Rendered {
  svg: string;
  seriesCount: number;
}

export type FigureId =
  | "fig3" | "fig4" | "fig5" | "fig6" | "fig7" | "fig8" | "fig9";

interface SweepSeries {
  scheme: string;
  points: Array<{ x: number; y: number; err: number }>;
}

function sweepSeries(table: Table, xCol: string, yCol: string): SweepSeries[] {
  requireColumns(table, ["scheme", "seed", xCol, yCol]);
  const schemes = strColumn(table, "scheme");
  const xs = numColumn(table, xCol);
  const ys = numColumn(table, yCol);
  const bySeries = groupBy(schemes, xs.map((x, i) => ({ x, y: ys[i] })));
  const out: SweepSeries[] = [];
  for (const [scheme, pts] of bySeries) {
    const byX = groupBy(pts.map((p) => String(p.x)), pts.map((p) => p.y));
    const points = [...byX.entries()]
      .map(([x, v]) => ({ x: Number(x), y: mean(v), err: std(v) }))
      .sort((a, b) => a.x - b.x);
    out.push({ scheme, points });
  }
  out.sort((a, b) => a.scheme.localeCompare(b.scheme));
  return out;
}

function drawSweep(
  series: SweepSeries[], xLabel: string, title: string,
  opts: { logX?: boolean } = {},
): Rendered {
  const allX = series.flatMap((s) => s.points.map((p) => p.x));
  const allY = series.flatMap((s) => s.points.flatMap((p) => [p.y - p.err, p.y + p.err]));
  const fr = frame(Math.min(...allX), Math.max(...allX),
                   Math.min(...allY), Math.max(...allY),
                   xLabel, "weighted sum rate (bit/s/Hz)", title, opts);
  series.forEach((s, i) => {
    const color = seriesColor(i);
    fr.svg.polyline(s.points.map((p) => [fr.x(p.x), fr.y(p.y)]), color);
    for (const p of s.points) {
      fr.svg.circle(fr.x(p.x), fr.y(p.y), 3, color);
      if (p.err > 0) {
        fr.svg.line(fr.x(p.x), fr.y(p.y - p.err), fr.x(p.x), fr.y(p.y + p.err), color);
        fr.svg.line(fr.x(p.x) - 3, fr.y(p.y - p.err), fr.x(p.x) + 3, fr.y(p.y - p.err), color);
        fr.svg.line(fr.x(p.x) - 3, fr.y(p.y + p.err), fr.x(p.x) + 3, fr.y(p.y + p.err), color);
      }
    }
  });
  legend(fr, series.map((s) => s.scheme));
  return { svg: fr.svg.render(), seriesCount: series.length };
}

function figConvergence(table: Table): Rendered {
  requireColumns(table, ["scheme", "seed", "iteration", "objective"]);
  const series = sweepSeries(table, "iteration", "objective");
  return drawSweep(series, "outer iteration", "convergence of the alternating optimization");
}

function figTradeoff(table: Table): Rendered {
  requireColumns(table, ["scheme", "swept_value", "ul_rate", "dl_sum_rate"]);
  const schemes = strColumn(table, "scheme");
  const dl = numColumn(table, "dl_sum_rate");
  const ul = numColumn(table, "ul_rate");
  const sweptValues = strColumn(table, "swept_value");
  const bySeries = groupBy(
    schemes, sweptValues.map((w, i) => ({ w, dl: dl[i], ul: ul[i] })));
  const names = [...bySeries.keys()].sort();
  const allDl = dl.filter(Number.isFinite);
  const allUl = ul.filter(Number.isFinite);
  const fr = frame(Math.min(...allDl), Math.max(...allDl),
                   Math.min(...allUl), Math.max(...allUl),
                   "DL sum rate (bit/s/Hz)", "UL sum rate (bit/s/Hz)",
                   "uplink/downlink rate region");
  names.forEach((scheme, i) => {
    const rows = bySeries.get(scheme)!;
    const byW = groupBy(rows.map((r) => r.w), rows);
    const pts = [...byW.values()].map((v) => ({
      dl: mean(v.map((r) => r.dl)), ul: mean(v.map((r) => r.ul)),
    }));
    // non-dominated frontier (maximize both coordinates)
    const frontier = pts
      .filter((p) => !pts.some((q) => q !== p && q.dl >= p.dl && q.ul >= p.ul
        && (q.dl > p.dl || q.ul > p.ul)))
      .sort((a, b) => a.dl - b.dl);
    const color = seriesColor(i);
    for (const p of pts) fr.svg.circle(fr.x(p.dl), fr.y(p.ul), 3.5, color);
    if (frontier.length > 1) {
      fr.svg.polyline(frontier.map((p) => [fr.x(p.dl), fr.y(p.ul)]), color);
    }
  });
  legend(fr, names);
  return { svg: fr.svg.render(), seriesCount: names.length };
}

function figOrderBars(table: Table): Rendered {
  const cols = ["objective_heuristic", "objective_random", "objective_exhaustive"];
  requireColumns(table, ["seed", ...cols]);
  const seeds = strColumn(table, "seed");
  const values = cols.map((c) => numColumn(table, c));
  const yMax = Math.max(...values.flat());
  const fr = frame(-0.5, seeds.length - 0.5, 0, yMax, "seed",
                   "weighted sum rate (bit/s/Hz)",
                   "decoding-order strategies");
  const names = ["heuristic", "random", "exhaustive"];
  const group = 0.72;
  const bar = group / names.length;
  seeds.forEach((_, s) => {
    names.forEach((__, c) => {
      const x0 = fr.x(s - group / 2 + c * bar);
      const x1 = fr.x(s - group / 2 + (c + 1) * bar);
      const y0 = fr.y(values[c][s]);
      fr.svg.rect(x0, y0, x1 - x0 - 1, fr.y(0) - y0, seriesColor(c));
    });
  });
  legend(fr, names);
  return { svg: fr.svg.render(), seriesCount: names.length };
}

export const FIGURES: Record<FigureId, (t: Table) => Rendered> = {
  fig3: figConvergence,
  fig4: (t) => drawSweep(sweepSeries(t, "swept_value", "objective"),
                         "number of STAR-RIS elements", "rate vs array size"),
  fig5: (t) => drawSweep(sweepSeries(t, "swept_value", "objective"),
                         "residual SI coefficient", "rate vs self-interference",
                         { logX: true }),
  fig6: figTradeoff,
  fig7: (t) => drawSweep(sweepSeries(t, "swept_value", "objective"),
                         "STAR-RIS x-coordinate (m)", "rate vs surface location"),
  fig8: (t) => drawSweep(sweepSeries(t, "swept_value", "objective"),
                         "number of users per link", "rate vs user count"),
  fig9: figOrderBars,
};

export function renderFigure(figId: string, table: Table): Rendered {
  const fn = FIGURES[figId as FigureId];
  if (!fn) {
    throw new SchemaError(
      `unknown figure id '${figId}' (expected fig3..fig9)`);
  }
  return fn(table);
}
