/** Tiny deterministic SVG plotter: fixed styles, fixed precision, no
 * timestamps, so re-rendering the same data is byte-identical. */

const PALETTE = [
  "#1f77b4", "#d62728", "#2ca02c", "#9467bd",
  "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

export function seriesColor(i: number): string {
  return PALETTE[i % PALETTE.length];
}

const f = (v: number): string => {
  if (!Number.isFinite(v)) return "0";
  return v.toFixed(2).replace(/-0\.00/, "0.00");
};

export interface Scale {
  (v: number): number;
  ticks: number[];
  label: (v: number) => string;
}

export function linearScale(
  lo: number, hi: number, outLo: number, outHi: number, tickCount = 5,
): Scale {
  if (hi <= lo) hi = lo + 1;
  const s = ((v: number) => outLo + ((v - lo) / (hi - lo)) * (outHi - outLo)) as Scale;
  const step = (hi - lo) / (tickCount - 1);
  s.ticks = Array.from({ length: tickCount }, (_, i) => lo + i * step);
  s.label = (v) => {
    const a = Math.abs(v);
    if (a !== 0 && (a < 1e-2 || a >= 1e4)) return v.toExponential(1);
    return Number(v.toPrecision(3)).toString();
  };
  return s;
}

export function log10Scale(
  lo: number, hi: number, outLo: number, outHi: number,
): Scale {
  const llo = Math.log10(lo);
  const lhi = Math.log10(hi <= lo ? lo * 10 : hi);
  const s = ((v: number) =>
    outLo + ((Math.log10(v) - llo) / (lhi - llo)) * (outHi - outLo)) as Scale;
  const first = Math.ceil(llo);
  const last = Math.floor(lhi);
  s.ticks = [];
  for (let e = first; e <= last; e++) s.ticks.push(Math.pow(10, e));
  if (s.ticks.length === 0) s.ticks = [lo, hi];
  s.label = (v) => `1e${Math.round(Math.log10(v))}`;
  return s;
}

export class Svg {
  readonly width: number;
  readonly height: number;
  private parts: string[] = [];

  constructor(width = 640, height = 420) {
    this.width = width;
    this.height = height;
  }

  line(x1: number, y1: number, x2: number, y2: number, stroke: string,
       width = 1, dash = ""): void {
    const d = dash ? ` stroke-dasharray="${dash}"` : "";
    this.parts.push(
      `<line x1="${f(x1)}" y1="${f(y1)}" x2="${f(x2)}" y2="${f(y2)}" ` +
      `stroke="${stroke}" stroke-width="${width}"${d}/>`);
  }

  polyline(points: Array<[number, number]>, stroke: string, width = 2): void {
    const pts = points.map(([x, y]) => `${f(x)},${f(y)}`).join(" ");
    this.parts.push(
      `<polyline fill="none" stroke="${stroke}" stroke-width="${width}" points="${pts}"/>`);
  }

  circle(x: number, y: number, r: number, fill: string): void {
    this.parts.push(`<circle cx="${f(x)}" cy="${f(y)}" r="${r}" fill="${fill}"/>`);
  }

  rect(x: number, y: number, w: number, h: number, fill: string): void {
    this.parts.push(
      `<rect x="${f(x)}" y="${f(y)}" width="${f(w)}" height="${f(h)}" fill="${fill}"/>`);
  }

  text(x: number, y: number, content: string, size = 12,
       anchor: "start" | "middle" | "end" = "middle", rotate = 0): void {
    const tr = rotate ? ` transform="rotate(${rotate} ${f(x)} ${f(y)})"` : "";
    this.parts.push(
      `<text x="${f(x)}" y="${f(y)}" font-family="Helvetica,Arial,sans-serif" ` +
      `font-size="${size}" text-anchor="${anchor}"${tr}>${escapeXml(content)}</text>`);
  }

  render(): string {
    return (
      `<svg xmlns="http://www.w3.org/2000/svg" width="${this.width}" ` +
      `height="${this.height}" viewBox="0 0 ${this.width} ${this.height}">\n` +
      `<rect width="${this.width}" height="${this.height}" fill="white"/>\n` +
      this.parts.join("\n") +
      "\n</svg>\n");
  }
}

function escapeXml(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export interface Frame {
  svg: Svg;
  x: Scale;
  y: Scale;
}

/** Standard frame: margins, axes, tick labels, axis titles. */
export function frame(
  xLo: number, xHi: number, yLo: number, yHi: number,
  xLabel: string, yLabel: string, title: string,
  opts: { logX?: boolean } = {},
): Frame {
  const svg = new Svg();
  const m = { left: 64, right: 16, top: 36, bottom: 48 };
  const x = opts.logX
    ? log10Scale(xLo, xHi, m.left, svg.width - m.right)
    : linearScale(xLo, xHi, m.left, svg.width - m.right);
  const pad = 0.06 * (yHi - yLo || 1);
  const y = linearScale(yLo - pad, yHi + pad, svg.height - m.bottom, m.top);
  svg.line(m.left, svg.height - m.bottom, svg.width - m.right,
           svg.height - m.bottom, "#000");
  svg.line(m.left, m.top, m.left, svg.height - m.bottom, "#000");
  for (const t of x.ticks) {
    const px = x(t);
    svg.line(px, svg.height - m.bottom, px, svg.height - m.bottom + 4, "#000");
    svg.text(px, svg.height - m.bottom + 18, x.label(t), 11);
    svg.line(px, m.top, px, svg.height - m.bottom, "#eee");
  }
  for (const t of y.ticks) {
    const py = y(t);
    svg.line(m.left - 4, py, m.left, py, "#000");
    svg.text(m.left - 8, py + 4, y.label(t), 11, "end");
    svg.line(m.left, py, svg.width - m.right, py, "#eee");
  }
  svg.text((m.left + svg.width - m.right) / 2, svg.height - 12, xLabel, 13);
  svg.text(18, (m.top + svg.height - m.bottom) / 2, yLabel, 13, "middle", -90);
  svg.text((m.left + svg.width - m.right) / 2, 20, title, 14);
  return { svg, x, y };
}

export function legend(fr: Frame, names: string[]): void {
  names.forEach((name, i) => {
    const yPos = 44 + 16 * i;
    fr.svg.line(fr.svg.width - 160, yPos - 4, fr.svg.width - 136, yPos - 4,
                seriesColor(i), 3);
    fr.svg.text(fr.svg.width - 130, yPos, name, 11, "start");
  });
}
