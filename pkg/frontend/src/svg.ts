/** Minimal deterministic SVG assembly: no DOM, no timestamps, no randomness. */

export interface Margin {
  top: number;
  right: number;
  bottom: number;
  left: number;
}

export const DEFAULT_MARGIN: Margin = { top: 30, right: 20, bottom: 45, left: 60 };

const fmt = (v: number) => {
  const s = v.toPrecision(6);
  return s.includes('.') ? s.replace(/\.?0+$/, '') : s;
};

export class Svg {
  private parts: string[] = [];

  constructor(
    readonly width: number,
    readonly height: number,
  ) {}

  rect(x: number, y: number, w: number, h: number, fill: string, stroke = 'none'): void {
    this.parts.push(
      `<rect x="${fmt(x)}" y="${fmt(y)}" width="${fmt(Math.max(w, 0))}" ` +
        `height="${fmt(Math.max(h, 0))}" fill="${fill}" stroke="${stroke}" stroke-width="0.5"/>`,
    );
  }

  line(x1: number, y1: number, x2: number, y2: number, stroke = '#333', width = 1): void {
    this.parts.push(
      `<line x1="${fmt(x1)}" y1="${fmt(y1)}" x2="${fmt(x2)}" y2="${fmt(y2)}" ` +
        `stroke="${stroke}" stroke-width="${width}"/>`,
    );
  }

  polyline(points: [number, number][], stroke: string): void {
    const attr = points.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(' ');
    this.parts.push(
      `<polyline points="${attr}" fill="none" stroke="${stroke}" stroke-width="1.5"/>`,
    );
  }

  circle(x: number, y: number, r: number, fill: string): void {
    this.parts.push(`<circle cx="${fmt(x)}" cy="${fmt(y)}" r="${r}" fill="${fill}"/>`);
  }

  text(x: number, y: number, content: string, opts: { anchor?: string; size?: number } = {}): void {
    const anchor = opts.anchor ?? 'middle';
    const size = opts.size ?? 11;
    this.parts.push(
      `<text x="${fmt(x)}" y="${fmt(y)}" text-anchor="${anchor}" ` +
        `font-family="sans-serif" font-size="${size}">${escapeXml(content)}</text>`,
    );
  }

  render(): string {
    return (
      `<svg xmlns="http://www.w3.org/2000/svg" width="${this.width}" ` +
      `height="${this.height}" viewBox="0 0 ${this.width} ${this.height}">\n` +
      `<rect width="${this.width}" height="${this.height}" fill="white"/>\n` +
      this.parts.join('\n') +
      '\n</svg>\n'
    );
  }
}

export function escapeXml(s: string): string {
  return s
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

export interface Scale {
  (v: number): number;
  ticks: number[];
}

export function linearScale(lo: number, hi: number, outLo: number, outHi: number): Scale {
  const span = hi - lo || 1;
  const f = ((v: number) => outLo + ((v - lo) / span) * (outHi - outLo)) as Scale;
  const step = niceStep(span / 5);
  const ticks: number[] = [];
  for (let t = Math.ceil(lo / step) * step; t <= hi + 1e-12; t += step) ticks.push(t);
  f.ticks = ticks;
  return f;
}

export function logScale(lo: number, hi: number, outLo: number, outHi: number): Scale {
  const a = Math.log10(lo);
  const b = Math.log10(hi);
  const span = b - a || 1;
  const f = ((v: number) => outLo + ((Math.log10(v) - a) / span) * (outHi - outLo)) as Scale;
  const ticks: number[] = [];
  for (let e = Math.floor(a); e <= Math.ceil(b); e += 1) ticks.push(10 ** e);
  f.ticks = ticks;
  return f;
}

function niceStep(raw: number): number {
  const mag = 10 ** Math.floor(Math.log10(raw));
  const r = raw / mag;
  if (r < 1.5) return mag;
  if (r < 3.5) return 2 * mag;
  if (r < 7.5) return 5 * mag;
  return 10 * mag;
}

export function tickLabel(v: number): string {
  if (v !== 0 && (Math.abs(v) < 1e-3 || Math.abs(v) >= 1e5)) {
    return v.toExponential(0).replace('e+', 'e');
  }
  return `${Number(v.toPrecision(6))}`;
}
