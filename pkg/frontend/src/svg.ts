/**
 * Deterministic SVG chart builder.
 *
 * Pure string assembly with fixed number formatting and no timestamps, so
 * identical inputs yield byte-identical files.
 */

export type Scale = "linear" | "log";

export interface Series {
  x: number[];
  y: number[];
  label: string;
  color: string;
  dash?: string;
  width?: number;
  markers?: boolean;
}

export interface ChartOpts {
  title: string;
  xLabel: string;
  yLabel: string;
  xScale: Scale;
  yScale: Scale;
  series: Series[];
  width?: number;
  height?: number;
}

const MARGIN = { top: 42, right: 20, bottom: 46, left: 64 };

function fmt(v: number): string {
  if (!Number.isFinite(v)) return "0";
  return v.toPrecision(6).replace(/\.?0+$/, "").replace(/\.?0+e/, "e");
}

function tickLabel(v: number): string {
  const a = Math.abs(v);
  if (a !== 0 && (a >= 10000 || a < 0.01)) {
    return v.toExponential(0).replace("+", "");
  }
  return fmt(v);
}

function transform(v: number, scale: Scale): number {
  return scale === "log" ? Math.log10(v) : v;
}

function ticksFor(lo: number, hi: number, scale: Scale): number[] {
  if (scale === "log") {
    const out: number[] = [];
    const e0 = Math.ceil(lo - 1e-9);
    const e1 = Math.floor(hi + 1e-9);
    const step = Math.max(1, Math.floor((e1 - e0) / 8) + (e1 - e0 >= 8 ? 1 : 0));
    for (let e = e0; e <= e1; e += step) out.push(Math.pow(10, e));
    return out.length >= 2 ? out : [Math.pow(10, lo), Math.pow(10, hi)];
  }
  const span = hi - lo || 1;
  const raw = span / 6;
  const mag = Math.pow(10, Math.floor(Math.log10(raw)));
  const step = [1, 2, 5, 10].map((m) => m * mag).find((s) => span / s <= 7) ?? mag * 10;
  const out: number[] = [];
  for (let v = Math.ceil(lo / step) * step; v <= hi + 1e-12; v += step) {
    out.push(Math.abs(v) < step * 1e-9 ? 0 : v);
  }
  return out;
}

export function renderChart(opts: ChartOpts): string {
  const W = opts.width ?? 760;
  const H = opts.height ?? 480;
  const iw = W - MARGIN.left - MARGIN.right;
  const ih = H - MARGIN.top - MARGIN.bottom;

  const pts = opts.series.flatMap((s) =>
    s.x.map((x, i) => [x, s.y[i]] as const).filter(
      ([x, y]) =>
        Number.isFinite(x) && Number.isFinite(y) &&
        (opts.xScale !== "log" || x > 0) && (opts.yScale !== "log" || y > 0)
    )
  );
  if (pts.length === 0) {
    throw new Error("nothing to plot after scale filtering");
  }
  const xs = pts.map(([x]) => transform(x, opts.xScale));
  const ys = pts.map(([, y]) => transform(y, opts.yScale));
  let x0 = Math.min(...xs);
  let x1 = Math.max(...xs);
  let y0 = Math.min(...ys);
  let y1 = Math.max(...ys);
  if (x1 - x0 < 1e-12) { x0 -= 0.5; x1 += 0.5; }
  if (y1 - y0 < 1e-12) { y0 -= 0.5; y1 += 0.5; }
  const padY = 0.05 * (y1 - y0);
  y0 -= padY;
  y1 += padY;

  const px = (x: number) => MARGIN.left + ((transform(x, opts.xScale) - x0) / (x1 - x0)) * iw;
  const py = (y: number) => MARGIN.top + ih - ((transform(y, opts.yScale) - y0) / (y1 - y0)) * ih;

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${W}" height="${H}" ` +
      `viewBox="0 0 ${W} ${H}" font-family="Helvetica, Arial, sans-serif">`
  );
  parts.push(`<rect width="${W}" height="${H}" fill="#ffffff"/>`);
  parts.push(
    `<text x="${W / 2}" y="24" text-anchor="middle" font-size="15" fill="#1b1b1b">` +
      `${escapeXml(opts.title)}</text>`
  );

  // axes and grid
  for (const t of ticksFor(x0, x1, opts.xScale)) {
    const gx = fmt(px(t));
    parts.push(
      `<line x1="${gx}" y1="${MARGIN.top}" x2="${gx}" y2="${MARGIN.top + ih}" ` +
        `stroke="#dddddd" stroke-width="1"/>`
    );
    parts.push(
      `<text x="${gx}" y="${MARGIN.top + ih + 18}" text-anchor="middle" ` +
        `font-size="11" fill="#444444">${tickLabel(t)}</text>`
    );
  }
  for (const t of ticksFor(y0, y1, opts.yScale)) {
    const gy = fmt(py(t));
    parts.push(
      `<line x1="${MARGIN.left}" y1="${gy}" x2="${MARGIN.left + iw}" y2="${gy}" ` +
        `stroke="#dddddd" stroke-width="1"/>`
    );
    parts.push(
      `<text x="${MARGIN.left - 8}" y="${gy}" text-anchor="end" dy="4" ` +
        `font-size="11" fill="#444444">${tickLabel(t)}</text>`
    );
  }
  parts.push(
    `<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${iw}" height="${ih}" ` +
      `fill="none" stroke="#333333" stroke-width="1"/>`
  );
  parts.push(
    `<text x="${MARGIN.left + iw / 2}" y="${H - 10}" text-anchor="middle" ` +
      `font-size="12" fill="#1b1b1b">${escapeXml(opts.xLabel)}</text>`
  );
  parts.push(
    `<text x="16" y="${MARGIN.top + ih / 2}" text-anchor="middle" font-size="12" ` +
      `fill="#1b1b1b" transform="rotate(-90 16 ${MARGIN.top + ih / 2})">` +
      `${escapeXml(opts.yLabel)}</text>`
  );

  // series
  for (const s of opts.series) {
    const coords: string[] = [];
    for (let i = 0; i < s.x.length; i++) {
      const x = s.x[i];
      const y = s.y[i];
      if (!Number.isFinite(x) || !Number.isFinite(y)) continue;
      if ((opts.xScale === "log" && x <= 0) || (opts.yScale === "log" && y <= 0)) continue;
      coords.push(`${fmt(px(x))},${fmt(py(y))}`);
    }
    if (coords.length === 0) continue;
    const dash = s.dash ? ` stroke-dasharray="${s.dash}"` : "";
    parts.push(
      `<polyline points="${coords.join(" ")}" fill="none" stroke="${s.color}" ` +
        `stroke-width="${s.width ?? 1.6}"${dash}/>`
    );
    if (s.markers) {
      for (const c of coords) {
        const [cx, cy] = c.split(",");
        parts.push(`<circle cx="${cx}" cy="${cy}" r="2.4" fill="${s.color}"/>`);
      }
    }
  }

  // legend
  let ly = MARGIN.top + 12;
  for (const s of opts.series) {
    const lx = MARGIN.left + 12;
    const dash = s.dash ? ` stroke-dasharray="${s.dash}"` : "";
    parts.push(
      `<line x1="${lx}" y1="${ly - 4}" x2="${lx + 26}" y2="${ly - 4}" ` +
        `stroke="${s.color}" stroke-width="${s.width ?? 1.6}"${dash}/>`
    );
    parts.push(
      `<text x="${lx + 32}" y="${ly}" font-size="11" fill="#1b1b1b">` +
        `${escapeXml(s.label)}</text>`
    );
    ly += 16;
  }

  parts.push("</svg>");
  return parts.join("\n") + "\n";
}

function escapeXml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}
