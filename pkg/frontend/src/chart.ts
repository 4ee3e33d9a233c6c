/**
 * Hand-rolled SVG line chart.  No plotting library: the output must be
 * byte-identical across runs, and the handful of primitives needed here
 * (polylines, filled bands, reference lines, a legend) fit in one file.
 */

export interface Series {
  times: number[];
  values: number[];
  color: string;
  label: string;
  width?: number;
  opacity?: number;
  dash?: string;
}

/** Filled region between two envelopes sharing one time axis. */
export interface Band {
  times: number[];
  lower: number[];
  upper: number[];
  color: string;
  label: string;
  opacity?: number;
}

export interface HLine {
  value: number;
  color: string;
  label: string;
  dash?: string;
}

export interface ChartOpts {
  title: string;
  subtitle?: string;
  yLabel: string;
  series: Series[];
  bands?: Band[];
  hLines?: HLine[];
  /** Annotation lines drawn in the top-left corner of the plot area. */
  notes?: string[];
  yMin?: number;
  yMax?: number;
}

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

function niceTicks(min: number, max: number, count: number): number[] {
  const range = max - min || 1;
  const rough = range / count;
  const mag = Math.pow(10, Math.floor(Math.log10(rough)));
  const step = [1, 2, 5, 10].map((m) => m * mag).find((n) => n >= rough) ?? rough;
  const start = Math.ceil(min / step) * step;
  const ticks: number[] = [];
  for (let v = start; v <= max + step * 0.01; v += step) ticks.push(v);
  return ticks;
}

function fmtTick(v: number): string {
  if (Math.abs(v) >= 1000) return v.toFixed(0);
  return Math.abs(v % 1) < 1e-9 ? String(Math.round(v)) : String(+v.toFixed(3));
}

export function buildChart(opts: ChartOpts): string {
  const { series, bands = [], hLines = [], notes = [] } = opts;

  const W = 700;
  const H = 280;
  const ml = 58;
  const mr = 20;
  const mt = 30;
  const mb = 40;
  const pw = W - ml - mr;
  const ph = H - mt - mb;

  // X axis in hours, spanning every series and band
  const allTimes = [...series, ...bands].flatMap((s) => s.times);
  const txMin = Math.min(...allTimes) / 3600;
  const txMax = Math.max(...allTimes) / 3600;
  const xOf = (tSec: number) =>
    ml + ((tSec / 3600 - txMin) / (txMax - txMin || 1)) * pw;

  // Y range padded by a fraction of the span so flat data stays visible
  const allVals = [
    ...series.flatMap((s) => s.values),
    ...bands.flatMap((b) => [...b.lower, ...b.upper]),
    ...hLines.map((h) => h.value),
  ];
  const rawMin = Math.min(...allVals);
  const rawMax = Math.max(...allVals);
  const span = rawMax - rawMin || Math.abs(rawMax) || 1;
  const yMin = opts.yMin ?? rawMin - 0.06 * span;
  const yMax = opts.yMax ?? rawMax + 0.1 * span;
  const yOf = (v: number) => mt + ph - ((v - yMin) / (yMax - yMin || 1)) * ph;

  let s = `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${W} ${H}" font-family="Helvetica, Arial, sans-serif">\n`;
  s += `<rect width="${W}" height="${H}" fill="#fff"/>\n`;

  s += `<text x="${ml}" y="${mt - 16}" font-size="10" font-weight="600" fill="#222">${esc(opts.title)}</text>\n`;
  if (opts.subtitle) {
    s += `<text x="${ml}" y="${mt - 6}" font-size="7" fill="#888">${esc(opts.subtitle)}</text>\n`;
  }

  s += `<defs><clipPath id="plot"><rect x="${ml}" y="${mt}" width="${pw}" height="${ph}"/></clipPath></defs>\n`;

  // Grid
  const yTicks = niceTicks(yMin, yMax, 5);
  for (const v of yTicks) {
    const y = yOf(v).toFixed(1);
    s += `<line x1="${ml}" y1="${y}" x2="${ml + pw}" y2="${y}" stroke="#eee" stroke-width="0.5"/>\n`;
  }

  // Bands under everything else
  for (const b of bands) {
    const fwd = b.times.map((t, i) => `${xOf(t).toFixed(1)},${yOf(b.upper[i]).toFixed(1)}`);
    const back = [...b.times.keys()]
      .reverse()
      .map((i) => `${xOf(b.times[i]).toFixed(1)},${yOf(b.lower[i]).toFixed(1)}`);
    s += `<polygon clip-path="url(#plot)" fill="${b.color}" opacity="${b.opacity ?? 0.15}" points="${[...fwd, ...back].join(" ")}"/>\n`;
  }

  for (const hl of hLines) {
    const y = yOf(hl.value).toFixed(1);
    s += `<line clip-path="url(#plot)" x1="${ml}" y1="${y}" x2="${ml + pw}" y2="${y}" stroke="${hl.color}" stroke-width="1" stroke-dasharray="${hl.dash ?? "6,3"}"/>\n`;
  }

  for (const sr of series) {
    const pts = sr.times
      .map((t, i) => `${xOf(t).toFixed(1)},${yOf(sr.values[i]).toFixed(1)}`)
      .join(" ");
    const dash = sr.dash ? ` stroke-dasharray="${sr.dash}"` : "";
    s += `<polyline clip-path="url(#plot)" fill="none" stroke="${sr.color}" stroke-width="${sr.width ?? 1}" opacity="${sr.opacity ?? 1}"${dash} points="${pts}"/>\n`;
  }

  // Axes frame
  s += `<line x1="${ml}" y1="${mt}" x2="${ml}" y2="${mt + ph}" stroke="#333" stroke-width="0.7"/>\n`;
  s += `<line x1="${ml}" y1="${mt + ph}" x2="${ml + pw}" y2="${mt + ph}" stroke="#333" stroke-width="0.7"/>\n`;

  for (const v of niceTicks(txMin, txMax, 8)) {
    const x = (ml + ((v - txMin) / (txMax - txMin || 1)) * pw).toFixed(1);
    s += `<line x1="${x}" y1="${mt + ph}" x2="${x}" y2="${mt + ph + 3}" stroke="#333" stroke-width="0.5"/>\n`;
    s += `<text x="${x}" y="${mt + ph + 12}" text-anchor="middle" font-size="6.5" fill="#666">${fmtTick(v)}</text>\n`;
  }
  s += `<text x="${ml + pw / 2}" y="${H - 6}" text-anchor="middle" font-size="8" fill="#444">Time (h)</text>\n`;

  for (const v of yTicks) {
    const y = yOf(v);
    s += `<line x1="${ml - 3}" y1="${y.toFixed(1)}" x2="${ml}" y2="${y.toFixed(1)}" stroke="#333" stroke-width="0.5"/>\n`;
    s += `<text x="${ml - 5}" y="${(y + 2.5).toFixed(1)}" text-anchor="end" font-size="6.5" fill="#666">${fmtTick(v)}</text>\n`;
  }
  s += `<text x="14" y="${mt + ph / 2}" text-anchor="middle" font-size="8" fill="#444" transform="rotate(-90,14,${mt + ph / 2})">${esc(opts.yLabel)}</text>\n`;

  // Legend, top right
  const entries = [
    ...bands.map((b) => ({ color: b.color, label: b.label, dash: "", band: true })),
    ...series.map((sr) => ({ color: sr.color, label: sr.label, dash: sr.dash ?? "", band: false })),
    ...hLines.map((hl) => ({ color: hl.color, label: hl.label, dash: hl.dash ?? "6,3", band: false })),
  ];
  if (entries.length > 0) {
    const lw = Math.max(...entries.map((e) => e.label.length)) * 4.2 + 26;
    const lh = entries.length * 10 + 6;
    const lx = ml + pw - lw - 6;
    const ly = mt + 5;
    s += `<rect x="${lx}" y="${ly}" width="${lw}" height="${lh}" rx="2" fill="white" fill-opacity="0.85" stroke="#ddd" stroke-width="0.5"/>\n`;
    entries.forEach((e, i) => {
      const ey = ly + 9 + i * 10;
      if (e.band) {
        s += `<rect x="${lx + 5}" y="${ey - 4}" width="12" height="5" fill="${e.color}" opacity="0.3"/>\n`;
      } else {
        const dash = e.dash ? ` stroke-dasharray="${e.dash}"` : "";
        s += `<line x1="${lx + 5}" y1="${ey - 2}" x2="${lx + 17}" y2="${ey - 2}" stroke="${e.color}" stroke-width="1.4"${dash}/>\n`;
      }
      s += `<text x="${lx + 21}" y="${ey}" font-size="6.5" fill="#333">${esc(e.label)}</text>\n`;
    });
  }

  // Annotations, top left
  notes.forEach((note, i) => {
    s += `<text x="${ml + 6}" y="${mt + 11 + i * 10}" font-size="7.5" font-weight="600" fill="#222">${esc(note)}</text>\n`;
  });

  s += `</svg>\n`;
  return s;
}
