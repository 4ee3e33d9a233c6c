/**
 * Figure builders over a parsed telemetry log.
 *
 * Each kind declares the streams it needs and refuses to draw without
 * them; a missing stream is an error naming the stream, never a blank
 * plot.  Annotated numbers (max tracking error, band violation count)
 * are computed with the same reductions the run summary uses, so they
 * match `summary.txt` digit for digit.
 */

import { buildChart, type Band, type HLine, type Series } from "./chart.js";
import {
  feedersIn,
  groupByTime,
  seriesOf,
  streamsIn,
  type Sample,
} from "./telemetry.js";

export const FIGURE_KINDS = [
  "head_profile",
  "load_quartiles",
  "q_tracking",
  "voltage_envelope",
] as const;

export type FigureKind = (typeof FIGURE_KINDS)[number];

export class MissingStreamError extends Error {
  readonly streams: string[];

  constructor(streams: string[]) {
    super(`no samples for stream ${streams.join(", ")}`);
    this.streams = streams;
  }
}

export class FeederError extends Error {}

// Voltage band shared with the orchestrator's summary accounting
const V_LO = 0.95;
const V_HI = 1.05;

/**
 * Resolve a requested feeder against the ids present for one stream
 * family.  Accepts a feeder name or a 1-based index into the sorted id
 * list; undefined picks the first id.
 */
function resolveFeeder(
  available: string[],
  wanted: string | undefined,
  kind: string,
): string {
  if (wanted === undefined) return available[0];
  if (available.includes(wanted)) return wanted;
  if (/^[0-9]+$/.test(wanted)) {
    const i = Number(wanted);
    if (i >= 1 && i <= available.length) return available[i - 1];
  }
  throw new FeederError(
    `unknown feeder "${wanted}" for ${kind}; available: ${available.join(", ")}`,
  );
}

function requireSeries(samples: Sample[], names: string[]) {
  const missing = names.filter(
    (n) => !samples.some((s) => s.stream === n),
  );
  if (missing.length > 0) throw new MissingStreamError(missing);
  return names.map((n) => seriesOf(samples, n));
}

function headProfile(samples: Sample[], feeder: string | undefined): string {
  const ids = feedersIn(samples, "head_p");
  if (ids.length === 0) throw new MissingStreamError(["head_p.*"]);
  const f = resolveFeeder(ids, feeder, "head_profile");
  const [head] = requireSeries(samples, [`head_p.${f}`]);

  const series: Series[] = [
    { ...head, color: "#2f3e46", label: "feeder head P", width: 1.2 },
  ];
  const solarStreams = streamsIn(samples, `solar_p.${f}`);
  if (solarStreams.length > 0) {
    const { times, groups } = groupByTime(samples, solarStreams);
    series.push({
      times,
      values: groups.map((g) => g.reduce((a, b) => a + b, 0)),
      color: "#f9a825",
      label: "solar P",
      width: 1.2,
    });
  }
  return buildChart({
    title: `Feeder head load and solar profile, ${f}`,
    subtitle: `${head.times.length} samples`,
    yLabel: "P (kW)",
    series,
  });
}

function quantile(sorted: number[], q: number): number {
  const pos = (sorted.length - 1) * q;
  const lo = Math.floor(pos);
  const hi = Math.ceil(pos);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo);
}

function loadQuartiles(samples: Sample[], feeder: string | undefined): string {
  const ids = feedersIn(samples, "load_p");
  if (ids.length === 0) throw new MissingStreamError(["load_p.*"]);
  const f = resolveFeeder(ids, feeder, "load_quartiles");
  const streams = streamsIn(samples, `load_p.${f}`);
  const { times, groups } = groupByTime(samples, streams);

  const sorted = groups.map((g) => [...g].sort((a, b) => a - b));
  const band = (qlo: number, qhi: number) => ({
    times,
    lower: sorted.map((g) => quantile(g, qlo)),
    upper: sorted.map((g) => quantile(g, qhi)),
  });
  const bands: Band[] = [
    { ...band(0, 1), color: "#1565c0", opacity: 0.12, label: "min to max" },
    { ...band(0.25, 0.75), color: "#1565c0", opacity: 0.28, label: "quartile band" },
  ];
  const median: Series = {
    times,
    values: sorted.map((g) => quantile(g, 0.5)),
    color: "#1565c0",
    label: "median",
    width: 1.3,
  };
  return buildChart({
    title: `Nodal load quartiles, ${f}`,
    subtitle: `${streams.length} load nodes, ${times.length} samples each`,
    yLabel: "P (kW)",
    series: [median],
    bands,
  });
}

function qTracking(samples: Sample[]): string {
  const [baseline, req, resp, err] = requireSeries(samples, [
    "vvc.q_baseline",
    "vvc.q_req",
    "vvc.q_resp",
    "vvc.q_error",
  ]);
  const maxErr = Math.max(...err.values.map(Math.abs));
  const series: Series[] = [
    { ...baseline, color: "#999", label: "baseline", dash: "4,3" },
    { ...req, color: "#c2185b", label: "request", width: 1.2 },
    { ...resp, color: "#1565c0", label: "response", width: 1.2 },
    { ...err, color: "#d32f2f", label: "error", width: 1 },
  ];
  return buildChart({
    title: "Distribution reactive power tracking",
    subtitle: `${err.times.length} control intervals`,
    yLabel: "Q (kvar)",
    series,
    notes: [`max |error| ${maxErr.toFixed(6)} kvar`],
  });
}

function voltageEnvelope(samples: Sample[], feeder: string | undefined): string {
  const ids = feedersIn(samples, "v");
  if (ids.length === 0) throw new MissingStreamError(["v.*"]);
  const f = resolveFeeder(ids, feeder, "voltage_envelope");
  const streams = streamsIn(samples, `v.${f}`);
  const { times, groups } = groupByTime(samples, streams);

  const lower = groups.map((g) => Math.min(...g));
  const upper = groups.map((g) => Math.max(...g));
  // Violations are counted over every feeder so the number matches the
  // run summary no matter which feeder is drawn
  let violations = 0;
  for (const s of samples) {
    if (!s.stream.startsWith("v.")) continue;
    if (s.value < V_LO || s.value > V_HI) violations++;
  }

  const bands: Band[] = [
    { times, lower, upper, color: "#1565c0", opacity: 0.18, label: "nodal range" },
  ];
  const series: Series[] = [
    { times, values: upper, color: "#1565c0", label: "max node", width: 1 },
    { times, values: lower, color: "#64b5f6", label: "min node", width: 1 },
  ];
  const hLines: HLine[] = [
    { value: V_HI, color: "#d32f2f", label: `${V_HI} p.u. limit` },
    { value: V_LO, color: "#888", label: `${V_LO} p.u.` },
  ];
  return buildChart({
    title: `Nodal voltage envelope, ${f}`,
    subtitle: `${streams.length} node phases, ${times.length} samples each`,
    yLabel: "V (p.u.)",
    series,
    bands,
    hLines,
    notes: [`band violations ${violations} (all feeders)`],
  });
}

/** Render one figure kind to an SVG string. */
export function renderFigure(
  kind: FigureKind,
  samples: Sample[],
  feeder?: string,
): string {
  switch (kind) {
    case "head_profile":
      return headProfile(samples, feeder);
    case "load_quartiles":
      return loadQuartiles(samples, feeder);
    case "q_tracking":
      return qTracking(samples);
    case "voltage_envelope":
      return voltageEnvelope(samples, feeder);
  }
}
