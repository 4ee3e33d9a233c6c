/**
 * Reader for gridfed telemetry logs.
 *
 * The log is a four-column CSV: `time_s,stream,value,unit`.  Stream names
 * are dotted paths (`v.f1.F1L4.a`, `vvc.q_error`, `head_p.f2`); the second
 * segment names the feeder where one applies.
 */

export interface Sample {
  time: number;
  stream: string;
  value: number;
  unit: string;
}

const HEADER = "time_s,stream,value,unit";

export class TelemetryError extends Error {}

export function parseTelemetry(text: string): Sample[] {
  const lines = text.split("\n");
  if ((lines[0] ?? "").trim() !== HEADER) {
    throw new TelemetryError(
      `not a telemetry log: expected header "${HEADER}"`,
    );
  }
  const samples: Sample[] = [];
  for (let i = 1; i < lines.length; i++) {
    const line = lines[i].trim();
    if (line === "") continue;
    const parts = line.split(",");
    if (parts.length !== 4) {
      throw new TelemetryError(`line ${i + 1}: expected 4 fields, got ${parts.length}`);
    }
    // Number("") is 0, so blank fields need their own rejection
    const time = parts[0] === "" ? NaN : Number(parts[0]);
    const value = parts[2] === "" ? NaN : Number(parts[2]);
    if (!Number.isFinite(time) || !Number.isFinite(value)) {
      throw new TelemetryError(`line ${i + 1}: non-numeric time or value`);
    }
    samples.push({ time, stream: parts[1], value, unit: parts[3] });
  }
  return samples;
}

/** Samples for one exact stream name, in file order (time-ascending). */
export function seriesOf(
  samples: Sample[],
  stream: string,
): { times: number[]; values: number[] } {
  const times: number[] = [];
  const values: number[] = [];
  for (const s of samples) {
    if (s.stream === stream) {
      times.push(s.time);
      values.push(s.value);
    }
  }
  return { times, values };
}

/** Sorted distinct stream names under `family.` (e.g. family "vvc"). */
export function streamsIn(samples: Sample[], family: string): string[] {
  const prefix = family + ".";
  const names = new Set<string>();
  for (const s of samples) {
    if (s.stream.startsWith(prefix)) names.add(s.stream);
  }
  return [...names].sort();
}

/** Sorted distinct feeder ids appearing as `family.<id>` or `family.<id>.rest`. */
export function feedersIn(samples: Sample[], family: string): string[] {
  const prefix = family + ".";
  const ids = new Set<string>();
  for (const s of samples) {
    if (!s.stream.startsWith(prefix)) continue;
    const rest = s.stream.slice(prefix.length);
    const dot = rest.indexOf(".");
    ids.add(dot < 0 ? rest : rest.slice(0, dot));
  }
  return [...ids].sort();
}

/**
 * Group the named streams onto a shared time axis.  Returns the sorted
 * distinct sample times and, per time, the values of every listed stream
 * that has a sample there (streams in list order).
 */
export function groupByTime(
  samples: Sample[],
  streams: string[],
): { times: number[]; groups: number[][] } {
  const wanted = new Map<string, number>();
  streams.forEach((name, i) => wanted.set(name, i));
  const byTime = new Map<number, { order: number; value: number }[]>();
  for (const s of samples) {
    const order = wanted.get(s.stream);
    if (order === undefined) continue;
    let bucket = byTime.get(s.time);
    if (!bucket) {
      bucket = [];
      byTime.set(s.time, bucket);
    }
    bucket.push({ order, value: s.value });
  }
  const times = [...byTime.keys()].sort((a, b) => a - b);
  const groups = times.map((t) =>
    byTime
      .get(t)!
      .sort((a, b) => a.order - b.order)
      .map((e) => e.value),
  );
  return { times, groups };
}
