/**
 * Render figures from a gridfed telemetry log.
 *
 * Usage:
 *   node dist/cli.js <kind> <telemetry.csv> <out.svg> [--feeder N]
 *
 * Kinds: head_profile, load_quartiles, q_tracking, voltage_envelope.
 * `--feeder` takes a feeder name (f2) or a 1-based index into the sorted
 * feeder list for the chosen kind; q_tracking has no feeder axis and
 * ignores it.  The input file is never modified and re-rendering writes
 * identical bytes.
 */

import { readFile, writeFile } from "node:fs/promises";
import { resolve } from "node:path";
import { fileURLToPath } from "node:url";

import { FIGURE_KINDS, renderFigure, type FigureKind } from "./figures.js";
import { parseTelemetry } from "./telemetry.js";

const USAGE =
  "usage: render <kind> <telemetry.csv> <out.svg> [--feeder N]\n" +
  `kinds: ${FIGURE_KINDS.join(", ")}`;

export class UsageError extends Error {}

export interface CliArgs {
  kind: FigureKind;
  csv: string;
  out: string;
  feeder?: string;
}

export function parseArgs(argv: string[]): CliArgs {
  const positional: string[] = [];
  let feeder: string | undefined;
  for (let i = 0; i < argv.length; i++) {
    const a = argv[i];
    if (a === "--feeder") {
      if (i + 1 >= argv.length) throw new UsageError("--feeder needs a value");
      feeder = argv[++i];
    } else if (a.startsWith("--feeder=")) {
      feeder = a.slice("--feeder=".length);
    } else if (a.startsWith("-")) {
      throw new UsageError(`unknown option ${a}\n${USAGE}`);
    } else {
      positional.push(a);
    }
  }
  if (positional.length !== 3) throw new UsageError(USAGE);
  const [kind, csv, out] = positional;
  if (!(FIGURE_KINDS as readonly string[]).includes(kind)) {
    throw new UsageError(`unknown kind "${kind}"\nkinds: ${FIGURE_KINDS.join(", ")}`);
  }
  return { kind: kind as FigureKind, csv, out, feeder };
}

async function main(): Promise<void> {
  const args = parseArgs(process.argv.slice(2));
  const text = await readFile(args.csv, "utf8");
  const samples = parseTelemetry(text);
  const svg = renderFigure(args.kind, samples, args.feeder);
  await writeFile(args.out, svg);
  console.log(`SVG → ${args.out}`);
}

// Run only as an entry script, not when imported
if (process.argv[1] && fileURLToPath(import.meta.url) === resolve(process.argv[1])) {
  main().catch((err: unknown) => {
    console.error(`render: ${err instanceof Error ? err.message : String(err)}`);
    process.exitCode = 1;
  });
}
