import { spawnSync } from "node:child_process";
import { createHash } from "node:crypto";
import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import { parseArgs, UsageError } from "../dist/cli.js";
import {
  FIGURE_KINDS,
  MissingStreamError,
  renderFigure,
} from "../dist/figures.js";
import { parseTelemetry, TelemetryError } from "../dist/telemetry.js";

const FIXTURES = fileURLToPath(new URL("./fixtures", import.meta.url));
const CLI = fileURLToPath(new URL("../dist/cli.js", import.meta.url));
const CSV_PATH = join(FIXTURES, "sever_telemetry.csv");

const csvText = readFileSync(CSV_PATH, "utf8");
const summary = readFileSync(join(FIXTURES, "sever_summary.txt"), "utf8");
const samples = parseTelemetry(csvText);

const summaryMaxErr = /^max_abs_tracking_error_kvar (\S+)$/m.exec(summary)![1];
const summaryViolations = /^band_violation_count (\d+)$/m.exec(summary)![1];

function sha256(path: string): string {
  return createHash("sha256").update(readFileSync(path)).digest("hex");
}

describe("figures", () => {
  it("renders every kind from the sever telemetry", () => {
    for (const kind of FIGURE_KINDS) {
      const svg = renderFigure(kind, samples);
      expect(svg.startsWith("<svg ")).toBe(true);
      expect(svg.endsWith("</svg>\n")).toBe(true);
      expect(svg.length).toBeGreaterThan(2000);
    }
  });

  it("annotates q_tracking with the summary's max error, digit for digit", () => {
    const svg = renderFigure("q_tracking", samples);
    const m = /max \|error\| ([0-9.]+) kvar/.exec(svg);
    expect(m).not.toBeNull();
    expect(m![1]).toBe(summaryMaxErr);
  });

  it("annotates voltage_envelope with the summary's violation count", () => {
    const svg = renderFigure("voltage_envelope", samples);
    const m = /band violations ([0-9]+) /.exec(svg);
    expect(m).not.toBeNull();
    expect(m![1]).toBe(summaryViolations);
    expect(svg).toContain("1.05 p.u. limit");
  });

  it("counts violations over all feeders regardless of the one drawn", () => {
    for (const feeder of ["f1", "f2", "f3"]) {
      const svg = renderFigure("voltage_envelope", samples, feeder);
      expect(/band violations ([0-9]+) /.exec(svg)![1]).toBe(summaryViolations);
    }
  });

  it("accepts a feeder by name or by 1-based index", () => {
    const byName = renderFigure("voltage_envelope", samples, "f2");
    const byIndex = renderFigure("voltage_envelope", samples, "2");
    expect(byIndex).toBe(byName);
    expect(renderFigure("voltage_envelope", samples, "f1")).not.toBe(byName);
  });

  it("rejects an unknown feeder and lists the available ones", () => {
    expect(() => renderFigure("voltage_envelope", samples, "nope")).toThrow(
      /unknown feeder "nope".*f1, f2, f3/,
    );
  });

  it("names every missing stream instead of drawing a blank plot", () => {
    const thinned = samples.filter(
      (s) => s.stream !== "vvc.q_resp" && s.stream !== "vvc.q_error",
    );
    let caught: unknown;
    try {
      renderFigure("q_tracking", thinned);
    } catch (err) {
      caught = err;
    }
    expect(caught).toBeInstanceOf(MissingStreamError);
    const e = caught as MissingStreamError;
    expect(e.streams).toEqual(["vvc.q_resp", "vvc.q_error"]);
    expect(e.message).toContain("no samples for stream");
  });

  it("treats empty but valid telemetry as missing streams", () => {
    const empty = parseTelemetry("time_s,stream,value,unit\n");
    expect(empty).toEqual([]);
    for (const kind of FIGURE_KINDS) {
      expect(() => renderFigure(kind, empty)).toThrow(/no samples for stream/);
    }
  });

  it("is a pure function of its input", () => {
    const a = renderFigure("q_tracking", samples);
    const b = renderFigure("q_tracking", parseTelemetry(csvText));
    expect(b).toBe(a);
  });
});

describe("telemetry parsing", () => {
  it("rejects files without the telemetry header", () => {
    expect(() => parseTelemetry("a,b\n1,2\n")).toThrow(TelemetryError);
    expect(() => parseTelemetry("")).toThrow(/expected header/);
  });

  it("rejects rows with the wrong shape or non-numeric fields", () => {
    const head = "time_s,stream,value,unit\n";
    expect(() => parseTelemetry(head + "1.0,x.y\n")).toThrow(/line 2/);
    expect(() => parseTelemetry(head + "1.0,x.y,oops,kw\n")).toThrow(/line 2/);
    expect(() => parseTelemetry(head + "1.0,x.y,,kw\n")).toThrow(/non-numeric/);
  });

  it("reads the fixture in full", () => {
    const rows = csvText.trim().split("\n").length - 1;
    expect(samples.length).toBe(rows);
  });
});

describe("cli", () => {
  it("parses arguments and validates the kind", () => {
    const args = parseArgs(["q_tracking", "in.csv", "out.svg"]);
    expect(args).toEqual({
      kind: "q_tracking",
      csv: "in.csv",
      out: "out.svg",
      feeder: undefined,
    });
    expect(parseArgs(["voltage_envelope", "i", "o", "--feeder", "2"]).feeder).toBe("2");
    expect(parseArgs(["voltage_envelope", "i", "o", "--feeder=f2"]).feeder).toBe("f2");
    expect(() => parseArgs([])).toThrow(UsageError);
    expect(() => parseArgs(["pie_chart", "i", "o"])).toThrow(/unknown kind/);
    expect(() => parseArgs(["voltage_envelope", "i", "o", "--wat"])).toThrow(/unknown option/);
  });

  it("renders idempotently and leaves the input untouched", () => {
    const dir = mkdtempSync(join(tmpdir(), "figs-"));
    const before = sha256(CSV_PATH);
    const outA = join(dir, "a.svg");
    const outB = join(dir, "b.svg");
    for (const out of [outA, outB]) {
      const res = spawnSync(process.execPath, ["--", CLI, "voltage_envelope", CSV_PATH, out], {
        encoding: "utf8",
      });
      expect(res.status).toBe(0);
      expect(res.stdout).toContain(`SVG → ${out}`);
    }
    expect(sha256(outB)).toBe(sha256(outA));
    expect(sha256(CSV_PATH)).toBe(before);
  });

  it("exits 1 with the stream name when telemetry lacks it", () => {
    const dir = mkdtempSync(join(tmpdir(), "figs-"));
    const bare = join(dir, "bare.csv");
    writeFileSync(bare, "time_s,stream,value,unit\n");
    const res = spawnSync(
      process.execPath,
      ["--", CLI, "q_tracking", bare, join(dir, "out.svg")],
      { encoding: "utf8" },
    );
    expect(res.status).toBe(1);
    expect(res.stderr).toContain("no samples for stream vvc.q_baseline");
  });

  it("exits 1 on usage errors", () => {
    const res = spawnSync(process.execPath, ["--", CLI], { encoding: "utf8" });
    expect(res.status).toBe(1);
    expect(res.stderr).toContain("usage: render");
  });
});
