import { describe, expect, it } from "vitest";
import { existsSync, mkdtempSync, readFileSync, readdirSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { CsvError, parseRunLog } from "../src/csv.js";
import { renderFigure } from "../src/figure.js";
import { run } from "../src/main.js";

const METHODS = ["svr-apd-const", "svr-apd-poly", "smd", "smp", "apd-full"];

function syntheticLog(method: string, scale: number): string {
  const lines = [
    `# config.method = ${method}`,
    "# config_hash = feedc0de",
    "method,schedule,seed,epoch,oracle_units,wall_ms,gap_last,gap_ergodic",
  ];
  for (let k = 1; k <= 12; k++) {
    const gap = scale / (k * k);
    lines.push(
      `${method},constant,1,${k},${k * 1000},${k * 7.5},${gap * 1.3},${gap}`,
    );
  }
  return lines.join("\n") + "\n";
}

function fixtureLogs() {
  const dir = join(__dirname, "..", "testdata");
  if (!existsSync(dir)) return null;
  const files = readdirSync(dir).filter((f) => f.endsWith(".csv")).sort();
  if (files.length < 5) return null;
  return files.map((f) => parseRunLog(readFileSync(join(dir, f), "utf-8"), f));
}

describe("csv parsing", () => {
  it("reads metadata and rows", () => {
    const log = parseRunLog(syntheticLog("smd", 0.5), "mem");
    expect(log.meta["config.method"]).toBe("smd");
    expect(log.rows).toHaveLength(12);
    expect(log.rows[0].oracleUnits).toBe(1000);
    expect(log.truncated).toBe(false);
  });

  it("names the file and column on schema mismatch", () => {
    const bad = "method,schedule,seed,epoch,oracle_units,wall_ms,gap_last\nx,y,1,1,2,3,4\n";
    expect(() => parseRunLog(bad, "broken.csv")).toThrowError(CsvError);
    expect(() => parseRunLog(bad, "broken.csv")).toThrowError(/broken\.csv.*gap_ergodic/);
  });

  it("detects the truncation marker", () => {
    const text = syntheticLog("smp", 1.0) + "# truncated = true\n";
    expect(parseRunLog(text, "mem").truncated).toBe(true);
  });
});

describe("figure rendering", () => {
  it("renders two panels with five sorted legend entries", () => {
    const logs = METHODS.map((m, i) => parseRunLog(syntheticLog(m, 1 + i), m));
    const svg = renderFigure(logs);
    expect(svg.startsWith("<svg")).toBe(true);
    expect(svg.match(/<rect[^>]*stroke="#333"/g)).toHaveLength(2);
    for (const method of METHODS) {
      expect(svg).toContain(`>${method}</text>`);
    }
    const order = METHODS.map((m) => svg.indexOf(`>${m}</text>`));
    const sorted = [...METHODS].sort().map((m) => svg.indexOf(`>${m}</text>`));
    expect(order.slice().sort((a, b) => a - b)).toEqual(sorted.sort((a, b) => a - b));
  });

  it("is byte-identical across renders", () => {
    const logs = METHODS.map((m, i) => parseRunLog(syntheticLog(m, 1 + i), m));
    const first = renderFigure(logs);
    const second = renderFigure(logs);
    expect(second).toBe(first);
  });

  it("clamps nonpositive gaps and annotates the count", () => {
    const text = syntheticLog("smd", 1.0) + "smd,constant,1,13,13000,97.5,0,0\n";
    const log = parseRunLog(text, "mem");
    const svg = renderFigure([log]);
    expect(svg).toContain("clamped to the display floor");
  });

  it("renders the five benchmark CSVs when present", () => {
    const logs = fixtureLogs();
    if (!logs) return; // fixtures appear after the primary acceptance run
    const svg = renderFigure(logs);
    expect(svg.match(/<polyline/g)!.length).toBeGreaterThanOrEqual(10);
    expect(renderFigure(logs)).toBe(svg);
  });
});

describe("cli", () => {
  it("writes an svg file and re-renders byte-identically", () => {
    const dir = mkdtempSync(join(tmpdir(), "svrapd-plots-"));
    const inputs = METHODS.map((m, i) => {
      const path = join(dir, `${m}.csv`);
      writeFileSync(path, syntheticLog(m, 1 + i));
      return path;
    });
    const out = join(dir, "figure.svg");
    expect(run(["--out", out, ...inputs])).toBe(0);
    const first = readFileSync(out, "utf-8");
    expect(run(["--out", out, ...inputs])).toBe(0);
    expect(readFileSync(out, "utf-8")).toBe(first);
    expect(first).toContain("</svg>");
  });

  it("rejects unknown flags and empty input", () => {
    expect(run(["--bogus"])).toBe(1);
    expect(run(["--out", "x.svg"])).toBe(1);
  });
});
