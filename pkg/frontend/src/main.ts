/**
 * CLI: render one SVG figure from svrapd run logs.
 *
 *   node dist/main.js --out figure.svg [--log-x] [--panel top|bottom|both] a.csv b.csv ...
 */

import { readFileSync, writeFileSync } from "node:fs";
import { parseRunLog } from "./csv.js";
import { DEFAULT_SPEC, FigureSpec, renderFigure } from "./figure.js";

export function run(argv: string[]): number {
  const inputs: string[] = [];
  let out = "figure.svg";
  const spec: FigureSpec = { ...DEFAULT_SPEC };
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (arg === "--out") {
      out = argv[++i];
    } else if (arg === "--log-x") {
      spec.logX = true;
    } else if (arg === "--panel") {
      const value = argv[++i];
      if (value !== "top" && value !== "bottom" && value !== "both") {
        console.error(`unknown panel selection: ${value}`);
        return 1;
      }
      spec.panels = value;
    } else if (arg.startsWith("--")) {
      console.error(`unknown flag: ${arg}`);
      return 1;
    } else {
      inputs.push(arg);
    }
  }
  if (inputs.length === 0) {
    console.error("usage: render --out figure.svg run1.csv [run2.csv ...]");
    return 1;
  }
  try {
    const logs = inputs.map((path) => parseRunLog(readFileSync(path, "utf-8"), path));
    writeFileSync(out, renderFigure(logs, spec));
  } catch (err) {
    console.error(String(err instanceof Error ? err.message : err));
    return 1;
  }
  console.log(`wrote ${out}`);
  return 0;
}

if (process.argv[1] && process.argv[1].endsWith("main.js")) {
  process.exit(run(process.argv.slice(2)));
}
