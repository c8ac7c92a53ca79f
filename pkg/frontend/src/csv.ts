/**
 * Parser for svrapd run logs: `# key = value` metadata lines, a fixed
 * column header, one row per logged epoch, and an optional truncation
 * marker at the end.
 */

export const COLUMNS = [
  "method",
  "schedule",
  "seed",
  "epoch",
  "oracle_units",
  "wall_ms",
  "gap_last",
  "gap_ergodic",
] as const;

export interface RunRow {
  method: string;
  schedule: string;
  seed: number;
  epoch: number;
  oracleUnits: number;
  wallMs: number;
  gapLast: number | null;
  gapErgodic: number | null;
}

export interface RunLog {
  meta: Record<string, string>;
  rows: RunRow[];
  truncated: boolean;
  source: string;
}

const TRUNCATION_MARKER = "# truncated = true";

export class CsvError extends Error {}

export function parseRunLog(text: string, source: string): RunLog {
  const meta: Record<string, string> = {};
  const rows: RunRow[] = [];
  let truncated = false;
  let sawHeader = false;
  for (const line of text.split(/\r?\n/)) {
    if (line.length === 0) continue;
    if (line === TRUNCATION_MARKER) {
      truncated = true;
      continue;
    }
    if (line.startsWith("#")) {
      const body = line.slice(1);
      const at = body.indexOf(" = ");
      if (at >= 0) meta[body.slice(0, at).trim()] = body.slice(at + 3).trim();
      continue;
    }
    const cells = line.split(",");
    if (!sawHeader) {
      for (const column of COLUMNS) {
        if (!cells.includes(column)) {
          throw new CsvError(`${source}: missing column ${column}`);
        }
      }
      if (cells.length !== COLUMNS.length) {
        throw new CsvError(`${source}: unexpected column header ${line}`);
      }
      sawHeader = true;
      continue;
    }
    if (cells.length !== COLUMNS.length) {
      throw new CsvError(`${source}: bad row width: ${line}`);
    }
    rows.push({
      method: cells[0],
      schedule: cells[1],
      seed: Number(cells[2]),
      epoch: Number(cells[3]),
      oracleUnits: Number(cells[4]),
      wallMs: Number(cells[5]),
      gapLast: cells[6] === "" ? null : Number(cells[6]),
      gapErgodic: cells[7] === "" ? null : Number(cells[7]),
    });
  }
  if (!sawHeader) {
    throw new CsvError(`${source}: no column header found`);
  }
  return { meta, rows, truncated, source };
}
