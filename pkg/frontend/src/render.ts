/** CLI: render one figure from an experiment CSV.
 *
 *   node --experimental-strip-types src/render.ts \
 *       --in samples/sweep_m.csv --fig fig4 --out out/fig4.svg
 */

import { readFileSync, writeFileSync } from "node:fs";
import process from "node:process";

import { parseCsv, SchemaError } from "./csv.ts";
import { renderFigure } from "./figures.ts";

function parseArgs(argv: string[]): Map<string, string> {
  const out = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    if (!key.startsWith("--") || i + 1 >= argv.length) {
      throw new Error(`bad argument '${key}'; usage: --in CSV --fig figN --out SVG`);
    }
    out.set(key.slice(2), argv[i + 1]);
  }
  return out;
}

export function main(argv: string[]): number {
  let args: Map<string, string>;
  try {
    args = parseArgs(argv);
    for (const k of ["in", "fig", "out"]) {
      if (!args.has(k)) throw new Error(`missing --${k}`);
    }
  } catch (err) {
    console.error(String(err));
    return 1;
  }
  try {
    const table = parseCsv(readFileSync(args.get("in")!, "utf-8"));
    const { svg, seriesCount } = renderFigure(args.get("fig")!, table);
    writeFileSync(args.get("out")!, svg, "utf-8");
    console.log(`${args.get("fig")}: ${seriesCount} series -> ${args.get("out")}`);
    return 0;
  } catch (err) {
    if (err instanceof SchemaError) {
      console.error(`schema error: ${err.message}`);
      return 1;
    }
    console.error(String(err));
    return 2;
  }
}

if (process.argv[1] && /render\.(ts|js)$/.test(process.argv[1])) {
  process.exit(main(process.argv.slice(2)));
}
