import { mkdirSync, writeFileSync } from "fs";
import { join } from "path";
import { FIGURES } from "./figures";

function parseArgs(argv: string[]): { inDir: string; outDir: string; fig: string } {
  const opts: Record<string, string> = {};
  for (let i = 0; i < argv.length; i += 2) {
    const flag = argv[i];
    const value = argv[i + 1];
    if (!flag.startsWith("--") || value === undefined) {
      throw new Error(`usage: --in <dir> --out <dir> --fig <tag>`);
    }
    opts[flag.slice(2)] = value;
  }
  for (const key of ["in", "out", "fig"]) {
    if (!(key in opts)) throw new Error(`missing required flag --${key}`);
  }
  return { inDir: opts.in, outDir: opts.out, fig: opts.fig };
}

export function main(argv: string[]): number {
  let args;
  try {
    args = parseArgs(argv);
  } catch (err) {
    console.error(String(err instanceof Error ? err.message : err));
    return 2;
  }
  const entry = FIGURES.get(args.fig);
  if (!entry) {
    console.error(
      `unknown figure tag '${args.fig}'; known: ${[...FIGURES.keys()].join(", ")}`
    );
    return 2;
  }
  try {
    const { svg, warnings } = entry.render(args.inDir);
    for (const w of warnings) console.error(`warning: ${w}`);
    mkdirSync(args.outDir, { recursive: true });
    const path = join(args.outDir, `${args.fig}.svg`);
    writeFileSync(path, svg);
    console.log(path);
    return 0;
  } catch (err) {
    console.error(String(err instanceof Error ? err.message : err));
    return 1;
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
