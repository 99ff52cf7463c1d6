#!/usr/bin/env node
/**
 * spacerot-extract --images DIR --out FILE [--model hashproj] [--dim 64]
 *                  [--template "a photo of a {class}"] [--batch-size 16]
 */

import { runExtraction, DEFAULT_JOB, ExtractionJob } from "./extract.js";

function parseArgs(argv: string[]): ExtractionJob {
  const opts: Record<string, string> = {};
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (!arg.startsWith("--")) throw new Error(`unexpected argument ${arg}`);
    const key = arg.slice(2);
    const value = argv[++i];
    if (value === undefined) throw new Error(`missing value for --${key}`);
    opts[key] = value;
  }
  const imagesDir = opts["images"];
  const outPath = opts["out"];
  if (!imagesDir || !outPath) throw new Error("--images and --out are required");
  return {
    imagesDir,
    outPath,
    model: opts["model"] ?? DEFAULT_JOB.model,
    template: opts["template"] ?? DEFAULT_JOB.template,
    dim: opts["dim"] ? parseInt(opts["dim"], 10) : DEFAULT_JOB.dim,
    batchSize: opts["batch-size"] ? parseInt(opts["batch-size"], 10) : DEFAULT_JOB.batchSize,
  };
}

async function main() {
  let job: ExtractionJob;
  try {
    job = parseArgs(process.argv.slice(2));
  } catch (err) {
    console.error(`usage error: ${(err as Error).message}`);
    console.error(
      "usage: spacerot-extract --images DIR --out FILE [--model ID] [--dim N] " +
      "[--template STR] [--batch-size N]",
    );
    process.exit(2);
  }
  try {
    const report = await runExtraction(job);
    console.log(
      `wrote ${report.outPath}: ${report.samples} samples, ` +
      `${report.classes.length} classes, d=${report.dim}` +
      (report.skipped.length ? `, skipped ${report.skipped.length}` : ""),
    );
  } catch (err) {
    console.error(`extraction failed: ${(err as Error).message}`);
    process.exit(1);
  }
}

main();
