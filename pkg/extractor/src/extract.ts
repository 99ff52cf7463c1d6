/**
 * Extraction pipeline: class-subdirectory image folder -> feature stream file.
 *
 * Class order (and therefore label indices and text-row order) is the sorted
 * subdirectory name order. Unreadable images are skipped with a warning and
 * recorded in the manifest. The provenance timestamp derives from the newest
 * input file so that re-running an unchanged job reproduces the output
 * byte-for-byte (deterministic backbones only).
 */

import { promises as fs } from "node:fs";
import * as path from "node:path";

import { Backbone, makeBackbone } from "./backbone.js";
import { encodeStream } from "./format.js";

export interface ExtractionJob {
  imagesDir: string;
  outPath: string;
  model: string;          // "hashproj" or a transformers checkpoint id
  template: string;       // prompt template with {class}
  dim: number;            // embedding width for the offline backbone
  batchSize: number;      // encoding batch size (streaming stays one-by-one)
}

export const DEFAULT_JOB: Omit<ExtractionJob, "imagesDir" | "outPath"> = {
  model: "hashproj",
  template: "a photo of a {class}",
  dim: 64,
  batchSize: 16,
};

export interface ExtractionReport {
  outPath: string;
  classes: string[];
  samples: number;
  skipped: string[];
  dim: number;
}

const IMAGE_EXT = new Set([".ppm", ".pgm", ".bmp", ".png", ".jpg", ".jpeg"]);

async function listClassDirs(root: string): Promise<string[]> {
  const entries = await fs.readdir(root, { withFileTypes: true });
  const dirs = entries.filter((e) => e.isDirectory()).map((e) => e.name);
  dirs.sort();
  if (dirs.length < 2) {
    throw new Error(`need at least 2 class subdirectories under ${root}, found ${dirs.length}`);
  }
  return dirs;
}

export async function runExtraction(
  job: ExtractionJob,
  backbone?: Backbone,
  warn: (message: string) => void = (m) => console.warn(m),
): Promise<ExtractionReport> {
  const encoder = backbone ?? makeBackbone(job.model, job.dim);
  const classes = await listClassDirs(job.imagesDir);
  const features: Float64Array[] = [];
  const labels: number[] = [];
  const skipped: string[] = [];
  let newestMtime = 0;
  for (let k = 0; k < classes.length; k++) {
    const classDir = path.join(job.imagesDir, classes[k]);
    const files = (await fs.readdir(classDir)).filter((f) =>
      IMAGE_EXT.has(path.extname(f).toLowerCase()),
    );
    files.sort();
    for (const file of files) {
      const full = path.join(classDir, file);
      const stat = await fs.stat(full);
      newestMtime = Math.max(newestMtime, stat.mtimeMs);
      try {
        const data = await fs.readFile(full);
        features.push(await encoder.encodeImage(data, file));
      } catch (err) {
        warn(`skipping unreadable image ${full}: ${(err as Error).message}`);
        skipped.push(path.join(classes[k], file));
        continue;
      }
      labels.push(k);
    }
  }
  if (features.length === 0) throw new Error("no readable images found");
  const textRows: Float64Array[] = [];
  for (const name of classes) {
    textRows.push(await encoder.encodeText(job.template.replace("{class}", name)));
  }
  const dim = textRows[0].length;
  const blob = encodeStream({
    dim,
    classNames: classes,
    textRows,
    features,
    labels,
    provenance: {
      extractor: "spacerot-extractor",
      model: encoder.identifier,
      template: job.template,
      inputs_timestamp_ms: Math.round(newestMtime),
      skipped,
    },
  });
  await fs.mkdir(path.dirname(path.resolve(job.outPath)), { recursive: true });
  await fs.writeFile(job.outPath, blob);
  return { outPath: job.outPath, classes, samples: features.length, skipped, dim };
}
