/**
 * Encoders producing unit-norm embeddings for images and class prompts.
 *
 * The default "hashproj" backbone is fully offline and deterministic: images
 * are reduced to a standardized 16x16 thumbnail and pushed through a fixed
 * pseudo-random projection; prompts are hashed into a seeded Gaussian
 * direction. It exists so the extraction pipeline and file format can be
 * exercised without model weights. Real vision-language checkpoints plug in
 * through the transformers backbone (requires @xenova/transformers and a
 * downloaded model).
 */

import { createHash } from "node:crypto";

import { CounterRng, deriveSeed } from "./rng.js";
import { decodeImage, thumbnail } from "./images.js";

export interface Backbone {
  readonly identifier: string;
  readonly dim: number;
  encodeImage(data: Buffer, name: string): Promise<Float64Array>;
  encodeText(prompt: string): Promise<Float64Array>;
}

const THUMB = 16;
const PROJECTION_TAG = 0x50524f4an; // "PROJ"
const TEXT_TAG = 0x54455854n; // "TEXT"

function normalize(v: Float64Array): Float64Array {
  let norm = 0;
  for (const x of v) norm += x * x;
  norm = Math.sqrt(norm);
  if (norm === 0) throw new Error("zero-norm embedding");
  for (let i = 0; i < v.length; i++) v[i] /= norm;
  return v;
}

function seedFromString(text: string, tag: bigint): bigint {
  const digest = createHash("sha256").update(text, "utf8").digest();
  return deriveSeed(digest.readBigUInt64LE(0), tag);
}

export class HashProjectionBackbone implements Backbone {
  readonly identifier: string;
  readonly dim: number;
  private projection: Float64Array; // dim x THUMB^2, row-major

  constructor(dim = 64, seed = 1234n) {
    this.dim = dim;
    this.identifier = `hashproj-v1-d${dim}`;
    const rng = new CounterRng(deriveSeed(seed, PROJECTION_TAG));
    this.projection = rng.normals(dim * THUMB * THUMB);
  }

  async encodeImage(data: Buffer, name: string): Promise<Float64Array> {
    const image = decodeImage(data, name);
    const thumb = thumbnail(image, THUMB);
    // standardize so brightness/contrast do not dominate
    let mean = 0;
    for (const x of thumb) mean += x;
    mean /= thumb.length;
    let variance = 0;
    for (const x of thumb) variance += (x - mean) * (x - mean);
    const std = Math.sqrt(variance / thumb.length) || 1;
    const out = new Float64Array(this.dim);
    for (let j = 0; j < this.dim; j++) {
      let acc = 0;
      const row = j * thumb.length;
      for (let i = 0; i < thumb.length; i++) {
        acc += this.projection[row + i] * ((thumb[i] - mean) / std);
      }
      out[j] = acc;
    }
    return normalize(out);
  }

  async encodeText(prompt: string): Promise<Float64Array> {
    const rng = new CounterRng(seedFromString(prompt, TEXT_TAG));
    return normalize(rng.normals(this.dim));
  }
}

/** Wrapper over @xenova/transformers CLIP-style checkpoints (optional dep). */
export class TransformersBackbone implements Backbone {
  readonly identifier: string;
  dim = 0;
  private model: any = null;
  private processor: any = null;
  private tokenizer: any = null;

  constructor(modelId: string) {
    this.identifier = modelId;
  }

  private lib: any = null;

  private async load() {
    if (this.model) return;
    // optional dependency: resolved at runtime only
    const specifier = "@xenova/transformers";
    try {
      this.lib = await import(specifier);
    } catch {
      throw new Error(
        "transformers backbone needs the optional @xenova/transformers package " +
        "and a locally cached checkpoint",
      );
    }
    this.tokenizer = await this.lib.AutoTokenizer.from_pretrained(this.identifier);
    this.processor = await this.lib.AutoProcessor.from_pretrained(this.identifier);
    this.model = await this.lib.CLIPModel.from_pretrained(this.identifier);
  }

  async encodeImage(data: Buffer, name: string): Promise<Float64Array> {
    await this.load();
    const bytes = new Uint8Array(data.byteLength);
    bytes.set(data);
    const image = await this.lib.RawImage.fromBlob(new Blob([bytes]));
    const inputs = await this.processor(image);
    const { image_embeds } = await this.model(inputs);
    const vec = Float64Array.from(image_embeds.data as Iterable<number>);
    this.dim = vec.length;
    return normalize(vec);
  }

  async encodeText(prompt: string): Promise<Float64Array> {
    await this.load();
    const tokens = this.tokenizer([prompt], { padding: true, truncation: true });
    const { text_embeds } = await this.model(tokens);
    const vec = Float64Array.from(text_embeds.data as Iterable<number>);
    this.dim = vec.length;
    return normalize(vec);
  }
}

export function makeBackbone(model: string, dim: number): Backbone {
  if (model === "hashproj" || model.startsWith("hashproj-")) {
    return new HashProjectionBackbone(dim);
  }
  return new TransformersBackbone(model);
}
