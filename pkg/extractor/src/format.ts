/**
 * Feature stream container writer/reader (little-endian, magic "SOBA" v1).
 *
 * Layout: 24-byte header (magic, u32 version, u32 d, u32 N, u64 count),
 * N*d float32 text rows, u32-length-prefixed UTF-8 JSON manifest, then
 * count records of (u32 label, d float32 features). 0xFFFFFFFF = unknown.
 */

export const MAGIC = "SOBA";
export const VERSION = 1;
export const UNKNOWN_LABEL = 0xffffffff;

export interface StreamPayload {
  dim: number;
  classNames: string[];
  textRows: Float64Array[];
  features: Float64Array[];
  labels: number[]; // -1 for unknown
  provenance: Record<string, unknown>;
}

export class FormatError extends Error {}

export function encodeStream(payload: StreamPayload): Buffer {
  const { dim, classNames, textRows, features, labels, provenance } = payload;
  const n = classNames.length;
  if (textRows.length !== n) throw new FormatError("text rows / class names mismatch");
  if (features.length !== labels.length) throw new FormatError("features / labels mismatch");
  for (const row of textRows) {
    if (row.length !== dim) throw new FormatError("text row dimension mismatch");
  }
  const manifest = Buffer.from(
    JSON.stringify({ class_names: classNames, provenance }),
    "utf8",
  );
  const count = features.length;
  const total = 24 + n * dim * 4 + 4 + manifest.length + count * (4 + dim * 4);
  const buf = Buffer.alloc(total);
  let off = 0;
  buf.write(MAGIC, off, "ascii"); off += 4;
  off = buf.writeUInt32LE(VERSION, off);
  off = buf.writeUInt32LE(dim, off);
  off = buf.writeUInt32LE(n, off);
  off = Number(writeU64(buf, BigInt(count), off));
  for (const row of textRows) {
    for (const x of row) off = buf.writeFloatLE(Math.fround(x), off);
  }
  off = buf.writeUInt32LE(manifest.length, off);
  manifest.copy(buf, off); off += manifest.length;
  for (let i = 0; i < count; i++) {
    const label = labels[i];
    off = buf.writeUInt32LE(label < 0 ? UNKNOWN_LABEL : label >>> 0, off);
    const row = features[i];
    if (row.length !== dim) throw new FormatError(`feature ${i} dimension mismatch`);
    for (const x of row) off = buf.writeFloatLE(Math.fround(x), off);
  }
  return buf;
}

function writeU64(buf: Buffer, value: bigint, off: number): number {
  buf.writeBigUInt64LE(value, off);
  return off + 8;
}

export interface DecodedStream {
  dim: number;
  classNames: string[];
  textRows: Float32Array[];
  features: Float32Array[];
  labels: number[];
  manifest: Record<string, unknown>;
}

/** Strict validation mirror of the engine-side reader, used in tests. */
export function decodeStream(buf: Buffer): DecodedStream {
  if (buf.length < 24) throw new FormatError("file shorter than header");
  if (buf.toString("ascii", 0, 4) !== MAGIC) throw new FormatError("bad magic");
  const version = buf.readUInt32LE(4);
  if (version !== VERSION) throw new FormatError(`unsupported version ${version}`);
  const dim = buf.readUInt32LE(8);
  const n = buf.readUInt32LE(12);
  const count = Number(buf.readBigUInt64LE(16));
  let off = 24;
  const textBytes = n * dim * 4;
  if (buf.length < off + textBytes + 4) throw new FormatError("text block exceeds file");
  const textRows: Float32Array[] = [];
  for (let k = 0; k < n; k++) {
    const row = new Float32Array(dim);
    for (let i = 0; i < dim; i++) row[i] = buf.readFloatLE(off + (k * dim + i) * 4);
    textRows.push(row);
  }
  off += textBytes;
  const mlen = buf.readUInt32LE(off); off += 4;
  if (buf.length < off + mlen) throw new FormatError("manifest exceeds file");
  const manifest = JSON.parse(buf.toString("utf8", off, off + mlen));
  off += mlen;
  if (buf.length !== off + count * (4 + dim * 4)) {
    throw new FormatError(`corrupt at byte offset ${off}`);
  }
  const features: Float32Array[] = [];
  const labels: number[] = [];
  for (let i = 0; i < count; i++) {
    const label = buf.readUInt32LE(off); off += 4;
    labels.push(label === UNKNOWN_LABEL ? -1 : label);
    const row = new Float32Array(dim);
    for (let j = 0; j < dim; j++) row[j] = buf.readFloatLE(off + j * 4);
    features.push(row);
    off += dim * 4;
  }
  return { dim, classNames: manifest.class_names, textRows, features, labels, manifest };
}
