/**
 * Minimal image decoding for the offline backbone: binary PPM/PGM (P5/P6)
 * and uncompressed 24/32-bit BMP. Anything else should go through the
 * transformers backbone, which ships its own loaders.
 */

export interface GrayImage {
  width: number;
  height: number;
  pixels: Float64Array; // row-major, [0, 1]
}

export class ImageDecodeError extends Error {}

function parsePnmHeader(buf: Buffer): { magic: string; fields: number[]; offset: number } {
  let pos = 2;
  const fields: number[] = [];
  const magic = buf.toString("ascii", 0, 2);
  while (fields.length < 3) {
    if (pos >= buf.length) throw new ImageDecodeError("truncated PNM header");
    const c = buf[pos];
    if (c === 0x23) {
      // comment: skip to end of line
      while (pos < buf.length && buf[pos] !== 0x0a) pos++;
      pos++;
    } else if (c === 0x20 || c === 0x09 || c === 0x0a || c === 0x0d) {
      pos++;
    } else {
      let start = pos;
      while (pos < buf.length && buf[pos] >= 0x30 && buf[pos] <= 0x39) pos++;
      if (pos === start) throw new ImageDecodeError("bad PNM header token");
      fields.push(parseInt(buf.toString("ascii", start, pos), 10));
    }
  }
  return { magic, fields, offset: pos + 1 }; // single whitespace after maxval
}

export function decodePnm(buf: Buffer): GrayImage {
  const { magic, fields, offset } = parsePnmHeader(buf);
  const [width, height, maxval] = fields;
  if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 255) {
    throw new ImageDecodeError(`unsupported PNM geometry ${width}x${height}/${maxval}`);
  }
  const channels = magic === "P6" ? 3 : 1;
  const needed = width * height * channels;
  if (buf.length < offset + needed) throw new ImageDecodeError("truncated PNM payload");
  const pixels = new Float64Array(width * height);
  for (let i = 0; i < width * height; i++) {
    const base = offset + i * channels;
    let gray: number;
    if (channels === 3) {
      gray = 0.299 * buf[base] + 0.587 * buf[base + 1] + 0.114 * buf[base + 2];
    } else {
      gray = buf[base];
    }
    pixels[i] = gray / maxval;
  }
  return { width, height, pixels };
}

export function decodeBmp(buf: Buffer): GrayImage {
  if (buf.length < 54) throw new ImageDecodeError("truncated BMP header");
  const dataOffset = buf.readUInt32LE(10);
  const width = buf.readInt32LE(18);
  const rawHeight = buf.readInt32LE(22);
  const bpp = buf.readUInt16LE(28);
  const compression = buf.readUInt32LE(30);
  if (compression !== 0 || (bpp !== 24 && bpp !== 32)) {
    throw new ImageDecodeError(`unsupported BMP variant (bpp=${bpp}, compression=${compression})`);
  }
  const height = Math.abs(rawHeight);
  const bottomUp = rawHeight > 0;
  const bytesPerPixel = bpp / 8;
  const rowSize = Math.ceil((width * bytesPerPixel) / 4) * 4;
  if (buf.length < dataOffset + rowSize * height) throw new ImageDecodeError("truncated BMP payload");
  const pixels = new Float64Array(width * height);
  for (let y = 0; y < height; y++) {
    const srcRow = bottomUp ? height - 1 - y : y;
    for (let x = 0; x < width; x++) {
      const base = dataOffset + srcRow * rowSize + x * bytesPerPixel;
      const b = buf[base], g = buf[base + 1], r = buf[base + 2];
      pixels[y * width + x] = (0.299 * r + 0.587 * g + 0.114 * b) / 255;
    }
  }
  return { width, height, pixels };
}

export function decodeImage(buf: Buffer, name: string): GrayImage {
  if (buf.length >= 2) {
    const magic = buf.toString("ascii", 0, 2);
    if (magic === "P6" || magic === "P5") return decodePnm(buf);
    if (magic === "BM") return decodeBmp(buf);
  }
  throw new ImageDecodeError(`unrecognized image format: ${name}`);
}

/** Box-average resize to size x size, producing a thumbnail vector. */
export function thumbnail(image: GrayImage, size: number): Float64Array {
  const out = new Float64Array(size * size);
  for (let ty = 0; ty < size; ty++) {
    const y0 = Math.floor((ty * image.height) / size);
    const y1 = Math.max(y0 + 1, Math.floor(((ty + 1) * image.height) / size));
    for (let tx = 0; tx < size; tx++) {
      const x0 = Math.floor((tx * image.width) / size);
      const x1 = Math.max(x0 + 1, Math.floor(((tx + 1) * image.width) / size));
      let sum = 0;
      for (let y = y0; y < y1; y++) {
        for (let x = x0; x < x1; x++) sum += image.pixels[y * image.width + x];
      }
      out[ty * size + tx] = sum / ((y1 - y0) * (x1 - x0));
    }
  }
  return out;
}
