/** Binary PNM (P5/P6) codecs matching the prompt engine's conventions:
 * frames are 8-bit P6 PPM, binary masks 8-bit P5 PGM valued {0, 255},
 * fuzzy masks 16-bit big-endian P5 PGM scaled to [0, 1]. */
import { readFileSync, writeFileSync } from "node:fs";

export interface GrayImage {
  width: number;
  height: number;
  /** Row-major, [0, 1]. */
  data: Float32Array;
}

interface PnmHeader {
  magic: string;
  width: number;
  height: number;
  maxval: number;
  offset: number;
}

function parseHeader(buf: Buffer): PnmHeader {
  const magic = buf.toString("ascii", 0, 2);
  if (magic !== "P5" && magic !== "P6") {
    throw new Error(`unsupported PNM magic ${JSON.stringify(magic)}`);
  }
  // Tokenize header: magic, width, height, maxval, skipping comments.
  const fields: number[] = [];
  let i = 2;
  while (fields.length < 3) {
    while (i < buf.length && /\s/.test(String.fromCharCode(buf[i]))) i++;
    if (buf[i] === 0x23) {
      // '#' comment runs to end of line
      while (i < buf.length && buf[i] !== 0x0a) i++;
      continue;
    }
    let start = i;
    while (i < buf.length && !/\s/.test(String.fromCharCode(buf[i]))) i++;
    fields.push(parseInt(buf.toString("ascii", start, i), 10));
  }
  i++; // single whitespace after maxval
  const [width, height, maxval] = fields;
  if (!(width > 0 && height > 0 && maxval > 0 && maxval < 65536)) {
    throw new Error(`bad PNM header ${width}x${height} maxval ${maxval}`);
  }
  return { magic, width, height, maxval, offset: i };
}

/** 8-bit P6 frame, averaged to a single gray channel in [0, 1]. */
export function readPpmGray(path: string): GrayImage {
  const buf = readFileSync(path);
  const { magic, width, height, maxval, offset } = parseHeader(buf);
  if (magic !== "P6" || maxval !== 255) {
    throw new Error(`${path}: expected an 8-bit P6 PPM`);
  }
  const data = new Float32Array(width * height);
  for (let p = 0; p < width * height; p++) {
    const o = offset + 3 * p;
    data[p] = (buf[o] + buf[o + 1] + buf[o + 2]) / (3 * 255);
  }
  return { width, height, data };
}

export function ppmDims(path: string): { width: number; height: number } {
  const { width, height } = parseHeader(readFileSync(path));
  return { width, height };
}

/** P5 PGM of any depth, scaled to [0, 1]; 16-bit samples are big-endian. */
export function readPgm(path: string): GrayImage {
  const buf = readFileSync(path);
  const { magic, width, height, maxval, offset } = parseHeader(buf);
  if (magic !== "P5") throw new Error(`${path}: expected a P5 PGM`);
  const data = new Float32Array(width * height);
  if (maxval < 256) {
    for (let p = 0; p < width * height; p++) data[p] = buf[offset + p] / maxval;
  } else {
    for (let p = 0; p < width * height; p++) {
      data[p] = buf.readUInt16BE(offset + 2 * p) / maxval;
    }
  }
  return { width, height, data };
}

/** 8-bit P6 color frame from interleaved RGB bytes. */
export function writePpm(
  path: string,
  width: number,
  height: number,
  rgb: Uint8Array,
): void {
  if (rgb.length !== 3 * width * height) {
    throw new Error(`rgb buffer size ${rgb.length} != 3*${width}*${height}`);
  }
  const header = Buffer.from(`P6\n${width} ${height}\n255\n`, "ascii");
  writeFileSync(path, Buffer.concat([header, Buffer.from(rgb)]));
}

/** 16-bit big-endian P5 PGM from [0, 1] values (fuzzy mask convention). */
export function writeFuzzyPgm(
  path: string,
  width: number,
  height: number,
  values: Float32Array,
): void {
  if (values.length !== width * height) {
    throw new Error(`value buffer size ${values.length} != ${width}x${height}`);
  }
  const header = Buffer.from(`P5\n${width} ${height}\n65535\n`, "ascii");
  const body = Buffer.alloc(2 * values.length);
  for (let p = 0; p < values.length; p++) {
    const v = Math.min(1, Math.max(0, values[p]));
    body.writeUInt16BE(Math.round(v * 65535), 2 * p);
  }
  writeFileSync(path, Buffer.concat([header, body]));
}

/** Binary mask: a P5 PGM whose samples are strictly 0 or 255. */
export function writeBinaryPgm(
  path: string,
  width: number,
  height: number,
  bits: Uint8Array,
): void {
  if (bits.length !== width * height) {
    throw new Error(`mask size ${bits.length} != ${width}x${height}`);
  }
  const header = Buffer.from(`P5\n${width} ${height}\n255\n`, "ascii");
  const body = Buffer.alloc(bits.length);
  for (let p = 0; p < bits.length; p++) body[p] = bits[p] ? 255 : 0;
  writeFileSync(path, Buffer.concat([header, body]));
}

/** Threshold a PGM at half its maxval, as the prompt engine does. */
export function readBinaryMask(path: string): {
  width: number;
  height: number;
  bits: Uint8Array;
} {
  const { width, height, data } = readPgm(path);
  const bits = new Uint8Array(width * height);
  for (let p = 0; p < data.length; p++) bits[p] = data[p] >= 0.5 ? 1 : 0;
  return { width, height, bits };
}
