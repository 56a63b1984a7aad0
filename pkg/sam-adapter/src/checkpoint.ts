/** Checkpoint format: a single JSON file mapping parameter names to shapes
 * and base64-encoded float32 buffers. Self-contained and diffable, which
 * the frozen-encoder audit relies on. */
import { readFileSync, writeFileSync } from "node:fs";

export interface CheckpointTensor {
  shape: number[];
  /** base64 of little-endian float32 values */
  data: string;
}

export interface Checkpoint {
  version: 1;
  variant: string;
  seed: number;
  weights: Record<string, CheckpointTensor>;
}

export function encodeTensor(shape: number[], values: Float32Array): CheckpointTensor {
  const expected = shape.reduce((a, b) => a * b, 1);
  if (values.length !== expected) {
    throw new Error(`tensor has ${values.length} values, shape wants ${expected}`);
  }
  return {
    shape,
    data: Buffer.from(values.buffer, values.byteOffset, values.byteLength).toString(
      "base64",
    ),
  };
}

export function decodeTensor(t: CheckpointTensor): Float32Array {
  const buf = Buffer.from(t.data, "base64");
  return new Float32Array(buf.buffer, buf.byteOffset, buf.byteLength / 4);
}

export function saveCheckpoint(path: string, ckpt: Checkpoint): void {
  writeFileSync(path, JSON.stringify(ckpt) + "\n");
}

export function loadCheckpoint(path: string): Checkpoint {
  let parsed: Checkpoint;
  try {
    parsed = JSON.parse(readFileSync(path, "utf-8"));
  } catch (err) {
    throw new Error(`cannot load checkpoint ${path}: ${(err as Error).message}`);
  }
  if (parsed.version !== 1 || typeof parsed.weights !== "object") {
    throw new Error(`${path} is not a version-1 checkpoint`);
  }
  return parsed;
}
