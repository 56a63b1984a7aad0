/** Long-running protocol server: handshake first, then one response per
 * request line. Per-request failures become status=error responses and the
 * server stays up; only a startup failure (bad checkpoint) is fatal. */
import { mkdirSync } from "node:fs";
import { join } from "node:path";
import * as readline from "node:readline";
import { Readable, Writable } from "node:stream";

import { SegmentationModel } from "./model.js";
import { readPgm, readPpmGray, writeBinaryPgm } from "./pnm.js";
import {
  Handshake,
  PROTOCOL_VERSION,
  Response,
  parseRequest,
} from "./protocol.js";

export interface ServeOptions {
  checkpoint: string;
  outDir: string;
  acceptsMask: boolean;
  /** Diagnostic channel; the protocol channel carries only JSON lines. */
  log?: (message: string) => void;
}

export async function serve(
  input: Readable,
  output: Writable,
  options: ServeOptions,
): Promise<void> {
  const log = options.log ?? (() => {});
  const model = SegmentationModel.fromCheckpoint(options.checkpoint);
  mkdirSync(options.outDir, { recursive: true });

  const handshake: Handshake = {
    protocol: PROTOCOL_VERSION,
    accepts_mask: options.acceptsMask,
    deterministic: true,
  };
  output.write(JSON.stringify(handshake) + "\n");
  log(`serving checkpoint ${options.checkpoint} (${model.variant})`);

  for await (const line of readline.createInterface({ input })) {
    if (line.trim().length === 0) continue;
    const response = handleLine(line, model, options);
    output.write(JSON.stringify(response) + "\n");
  }
  model.dispose();
}

function handleLine(
  line: string,
  model: SegmentationModel,
  options: ServeOptions,
): Response {
  // echo the request id in error responses whenever it is recoverable
  let id = 0;
  try {
    const raw = JSON.parse(line) as { id?: unknown };
    if (typeof raw.id === "number" && Number.isInteger(raw.id)) id = raw.id;
  } catch {
    // malformed JSON: fall through, parseRequest reports it
  }
  try {
    const req = parseRequest(line);
    if (req.mask !== null && !options.acceptsMask) {
      return { id, status: "error", message: "mask unsupported" };
    }
    const start = process.hrtime.bigint();
    const image = readPpmGray(req.image);
    const lowRes = req.mask !== null ? readPgm(req.mask) : null;
    const bits = model.predict(image, req.points, lowRes);
    const maskPath = join(options.outDir, `mask_${req.id}.pgm`);
    writeBinaryPgm(maskPath, image.width, image.height, bits);
    const elapsed = Number(process.hrtime.bigint() - start) / 1e9;
    return { id, status: "ok", mask: maskPath, time_s: elapsed };
  } catch (err) {
    return { id, status: "error", message: (err as Error).message };
  }
}
