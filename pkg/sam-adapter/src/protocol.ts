/** Wire protocol types: newline-delimited JSON over stdio, one request in
 * flight, masks exchanged as file paths. */

export const PROTOCOL_VERSION = 1;

export interface Handshake {
  protocol: number;
  accepts_mask: boolean;
  deterministic: boolean;
}

export interface SegmentRequest {
  id: number;
  op: "segment";
  image: string;
  points: Array<{ x: number; y: number; label: number }>;
  mask: string | null;
}

export interface OkResponse {
  id: number;
  status: "ok";
  mask: string;
  time_s: number;
}

export interface ErrorResponse {
  id: number;
  status: "error";
  message: string;
}

export type Response = OkResponse | ErrorResponse;

/** Validates the shape of an incoming request line; throws on malformed
 * input with a message suitable for an error response. */
export function parseRequest(line: string): SegmentRequest {
  let raw: unknown;
  try {
    raw = JSON.parse(line);
  } catch {
    throw new Error("malformed JSON request");
  }
  const req = raw as Partial<SegmentRequest>;
  if (typeof req.id !== "number" || !Number.isInteger(req.id)) {
    throw new Error("request is missing an integer id");
  }
  if (req.op !== "segment") {
    throw new Error(`unsupported op ${JSON.stringify(req.op)}`);
  }
  if (typeof req.image !== "string" || req.image.length === 0) {
    throw new Error("request is missing an image path");
  }
  if (!Array.isArray(req.points) || req.points.length === 0) {
    throw new Error("request needs at least one prompt point");
  }
  for (const p of req.points) {
    if (typeof p?.x !== "number" || typeof p?.y !== "number") {
      throw new Error("prompt points need numeric x and y");
    }
  }
  if (req.mask !== null && req.mask !== undefined && typeof req.mask !== "string") {
    throw new Error("mask must be a file path or null");
  }
  return {
    id: req.id,
    op: "segment",
    image: req.image,
    points: req.points,
    mask: req.mask ?? null,
  };
}
