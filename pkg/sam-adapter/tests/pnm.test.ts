import { readFileSync, writeFileSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import {
  readBinaryMask,
  readPgm,
  readPpmGray,
  writeBinaryPgm,
  writeFuzzyPgm,
  writePpm,
} from "../src/pnm.js";
import { tempDir } from "./fixtures.js";

describe("ppm", () => {
  it("round-trips through the gray reader", () => {
    const dir = tempDir("pnm-");
    const rgb = new Uint8Array([255, 255, 255, 0, 0, 0, 90, 90, 90, 30, 60, 90]);
    const path = join(dir, "t.ppm");
    writePpm(path, 2, 2, rgb);
    const gray = readPpmGray(path);
    expect(gray.width).toBe(2);
    expect(gray.height).toBe(2);
    expect(gray.data[0]).toBeCloseTo(1.0, 6);
    expect(gray.data[1]).toBeCloseTo(0.0, 6);
    expect(gray.data[2]).toBeCloseTo(90 / 255, 6);
    expect(gray.data[3]).toBeCloseTo(60 / 255, 6);
  });

  it("rejects a PGM where a PPM is expected", () => {
    const dir = tempDir("pnm-");
    const path = join(dir, "t.pgm");
    writeBinaryPgm(path, 2, 2, new Uint8Array([1, 0, 0, 1]));
    expect(() => readPpmGray(path)).toThrow(/P6/);
  });
});

describe("binary pgm", () => {
  it("writes strictly {0, 255} samples", () => {
    const dir = tempDir("pnm-");
    const path = join(dir, "mask.pgm");
    writeBinaryPgm(path, 3, 2, new Uint8Array([1, 0, 1, 0, 1, 0]));
    const raw = readFileSync(path);
    const body = raw.subarray(raw.length - 6);
    expect([...body]).toEqual([255, 0, 255, 0, 255, 0]);
    const back = readBinaryMask(path);
    expect([...back.bits]).toEqual([1, 0, 1, 0, 1, 0]);
  });

  it("rejects size mismatches", () => {
    const dir = tempDir("pnm-");
    expect(() =>
      writeBinaryPgm(join(dir, "bad.pgm"), 4, 4, new Uint8Array(3)),
    ).toThrow(/size/);
  });
});

describe("fuzzy pgm", () => {
  it("round-trips 16-bit values within quantization error", () => {
    const dir = tempDir("pnm-");
    const values = new Float32Array([0, 0.25, 0.5, 1]);
    const path = join(dir, "fuzzy.pgm");
    writeFuzzyPgm(path, 2, 2, values);
    const back = readPgm(path);
    for (let i = 0; i < 4; i++) {
      expect(Math.abs(back.data[i] - values[i])).toBeLessThanOrEqual(0.5 / 65535);
    }
  });

  it("skips header comments", () => {
    const dir = tempDir("pnm-");
    const path = join(dir, "c.pgm");
    const body = Buffer.from([255, 0]);
    const header = Buffer.from("P5\n# a comment\n2 1\n255\n", "ascii");
    writeFileSync(path, Buffer.concat([header, body]));
    const img = readPgm(path);
    expect(img.width).toBe(2);
    expect(img.data[0]).toBe(1);
  });
});
