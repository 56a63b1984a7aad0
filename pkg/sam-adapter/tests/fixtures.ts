/** Shared test fixtures: tiny synthetic frames and masks on disk. */
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { writeBinaryPgm, writeFuzzyPgm, writePpm } from "../src/pnm.js";

export function tempDir(prefix: string): string {
  return mkdtempSync(join(tmpdir(), prefix));
}

/** Frame with a bright rectangle on a dark background, plus its mask. */
export function writeScene(
  dir: string,
  name: string,
  width = 48,
  height = 40,
  rect: { x: number; y: number; w: number; h: number } = {
    x: 10,
    y: 8,
    w: 16,
    h: 12,
  },
): { image: string; mask: string } {
  const rgb = new Uint8Array(3 * width * height);
  const bits = new Uint8Array(width * height);
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const p = y * width + x;
      const inside =
        x >= rect.x && x < rect.x + rect.w && y >= rect.y && y < rect.y + rect.h;
      rgb[3 * p] = inside ? 200 : 40 + ((x * 7 + y * 13) % 23);
      rgb[3 * p + 1] = inside ? 60 : 90;
      rgb[3 * p + 2] = inside ? 60 : 90;
      bits[p] = inside ? 1 : 0;
    }
  }
  const image = join(dir, `${name}.ppm`);
  const mask = join(dir, `${name}_mask.pgm`);
  writePpm(image, width, height, rgb);
  writeBinaryPgm(mask, width, height, bits);
  return { image, mask };
}

/** Soft-edged mask matching writeScene's rectangle, as a 16-bit PGM. */
export function writeFuzzyScene(
  dir: string,
  name: string,
  width = 48,
  height = 40,
): string {
  const values = new Float32Array(width * height);
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const dx = Math.max(10 - x, x - 25, 0);
      const dy = Math.max(8 - y, y - 19, 0);
      values[y * width + x] = Math.exp(-(dx * dx + dy * dy) / 8);
    }
  }
  const path = join(dir, `${name}_fuzzy.pgm`);
  writeFuzzyPgm(path, width, height, values);
  return path;
}

/** JSONL manifest in the prompt engine's shape over the given scenes. */
export function writeManifest(
  dir: string,
  scenes: Array<{ image: string; mask: string }>,
): string {
  const entry = {
    class_name: "SynthBox",
    participant_id: "1",
    scene_id: "s0",
    gaze_log_ref: "gaze.json",
    frames: scenes.map((s, i) => ({
      frame_id: `SynthBox_s0_p1_${String(i).padStart(5, "0")}`,
      index: i,
      image: s.image,
      gt_mask: s.mask,
    })),
  };
  const path = join(dir, "manifest.jsonl");
  writeFileSync(path, JSON.stringify(entry) + "\n");
  return path;
}
