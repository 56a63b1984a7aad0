/** Desk-scale stand-in for the promptable segmentation model.
 *
 * Mirrors the real architecture's split — a frozen image encoder feeding a
 * small trainable mask decoder — at a resolution this sandbox can train:
 * the image is embedded at 64x64, prompts arrive as a point heatmap plus an
 * optional low-resolution mask channel, and the decoder emits mask logits
 * that are upsampled to frame resolution and thresholded at 0.
 *
 * The real ViT-Base weights are not available here; the encoder is a tiny
 * convnet with deterministically initialized weights. Everything that the
 * wire protocol and the fine-tuning audit exercise (handshake, id echo,
 * determinism, frozen-encoder training) is faithful.
 */
import * as tf from "@tensorflow/tfjs";

import {
  Checkpoint,
  decodeTensor,
  encodeTensor,
  loadCheckpoint,
  saveCheckpoint,
} from "./checkpoint.js";
import { GrayImage } from "./pnm.js";
import { mulberry32, uniformInit } from "./rng.js";

export const EMBED_SIZE = 64;
export const DEFAULT_VARIANT = "ViT-Base (stand-in)";

const ENCODER_PREFIX = "encoder/";

interface ParamSpec {
  name: string;
  shape: number[];
}

const PARAM_SPECS: ParamSpec[] = [
  { name: "encoder/conv1/kernel", shape: [3, 3, 1, 8] },
  { name: "encoder/conv1/bias", shape: [8] },
  { name: "encoder/conv2/kernel", shape: [3, 3, 8, 8] },
  { name: "encoder/conv2/bias", shape: [8] },
  { name: "decoder/conv1/kernel", shape: [3, 3, 10, 8] },
  { name: "decoder/conv1/bias", shape: [8] },
  { name: "decoder/out/kernel", shape: [1, 1, 8, 1] },
  { name: "decoder/out/bias", shape: [1] },
];

export interface PromptPoint {
  x: number;
  y: number;
  label: number;
}

export class SegmentationModel {
  readonly variant: string;
  readonly seed: number;
  private readonly params = new Map<string, tf.Variable>();

  private constructor(variant: string, seed: number) {
    this.variant = variant;
    this.seed = seed;
  }

  /** Fresh model with seeded weights (the "pretrained" stand-in). */
  static initialize(seed: number, variant: string = DEFAULT_VARIANT): SegmentationModel {
    const model = new SegmentationModel(variant, seed);
    const rng = mulberry32(seed);
    for (const spec of PARAM_SPECS) {
      const size = spec.shape.reduce((a, b) => a * b, 1);
      const fanIn = spec.shape.length === 4 ? spec.shape[0] * spec.shape[1] * spec.shape[2] : size;
      const values = spec.name.endsWith("bias")
        ? new Float32Array(size)
        : uniformInit(rng, size, fanIn);
      model.params.set(spec.name, tf.variable(tf.tensor(values, spec.shape)));
    }
    return model;
  }

  static fromCheckpoint(path: string): SegmentationModel {
    const ckpt = loadCheckpoint(path);
    const model = new SegmentationModel(ckpt.variant, ckpt.seed);
    for (const spec of PARAM_SPECS) {
      const stored = ckpt.weights[spec.name];
      if (!stored) throw new Error(`checkpoint is missing ${spec.name}`);
      model.params.set(
        spec.name,
        tf.variable(tf.tensor(decodeTensor(stored), stored.shape)),
      );
    }
    return model;
  }

  save(path: string): void {
    const weights: Checkpoint["weights"] = {};
    for (const spec of PARAM_SPECS) {
      const v = this.params.get(spec.name)!;
      weights[spec.name] = encodeTensor(spec.shape, v.dataSync() as Float32Array);
    }
    saveCheckpoint(path, { version: 1, variant: this.variant, seed: this.seed, weights });
  }

  /** Raw parameter bytes by name; used by the frozen-encoder audit. */
  snapshot(): Map<string, Float32Array> {
    const out = new Map<string, Float32Array>();
    for (const [name, v] of this.params) {
      out.set(name, (v.dataSync() as Float32Array).slice());
    }
    return out;
  }

  encoderParamNames(): string[] {
    return PARAM_SPECS.map((s) => s.name).filter((n) => n.startsWith(ENCODER_PREFIX));
  }

  decoderVariables(): tf.Variable[] {
    return PARAM_SPECS.filter((s) => !s.name.startsWith(ENCODER_PREFIX)).map(
      (s) => this.params.get(s.name)!,
    );
  }

  private conv(x: tf.Tensor4D, name: string, relu: boolean): tf.Tensor4D {
    const kernel = this.params.get(`${name}/kernel`)! as unknown as tf.Tensor4D;
    const bias = this.params.get(`${name}/bias`)!;
    let y = tf.add(tf.conv2d(x, kernel, 1, "same"), bias) as tf.Tensor4D;
    if (relu) y = tf.relu(y);
    return y;
  }

  /** [1, 64, 64, 1] logits from embedded image + prompt channels. */
  logits(imageGrid: tf.Tensor4D, heatGrid: tf.Tensor4D, maskGrid: tf.Tensor4D): tf.Tensor4D {
    const f1 = this.conv(imageGrid, "encoder/conv1", true);
    const features = this.conv(f1, "encoder/conv2", true);
    const stacked = tf.concat([features, heatGrid, maskGrid], 3) as tf.Tensor4D;
    const d1 = this.conv(stacked, "decoder/conv1", true);
    return this.conv(d1, "decoder/out", false);
  }

  /** Binary mask (0/1 per pixel) at frame resolution. */
  predict(image: GrayImage, points: PromptPoint[], lowResMask: GrayImage | null): Uint8Array {
    if (points.length === 0) throw new Error("at least one prompt point required");
    return tf.tidy(() => {
      const imageGrid = embedImage(image);
      const heatGrid = pointHeatmap(points, image.width, image.height);
      const maskGrid = lowResMask ? embedImage(lowResMask) : (tf.zeros([1, EMBED_SIZE, EMBED_SIZE, 1]) as tf.Tensor4D);
      const logits = this.logits(imageGrid, heatGrid, maskGrid);
      const full = tf.image.resizeBilinear(logits, [image.height, image.width]);
      const values = full.dataSync() as Float32Array;
      const bits = new Uint8Array(values.length);
      for (let p = 0; p < values.length; p++) bits[p] = values[p] > 0 ? 1 : 0;
      return bits;
    });
  }

  dispose(): void {
    for (const v of this.params.values()) v.dispose();
    this.params.clear();
  }
}

/** Bilinear downscale of a gray image into the embedding grid. */
export function embedImage(image: GrayImage): tf.Tensor4D {
  return tf.tidy(() => {
    const t = tf.tensor(image.data, [1, image.height, image.width, 1]) as tf.Tensor4D;
    return tf.image.resizeBilinear(t, [EMBED_SIZE, EMBED_SIZE]);
  });
}

/** Gaussian bumps (sigma 2 embed px) at each prompt point, clamped to 1. */
export function pointHeatmap(
  points: PromptPoint[],
  frameWidth: number,
  frameHeight: number,
): tf.Tensor4D {
  const grid = new Float32Array(EMBED_SIZE * EMBED_SIZE);
  const sigma2 = 2 * 2 * 2;
  for (const p of points) {
    const px = (p.x / frameWidth) * EMBED_SIZE;
    const py = (p.y / frameHeight) * EMBED_SIZE;
    for (let y = 0; y < EMBED_SIZE; y++) {
      for (let x = 0; x < EMBED_SIZE; x++) {
        const d2 = (x - px) * (x - px) + (y - py) * (y - py);
        if (d2 > 9 * sigma2) continue;
        const i = y * EMBED_SIZE + x;
        grid[i] = Math.min(1, grid[i] + Math.exp(-d2 / sigma2));
      }
    }
  }
  return tf.tensor(grid, [1, EMBED_SIZE, EMBED_SIZE, 1]) as tf.Tensor4D;
}
