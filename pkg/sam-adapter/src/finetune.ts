/** Decoder fine-tuning with the image encoder frozen.
 *
 * LOSS CHOICE (documented prominently because the method description leaves
 * it unstated): sigmoid binary cross-entropy between decoder logits and the
 * ground-truth mask, averaged over pixels. Focal + dice is the common
 * alternative for promptable-mask decoders; plain BCE is chosen here
 * because the desk-scale audit only needs a differentiable objective whose
 * gradients reach the decoder and not the encoder.
 *
 * Only decoder variables are passed to the optimizer; the encoder is
 * frozen by exclusion, and `SegmentationModel.snapshot()` lets tests verify
 * its parameters are bit-identical after training.
 */
import * as tf from "@tensorflow/tfjs";
import { mkdirSync, readFileSync } from "node:fs";
import { dirname, isAbsolute, join } from "node:path";

import { EMBED_SIZE, PromptPoint, SegmentationModel, embedImage, pointHeatmap } from "./model.js";
import { GrayImage, readBinaryMask, readPgm, readPpmGray } from "./pnm.js";

export type GtSource = "binary" | "fuzzy";

export interface FinetuneConfig {
  checkpoint: string;
  manifest: string;
  outDir: string;
  epochs: number;
  batchSize: number;
  learningRate: number;
  gtSource: GtSource;
  promptPoints: number;
  log?: (message: string) => void;
}

export const DEFAULT_HYPERPARAMS = {
  learningRate: 1e-5,
  epochs: 30,
  batchSize: 4,
  promptPoints: 5,
};

interface Sample {
  image: string;
  gtMask: string;
}

/** Frames with ground truth from a JSONL manifest (the prompt engine's
 * format); paths resolve relative to the manifest file. */
export function loadSamples(manifestPath: string): Sample[] {
  const base = dirname(manifestPath);
  const resolve = (p: string) => (isAbsolute(p) ? p : join(base, p));
  const samples: Sample[] = [];
  const lines = readFileSync(manifestPath, "utf-8").split("\n");
  lines.forEach((line, i) => {
    if (line.trim().length === 0) return;
    let entry: { frames?: Array<{ image?: string; gt_mask?: string }> };
    try {
      entry = JSON.parse(line);
    } catch {
      throw new Error(`${manifestPath}:${i + 1}: malformed JSON`);
    }
    for (const frame of entry.frames ?? []) {
      if (frame.image && frame.gt_mask) {
        samples.push({
          image: resolve(frame.image),
          gtMask: resolve(frame.gt_mask),
        });
      }
    }
  });
  if (samples.length === 0) {
    throw new Error(`${manifestPath}: no frames with ground-truth masks`);
  }
  return samples;
}

/** Up to n foreground pixels: mask-centroid-nearest first, then farthest
 * point sampling — the same flavor of deterministic spread the prompt
 * engine uses. */
export function promptPointsFromMask(
  mask: { width: number; height: number; bits: Uint8Array },
  n: number,
): PromptPoint[] {
  const xs: number[] = [];
  const ys: number[] = [];
  for (let y = 0; y < mask.height; y++) {
    for (let x = 0; x < mask.width; x++) {
      if (mask.bits[y * mask.width + x]) {
        xs.push(x + 0.5);
        ys.push(y + 0.5);
      }
    }
  }
  if (xs.length === 0) throw new Error("ground-truth mask is empty");
  const cx = xs.reduce((a, b) => a + b, 0) / xs.length;
  const cy = ys.reduce((a, b) => a + b, 0) / ys.length;
  let first = 0;
  let best = Infinity;
  for (let i = 0; i < xs.length; i++) {
    const d = (xs[i] - cx) ** 2 + (ys[i] - cy) ** 2;
    if (d < best) {
      best = d;
      first = i;
    }
  }
  const chosen = [first];
  const minDist = xs.map((_, i) => (xs[i] - xs[first]) ** 2 + (ys[i] - ys[first]) ** 2);
  while (chosen.length < Math.min(n, xs.length)) {
    let next = 0;
    let far = -1;
    for (let i = 0; i < xs.length; i++) {
      if (minDist[i] > far) {
        far = minDist[i];
        next = i;
      }
    }
    chosen.push(next);
    for (let i = 0; i < xs.length; i++) {
      const d = (xs[i] - xs[next]) ** 2 + (ys[i] - ys[next]) ** 2;
      if (d < minDist[i]) minDist[i] = d;
    }
  }
  return chosen.map((i) => ({ x: xs[i], y: ys[i], label: 1 }));
}

interface PreparedSample {
  imageGrid: tf.Tensor4D;
  heatGrid: tf.Tensor4D;
  maskGrid: tf.Tensor4D;
  target: tf.Tensor4D;
}

function prepare(sample: Sample, cfg: FinetuneConfig): PreparedSample {
  const image = readPpmGray(sample.image);
  let gt: GrayImage;
  if (cfg.gtSource === "fuzzy") {
    gt = readPgm(sample.gtMask);
  } else {
    const bin = readBinaryMask(sample.gtMask);
    gt = {
      width: bin.width,
      height: bin.height,
      data: Float32Array.from(bin.bits),
    };
  }
  const binForPoints = readBinaryMask(sample.gtMask);
  const points = promptPointsFromMask(binForPoints, cfg.promptPoints);
  return {
    imageGrid: embedImage(image),
    heatGrid: pointHeatmap(points, image.width, image.height),
    maskGrid: tf.zeros([1, EMBED_SIZE, EMBED_SIZE, 1]) as tf.Tensor4D,
    target: embedImage(gt),
  };
}

export interface FinetuneResult {
  epochs: number;
  lossHistory: number[];
  checkpoints: string[];
  gtSource: GtSource;
}

export async function finetune(cfg: FinetuneConfig): Promise<FinetuneResult> {
  const log = cfg.log ?? (() => {});
  if (cfg.learningRate <= 0 || cfg.epochs <= 0 || cfg.batchSize <= 0) {
    throw new Error("hyperparameters must be positive");
  }
  const model = SegmentationModel.fromCheckpoint(cfg.checkpoint);
  const samples = loadSamples(cfg.manifest);
  mkdirSync(cfg.outDir, { recursive: true });
  log(
    `fine-tuning on ${samples.length} samples, gt-source=${cfg.gtSource}` +
      (cfg.gtSource === "fuzzy" ? " (fuzzy-ground-truth ablation mode)" : ""),
  );
  const prepared = samples.map((s) => prepare(s, cfg));
  const optimizer = tf.train.adam(cfg.learningRate);
  const decoderVars = model.decoderVariables();

  const lossHistory: number[] = [];
  const checkpoints: string[] = [];
  for (let epoch = 1; epoch <= cfg.epochs; epoch++) {
    let epochLoss = 0;
    let steps = 0;
    for (let start = 0; start < prepared.length; start += cfg.batchSize) {
      const batch = prepared.slice(start, start + cfg.batchSize);
      const loss = optimizer.minimize(
        () => {
          const losses = batch.map((b) => {
            const logits = model.logits(b.imageGrid, b.heatGrid, b.maskGrid);
            return tf.losses.sigmoidCrossEntropy(b.target, logits);
          });
          return tf.mean(tf.stack(losses)) as tf.Scalar;
        },
        true,
        decoderVars,
      );
      const value = (loss!.dataSync() as Float32Array)[0];
      loss!.dispose();
      if (!Number.isFinite(value)) {
        throw new Error(`non-finite loss at epoch ${epoch} step ${steps + 1}`);
      }
      epochLoss += value;
      steps += 1;
    }
    const mean = epochLoss / steps;
    lossHistory.push(mean);
    const path = join(cfg.outDir, `epoch_${String(epoch).padStart(3, "0")}.json`);
    model.save(path);
    checkpoints.push(path);
    log(`epoch ${epoch}/${cfg.epochs} loss ${mean.toFixed(6)}`);
  }
  for (const p of prepared) {
    p.imageGrid.dispose();
    p.heatGrid.dispose();
    p.maskGrid.dispose();
    p.target.dispose();
  }
  optimizer.dispose();
  model.dispose();
  return { epochs: cfg.epochs, lossHistory, checkpoints, gtSource: cfg.gtSource };
}
