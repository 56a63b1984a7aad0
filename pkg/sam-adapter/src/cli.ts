#!/usr/bin/env node
/** Adapter entry point.
 *
 * Commands:
 *   init      write a fresh seeded checkpoint (the "pretrained" stand-in)
 *   serve     run the stdio protocol server against a checkpoint
 *   finetune  decoder-only fine-tuning (encoder frozen); fine-tuning loss
 *             is sigmoid binary cross-entropy on mask logits — see
 *             src/finetune.ts for the rationale and alternatives
 */
import { mkdirSync } from "node:fs";
import { dirname } from "node:path";
import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { DEFAULT_HYPERPARAMS, GtSource, finetune } from "./finetune.js";
import { SegmentationModel } from "./model.js";
import { serve } from "./serve.js";

const log = (message: string) => process.stderr.write(message + "\n");

await yargs(hideBin(process.argv))
  .scriptName("sam-adapter")
  .command(
    "init",
    "write a fresh seeded checkpoint",
    (y) =>
      y
        .option("out", { type: "string", demandOption: true })
        .option("seed", { type: "number", default: 0 }),
    (argv) => {
      mkdirSync(dirname(argv.out), { recursive: true });
      const model = SegmentationModel.initialize(argv.seed);
      model.save(argv.out);
      model.dispose();
      log(`wrote ${argv.out}`);
    },
  )
  .command(
    "serve",
    "run the stdio protocol server",
    (y) =>
      y
        .option("checkpoint", { type: "string", demandOption: true })
        .option("out-dir", { type: "string", demandOption: true })
        .option("accepts-mask", { type: "boolean", default: true }),
    async (argv) => {
      try {
        await serve(process.stdin, process.stdout, {
          checkpoint: argv.checkpoint,
          outDir: argv.outDir,
          acceptsMask: argv.acceptsMask,
          log,
        });
      } catch (err) {
        log(`fatal: ${(err as Error).message}`);
        process.exit(1);
      }
    },
  )
  .command(
    "finetune",
    "fine-tune the mask decoder (encoder frozen)",
    (y) =>
      y
        .option("checkpoint", { type: "string", demandOption: true })
        .option("manifest", { type: "string", demandOption: true })
        .option("out-dir", { type: "string", demandOption: true })
        .option("epochs", { type: "number", default: DEFAULT_HYPERPARAMS.epochs })
        .option("batch-size", { type: "number", default: DEFAULT_HYPERPARAMS.batchSize })
        .option("learning-rate", { type: "number", default: DEFAULT_HYPERPARAMS.learningRate })
        .option("prompt-points", { type: "number", default: DEFAULT_HYPERPARAMS.promptPoints })
        .option("gt-source", {
          choices: ["binary", "fuzzy"] as const,
          default: "binary" as GtSource,
        }),
    async (argv) => {
      try {
        mkdirSync(argv.outDir, { recursive: true });
        const result = await finetune({
          checkpoint: argv.checkpoint,
          manifest: argv.manifest,
          outDir: argv.outDir,
          epochs: argv.epochs,
          batchSize: argv.batchSize,
          learningRate: argv.learningRate,
          promptPoints: argv.promptPoints,
          gtSource: argv.gtSource,
          log,
        });
        process.stdout.write(JSON.stringify(result) + "\n");
      } catch (err) {
        log(`fatal: ${(err as Error).message}`);
        process.exit(1);
      }
    },
  )
  .demandCommand(1)
  .strict()
  .parse();
