#!/usr/bin/env node
/** Sidecar command line.
 *
 *   sidecar serve      [--port 8642] [--mode echo|tiny] [--seed 1234] [--lora dir]
 *   sidecar ti-train   --image stem --init-prompt "text" [--depth stem]
 *                      [--steps 50] [--lr 0.05] [--seed 0] --out stem
 *   sidecar lora-train --image stem --prompt "text" [--depth stem] [--rank 32]
 *                      [--steps 50] [--lr 0.02] [--seed 0] --out dir
 *   sidecar augment    --image stem --mask stem [--depth stem] --count N
 *                      [--config aug.json] [--seed 0] --out dir
 *
 * Images and masks are float32 blob files (<stem>.bin + <stem>.json).
 */
import { readFileSync } from "node:fs";
import { join } from "node:path";

import { AugmentConfig, IDENTITY_CONFIG, Sample, augmentDataset } from "./augment.js";
import { predictDepth } from "./depth.js";
import { encodeText } from "./embeddings.js";
import { loadBlob, loadLoraDelta, saveBlob, saveEmbedding, saveLoraDelta } from "./imageio.js";
import { startServer } from "./service.js";
import { TinyDenoiser } from "./tinymodel.js";
import { TrainImage, runningAverage, trainLora, trainTextualInversion } from "./training.js";

function parseArgs(argv: string[]): { command: string; flags: Map<string, string> } {
  const [command, ...rest] = argv;
  const flags = new Map<string, string>();
  for (let i = 0; i < rest.length; i++) {
    if (!rest[i].startsWith("--")) throw new Error(`unexpected argument ${rest[i]}`);
    const key = rest[i].slice(2);
    const next = rest[i + 1];
    if (next !== undefined && !next.startsWith("--")) {
      flags.set(key, next);
      i++;
    } else {
      flags.set(key, "true");
    }
  }
  return { command: command ?? "", flags };
}

function need(flags: Map<string, string>, key: string): string {
  const value = flags.get(key);
  if (!value) throw new Error(`missing required flag --${key}`);
  return value;
}

function loadTrainImage(flags: Map<string, string>): TrainImage {
  const img = loadBlob(need(flags, "image"));
  const [, height, width] = img.shape;
  const image: TrainImage = {
    image: Float64Array.from(img.values), height, width,
  };
  const depthStem = flags.get("depth");
  if (depthStem) {
    image.depth = Float64Array.from(loadBlob(depthStem).values);
  } else {
    image.depth = predictDepth(Float64Array.from(img.values), height, "luma");
  }
  return image;
}

function main(): number {
  const { command, flags } = parseArgs(process.argv.slice(2));
  switch (command) {
    case "serve": {
      const lora = flags.get("lora") ? loadLoraDelta(flags.get("lora")!) : null;
      startServer(Number(flags.get("port") ?? 8642), {
        mode: (flags.get("mode") ?? "echo") as "echo" | "tiny",
        seed: Number(flags.get("seed") ?? 1234),
        lora,
      });
      return 0;
    }
    case "ti-train": {
      const model = new TinyDenoiser(Number(flags.get("model-seed") ?? 1234));
      const prompt = need(flags, "init-prompt");
      const { vStar, losses } = trainTextualInversion(
        model, [loadTrainImage(flags)], encodeText(prompt), {
          steps: Number(flags.get("steps") ?? 50),
          lr: Number(flags.get("lr") ?? 0.05),
          seed: Number(flags.get("seed") ?? 0),
        });
      saveEmbedding(need(flags, "out"), vStar, prompt);
      const avg = runningAverage(losses, 10);
      console.log(`ti-train: loss ${avg[0]?.toFixed(5)} -> ${avg[avg.length - 1]?.toFixed(5)}`);
      return 0;
    }
    case "lora-train": {
      const model = new TinyDenoiser(Number(flags.get("model-seed") ?? 1234));
      const { delta, losses } = trainLora(
        model, [loadTrainImage(flags)], encodeText(need(flags, "prompt")),
        Number(flags.get("rank") ?? 32), {
          steps: Number(flags.get("steps") ?? 50),
          lr: Number(flags.get("lr") ?? 0.003),
          seed: Number(flags.get("seed") ?? 0),
        });
      saveLoraDelta(need(flags, "out"), delta);
      const avg = runningAverage(losses, 10);
      console.log(`lora-train: loss ${avg[0]?.toFixed(5)} -> ${avg[avg.length - 1]?.toFixed(5)}`);
      return 0;
    }
    case "augment": {
      const img = loadBlob(need(flags, "image"));
      const [, , size] = img.shape;
      const mask = loadBlob(need(flags, "mask"));
      const depthStem = flags.get("depth");
      const depth = depthStem
        ? Float64Array.from(loadBlob(depthStem).values)
        : predictDepth(Float64Array.from(img.values), size, "luma");
      const sample: Sample = {
        image: Float64Array.from(img.values),
        mask: Float64Array.from(mask.values),
        depth, size,
      };
      const cfgPath = flags.get("config");
      const cfg: AugmentConfig = cfgPath
        ? { ...IDENTITY_CONFIG, ...JSON.parse(readFileSync(cfgPath, "utf-8")) }
        : IDENTITY_CONFIG;
      const count = Number(need(flags, "count"));
      const outDir = need(flags, "out");
      const results = augmentDataset([sample], cfg, count,
                                     Number(flags.get("seed") ?? 0));
      results.forEach((res, i) => {
        const stem = String(i).padStart(3, "0");
        saveBlob(join(outDir, `image_${stem}`), res.image, [3, size, size]);
        saveBlob(join(outDir, `mask_${stem}`), res.mask, [size, size]);
        saveBlob(join(outDir, `depth_${stem}`), res.depth, [size, size]);
      });
      console.log(`augment: wrote ${results.length} triples to ${outDir}`);
      return 0;
    }
    default:
      console.error("usage: sidecar <serve|ti-train|lora-train|augment> [flags]");
      return 2;
  }
}

try {
  const code = main();
  if (code !== 0) process.exitCode = code;
} catch (err) {
  console.error(`error: ${err instanceof Error ? err.message : err}`);
  process.exitCode = 2;
}
