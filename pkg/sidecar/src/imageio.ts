/** File interchange for images, masks, depths, embeddings, and adapters:
 * raw little-endian float32 blobs next to JSON headers, matching the wire
 * conventions (<stem>.bin + <stem>.json with {"shape": [...], "dtype": "<f4"}).
 */
import { mkdirSync, readFileSync, writeFileSync } from "node:fs";
import { dirname, join } from "node:path";

import { LORA_TARGETS, LoraDelta, MODEL_DIM } from "./tinymodel.js";

export function saveBlob(stem: string, values: ArrayLike<number>,
                         shape: number[]): void {
  mkdirSync(dirname(stem), { recursive: true });
  const arr = new Float32Array(values.length);
  for (let i = 0; i < values.length; i++) arr[i] = values[i];
  writeFileSync(stem + ".bin", Buffer.from(arr.buffer));
  writeFileSync(stem + ".json",
                JSON.stringify({ shape, dtype: "<f4" }) + "\n");
}

export function loadBlob(stem: string): { values: Float32Array; shape: number[] } {
  const header = JSON.parse(readFileSync(stem + ".json", "utf-8"));
  const raw = readFileSync(stem + ".bin");
  const count = header.shape.reduce((a: number, b: number) => a * b, 1);
  if (raw.length !== count * 4) {
    throw new Error(`${stem}.bin length does not match its header`);
  }
  const values = new Float32Array(count);
  for (let i = 0; i < count; i++) values[i] = raw.readFloatLE(i * 4);
  return { values, shape: header.shape };
}

export function saveEmbedding(stem: string, vStar: ArrayLike<number>,
                              sourcePrompt: string): void {
  saveBlob(stem, vStar, [vStar.length]);
  const meta = JSON.parse(readFileSync(stem + ".json", "utf-8"));
  meta.kind = "prompt_embedding";
  meta.source_prompt = sourcePrompt;
  writeFileSync(stem + ".json", JSON.stringify(meta) + "\n");
}

export function saveLoraDelta(dir: string, delta: LoraDelta): void {
  mkdirSync(dir, { recursive: true });
  const manifest: Record<string, unknown> = {
    kind: "lora_delta",
    rank: delta.w_q.rank,
    scale: delta.w_q.scale,
    dim: MODEL_DIM,
    layers: LORA_TARGETS.slice(),
  };
  for (const name of LORA_TARGETS) {
    saveBlob(join(dir, `${name}_b`), delta[name].b, [MODEL_DIM, delta[name].rank]);
    saveBlob(join(dir, `${name}_a`), delta[name].a, [delta[name].rank, MODEL_DIM]);
  }
  writeFileSync(join(dir, "manifest.json"), JSON.stringify(manifest, null, 2) + "\n");
}

export function loadLoraDelta(dir: string): LoraDelta {
  const manifest = JSON.parse(readFileSync(join(dir, "manifest.json"), "utf-8"));
  const out = {} as LoraDelta;
  for (const name of LORA_TARGETS) {
    const b = loadBlob(join(dir, `${name}_b`));
    const a = loadBlob(join(dir, `${name}_a`));
    out[name] = {
      b: Float64Array.from(b.values),
      a: Float64Array.from(a.values),
      rank: manifest.rank,
      scale: manifest.scale,
    };
  }
  return out;
}
