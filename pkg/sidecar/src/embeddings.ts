/** Prompt conditioning: a deterministic stand-in text encoder plus the
 * handle registry backing /v1/embed.
 *
 * Text maps to a hash-seeded gaussian vector at the model dimension;
 * identical text always yields the identical handle and vector. Raw
 * embedding blobs of any dimension are accepted and adapted to the model
 * dimension by index folding.
 */
import { createHash } from "node:crypto";

import { Mat } from "./linalg.js";
import { Rng, hashString } from "./rng.js";
import { MODEL_DIM } from "./tinymodel.js";

export function encodeText(text: string): Mat {
  const rng = new Rng(hashString("text:" + text));
  return rng.gaussianArray(MODEL_DIM, 1.0);
}

export function adaptEmbedding(values: ArrayLike<number>): Mat {
  const out = new Float64Array(MODEL_DIM);
  if (values.length === 0) throw new Error("empty embedding");
  for (let i = 0; i < Math.max(values.length, MODEL_DIM); i++) {
    out[i % MODEL_DIM] += values[i % values.length];
  }
  const scale = Math.sqrt(values.length / MODEL_DIM);
  if (values.length > MODEL_DIM) {
    for (let i = 0; i < MODEL_DIM; i++) out[i] /= scale;
  }
  return out;
}

export class PromptRegistry {
  private readonly store = new Map<string, Mat>();

  registerText(text: string): string {
    const handle = "tiny-" + createHash("sha1").update(text).digest("hex").slice(0, 12);
    if (!this.store.has(handle)) this.store.set(handle, encodeText(text));
    return handle;
  }

  registerEmbedding(values: ArrayLike<number>): string {
    const adapted = adaptEmbedding(values);
    const bytes = Buffer.from(new Float64Array(adapted).buffer);
    const handle = "tiny-" + createHash("sha1").update(bytes).digest("hex").slice(0, 12);
    this.store.set(handle, adapted);
    return handle;
  }

  /** Unknown handles fall back to a vector derived from the handle text, so
   * a restarted service stays deterministic for previously issued handles. */
  resolve(handle: string): Mat {
    const found = this.store.get(handle);
    if (found) return found;
    const rng = new Rng(hashString("handle:" + handle));
    return rng.gaussianArray(MODEL_DIM, 1.0);
  }
}
