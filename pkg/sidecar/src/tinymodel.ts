/** Deterministic tiny denoising backbone.
 *
 * One self-attention block over 17 tokens: a 4x4 grid of patch tokens
 * (pooled latent channels, pooled depth, position) plus one conditioning
 * token (prompt embedding + sinusoidal timestep). The four attention
 * projections (q, k, v, o) are the low-rank-adapter target layers. All
 * weights are seeded and frozen; training code updates only adapters or the
 * prompt embedding. Forward and backward passes are written out by hand so
 * gradients are exact and reproducible.
 */
import {
  Mat, addInPlace, matmul, matmulTa, matmulTb, softmaxRows,
  softmaxRowsBackward, zeros,
} from "./linalg.js";
import { Rng } from "./rng.js";

export const MODEL_DIM = 320;          // projection layers are 320 x 320
export const CHANNELS = 4;
export const PATCH_GRID = 4;           // 4x4 patch tokens
export const TOKENS = PATCH_GRID * PATCH_GRID + 1;
export const FEATURE_DIM = CHANNELS + 3;   // pooled channels, depth, row, col

export const LORA_TARGETS = ["w_q", "w_k", "w_v", "w_o"] as const;
export type LoraTarget = (typeof LORA_TARGETS)[number];

export interface LoraLayer {
  b: Mat;                  // (MODEL_DIM x rank), zero-initialized
  a: Mat;                  // (rank x MODEL_DIM), gaussian-initialized
  rank: number;
  scale: number;
}

export type LoraDelta = Record<LoraTarget, LoraLayer>;

export function loraInit(rank: number, seed: number, scale = 1.0): LoraDelta {
  const rng = new Rng(seed);
  const make = (): LoraLayer => ({
    b: zeros(MODEL_DIM * rank),
    a: rng.gaussianArray(rank * MODEL_DIM, 1.0 / Math.sqrt(MODEL_DIM)),
    rank,
    scale,
  });
  return { w_q: make(), w_k: make(), w_v: make(), w_o: make() };
}

export function loraParameterCount(layer: LoraLayer, d = MODEL_DIM, k = MODEL_DIM): number {
  if (layer.b.length !== d * layer.rank || layer.a.length !== layer.rank * k) {
    throw new Error("adapter shape does not match its layer");
  }
  return layer.b.length + layer.a.length;
}

export interface ModelInput {
  latent: Float32Array | Float64Array;   // (CHANNELS, size, size)
  size: number;
  depth: Float32Array | Float64Array;    // (size, size)
  timestep: number;
  embedding: Mat;                        // (MODEL_DIM,)
}

interface Cache {
  x: Mat; q: Mat; k: Mat; v: Mat; p: Mat; hd: Mat; o: Mat;
  feats: Mat;
  patchIndex: Int32Array;                // cell -> patch id
  size: number;
}

export class TinyDenoiser {
  readonly wEmbed: Mat;                  // (FEATURE_DIM x MODEL_DIM)
  readonly wRead: Mat;                   // (MODEL_DIM x CHANNELS)
  readonly base: Record<LoraTarget, Mat>;
  lora: LoraDelta | null = null;

  constructor(seed = 1234) {
    const rng = new Rng(seed);
    const s = 1.0 / Math.sqrt(MODEL_DIM);
    this.wEmbed = rng.gaussianArray(FEATURE_DIM * MODEL_DIM, 1.0 / Math.sqrt(FEATURE_DIM));
    this.base = {
      w_q: rng.gaussianArray(MODEL_DIM * MODEL_DIM, s),
      w_k: rng.gaussianArray(MODEL_DIM * MODEL_DIM, s),
      w_v: rng.gaussianArray(MODEL_DIM * MODEL_DIM, s),
      w_o: rng.gaussianArray(MODEL_DIM * MODEL_DIM, s),
    };
    this.wRead = rng.gaussianArray(MODEL_DIM * CHANNELS, s);
  }

  /** Frozen-weight checksum; training must never change it. */
  baseChecksum(): number {
    let acc = 0;
    for (const name of LORA_TARGETS) {
      const w = this.base[name];
      for (let i = 0; i < w.length; i += 97) acc += w[i];
    }
    for (let i = 0; i < this.wEmbed.length; i += 97) acc += this.wEmbed[i];
    for (let i = 0; i < this.wRead.length; i += 97) acc += this.wRead[i];
    return acc;
  }

  private project(name: LoraTarget, x: Mat, n: number): Mat {
    const out = matmul(x, this.base[name], n, MODEL_DIM, MODEL_DIM);
    const layer = this.lora?.[name];
    if (layer) {
      const xb = matmul(x, layer.b, n, MODEL_DIM, layer.rank);
      const delta = matmul(xb, layer.a, n, layer.rank, MODEL_DIM);
      addInPlace(out, delta, layer.scale);
    }
    return out;
  }

  private buildTokens(input: ModelInput): { x: Mat; feats: Mat; patchIndex: Int32Array } {
    const { latent, depth, size, timestep, embedding } = input;
    const feats = zeros(TOKENS * FEATURE_DIM);
    const patchIndex = new Int32Array(size * size);
    const counts = new Float64Array(PATCH_GRID * PATCH_GRID);
    for (let r = 0; r < size; r++) {
      const pr = Math.min(Math.floor((r * PATCH_GRID) / size), PATCH_GRID - 1);
      for (let c = 0; c < size; c++) {
        const pc = Math.min(Math.floor((c * PATCH_GRID) / size), PATCH_GRID - 1);
        const pid = pr * PATCH_GRID + pc;
        patchIndex[r * size + c] = pid;
        counts[pid] += 1;
        for (let ch = 0; ch < CHANNELS; ch++) {
          feats[pid * FEATURE_DIM + ch] += latent[(ch * size + r) * size + c];
        }
        feats[pid * FEATURE_DIM + CHANNELS] += depth[r * size + c];
      }
    }
    for (let pid = 0; pid < PATCH_GRID * PATCH_GRID; pid++) {
      const n = Math.max(counts[pid], 1);
      for (let f = 0; f <= CHANNELS; f++) feats[pid * FEATURE_DIM + f] /= n;
      feats[pid * FEATURE_DIM + CHANNELS + 1] = Math.floor(pid / PATCH_GRID) / PATCH_GRID;
      feats[pid * FEATURE_DIM + CHANNELS + 2] = (pid % PATCH_GRID) / PATCH_GRID;
    }

    const x = zeros(TOKENS * MODEL_DIM);
    const patchTokens = matmul(feats, this.wEmbed, TOKENS - 1, FEATURE_DIM, MODEL_DIM);
    x.set(patchTokens.subarray(0, (TOKENS - 1) * MODEL_DIM), 0);
    const condRow = (TOKENS - 1) * MODEL_DIM;
    for (let j = 0; j < MODEL_DIM; j++) {
      const freq = Math.pow(10000, -(j % (MODEL_DIM / 2)) / (MODEL_DIM / 2));
      const angle = timestep * freq;
      const time = j < MODEL_DIM / 2 ? Math.sin(angle) : Math.cos(angle);
      x[condRow + j] = embedding[j] + time;
    }
    return { x, feats, patchIndex };
  }

  /** Predicted noise (CHANNELS, size, size) plus the cache for backward. */
  forward(input: ModelInput): { eps: Float64Array; cache: Cache } {
    const { x, feats, patchIndex } = this.buildTokens(input);
    const n = TOKENS;
    const q = this.project("w_q", x, n);
    const k = this.project("w_k", x, n);
    const v = this.project("w_v", x, n);
    const p = matmulTb(q, k, n, MODEL_DIM, n);
    const invSqrt = 1.0 / Math.sqrt(MODEL_DIM);
    for (let i = 0; i < p.length; i++) p[i] *= invSqrt;
    softmaxRows(p, n, n);
    const hd = matmul(p, v, n, n, MODEL_DIM);
    const o = this.project("w_o", hd, n);

    const patchEps = matmul(o, this.wRead, TOKENS - 1, MODEL_DIM, CHANNELS);
    const size = input.size;
    const eps = new Float64Array(CHANNELS * size * size);
    for (let r = 0; r < size; r++) {
      for (let c = 0; c < size; c++) {
        const pid = patchIndex[r * size + c];
        for (let ch = 0; ch < CHANNELS; ch++) {
          eps[(ch * size + r) * size + c] = patchEps[pid * CHANNELS + ch];
        }
      }
    }
    return { eps, cache: { x, q, k, v, p, hd, o, feats, patchIndex, size } };
  }

  /** Gradients of a scalar loss with dLoss/dEps given; geometry is frozen.
   *
   * Returns the gradient for the conditioning embedding and, when adapters
   * are attached, for every adapter factor pair.
   */
  backward(dEps: Float64Array, cache: Cache): {
    dEmbedding: Mat;
    dLora: Record<LoraTarget, { db: Mat; da: Mat }> | null;
  } {
    const { x, q, k, v, p, hd, size, patchIndex } = cache;
    const n = TOKENS;

    const dPatchEps = zeros((TOKENS - 1) * CHANNELS);
    for (let r = 0; r < size; r++) {
      for (let c = 0; c < size; c++) {
        const pid = patchIndex[r * size + c];
        for (let ch = 0; ch < CHANNELS; ch++) {
          dPatchEps[pid * CHANNELS + ch] += dEps[(ch * size + r) * size + c];
        }
      }
    }
    const dO = zeros(n * MODEL_DIM);
    dO.set(matmulTb(dPatchEps, this.wRead, TOKENS - 1, CHANNELS, MODEL_DIM)
      .subarray(0, (TOKENS - 1) * MODEL_DIM), 0);

    const wo = this.effective("w_o");
    const dHd = matmulTb(dO, wo, n, MODEL_DIM, MODEL_DIM);
    const dWo = matmulTa(hd, dO, n, MODEL_DIM, MODEL_DIM);

    const dP = matmulTb(dHd, v, n, MODEL_DIM, n);
    const dV = matmulTa(p, dHd, n, n, MODEL_DIM);
    const dS = softmaxRowsBackward(p, dP, n, n);
    const invSqrt = 1.0 / Math.sqrt(MODEL_DIM);
    const dQ = matmul(dS, k, n, n, MODEL_DIM);
    for (let i = 0; i < dQ.length; i++) dQ[i] *= invSqrt;
    const dK = matmulTa(dS, q, n, n, MODEL_DIM);
    for (let i = 0; i < dK.length; i++) dK[i] *= invSqrt;

    const dWq = matmulTa(x, dQ, n, MODEL_DIM, MODEL_DIM);
    const dWk = matmulTa(x, dK, n, MODEL_DIM, MODEL_DIM);
    const dWv = matmulTa(x, dV, n, MODEL_DIM, MODEL_DIM);

    const dX = matmulTb(dQ, this.effective("w_q"), n, MODEL_DIM, MODEL_DIM);
    addInPlace(dX, matmulTb(dK, this.effective("w_k"), n, MODEL_DIM, MODEL_DIM));
    addInPlace(dX, matmulTb(dV, this.effective("w_v"), n, MODEL_DIM, MODEL_DIM));

    const dEmbedding = zeros(MODEL_DIM);
    const condRow = (TOKENS - 1) * MODEL_DIM;
    for (let j = 0; j < MODEL_DIM; j++) dEmbedding[j] = dX[condRow + j];

    let dLora: Record<LoraTarget, { db: Mat; da: Mat }> | null = null;
    if (this.lora) {
      const grads = { w_q: dWq, w_k: dWk, w_v: dWv, w_o: dWo };
      dLora = {} as Record<LoraTarget, { db: Mat; da: Mat }>;
      for (const name of LORA_TARGETS) {
        const layer = this.lora[name];
        const dW = grads[name];
        const db = matmulTb(dW, layer.a, MODEL_DIM, MODEL_DIM, layer.rank);
        const da = matmulTa(layer.b, dW, MODEL_DIM, layer.rank, MODEL_DIM);
        for (let i = 0; i < db.length; i++) db[i] *= layer.scale;
        for (let i = 0; i < da.length; i++) da[i] *= layer.scale;
        dLora[name] = { db, da };
      }
    }
    return { dEmbedding, dLora };
  }

  private effective(name: LoraTarget): Mat {
    const layer = this.lora?.[name];
    if (!layer) return this.base[name];
    const delta = matmul(layer.b, layer.a, MODEL_DIM, layer.rank, MODEL_DIM);
    const out = Float64Array.from(this.base[name]);
    addInPlace(out, delta, layer.scale);
    return out;
  }
}
