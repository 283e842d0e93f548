/** Fine-tuning stages on the tiny backbone: prompt-embedding optimization
 * (all model weights frozen, only the new embedding moves) and low-rank
 * adapter training (base weights frozen, only the factor pairs move).
 *
 * Training draws a small fixed pool of (timestep, noise) pairs up front and
 * cycles through it, so runs are deterministic and the objective is a
 * finite sum that first-order descent reliably reduces.
 */
import { Mat, zeros } from "./linalg.js";
import { Rng } from "./rng.js";
import { alphaBar, encodeImage } from "./scheduler.js";
import {
  CHANNELS, LORA_TARGETS, LoraDelta, MODEL_DIM, TinyDenoiser, loraInit,
} from "./tinymodel.js";

export interface TrainImage {
  image: ArrayLike<number>;    // (3, H, W) in [0, 1]
  height: number;
  width: number;
  depth?: ArrayLike<number>;   // (H, W) in [0, 1]; defaults to 0.5 everywhere
}

export interface TrainOptions {
  steps: number;
  lr: number;
  seed?: number;
  noisePoolSize?: number;
}

export class TrainingDiverged extends Error {}

interface Sample {
  latent: Float64Array;
  size: number;
  depth: Float64Array;         // latent resolution
  timestep: number;
  noise: Float64Array;
  noisy: Float64Array;
}

function poolDepth(depth: ArrayLike<number> | undefined, height: number,
                   width: number, size: number): Float64Array {
  const out = new Float64Array(size * size);
  if (!depth) {
    out.fill(0.5);
    return out;
  }
  const f = height / size;
  const counts = new Float64Array(size * size);
  for (let r = 0; r < height; r++) {
    const lr = Math.min(Math.floor(r / f), size - 1);
    for (let c = 0; c < width; c++) {
      const lc = Math.min(Math.floor(c / f), size - 1);
      out[lr * size + lc] += depth[r * width + c];
      counts[lr * size + lc] += 1;
    }
  }
  for (let i = 0; i < out.length; i++) out[i] /= Math.max(counts[i], 1);
  return out;
}

function buildSamples(images: TrainImage[], opts: TrainOptions): Sample[] {
  if (images.length === 0) throw new Error("need at least one training image");
  const rng = new Rng((opts.seed ?? 0) ^ 0x7f4a7c15);
  const pool = opts.noisePoolSize ?? 10;
  const samples: Sample[] = [];
  for (let s = 0; s < pool; s++) {
    const img = images[s % images.length];
    const { latent, size } = encodeImage(img.image, img.height, img.width);
    const depth = poolDepth(img.depth, img.height, img.width, size);
    const timestep = 100 + rng.int(800);
    const noise = rng.gaussianArray(latent.length);
    const ab = alphaBar(timestep);
    const noisy = new Float64Array(latent.length);
    for (let i = 0; i < latent.length; i++) {
      noisy[i] = Math.sqrt(ab) * latent[i] + Math.sqrt(1 - ab) * noise[i];
    }
    samples.push({ latent, size, depth, timestep, noise, noisy });
  }
  return samples;
}

function lossAndDEps(eps: Float64Array, noise: Float64Array): {
  loss: number; dEps: Float64Array;
} {
  let loss = 0;
  const dEps = new Float64Array(eps.length);
  for (let i = 0; i < eps.length; i++) {
    const r = eps[i] - noise[i];
    loss += r * r;
    dEps[i] = (2 * r) / eps.length;
  }
  return { loss: loss / eps.length, dEps };
}

class Adam {
  private readonly m: Mat;
  private readonly v: Mat;
  private t = 0;

  constructor(size: number, private readonly lr: number) {
    this.m = zeros(size);
    this.v = zeros(size);
  }

  step(params: Mat, grad: Mat): void {
    this.t += 1;
    const b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const c1 = 1 - Math.pow(b1, this.t);
    const c2 = 1 - Math.pow(b2, this.t);
    for (let i = 0; i < params.length; i++) {
      this.m[i] = b1 * this.m[i] + (1 - b1) * grad[i];
      this.v[i] = b2 * this.v[i] + (1 - b2) * grad[i] * grad[i];
      params[i] -= (this.lr * (this.m[i] / c1)) / (Math.sqrt(this.v[i] / c2) + eps);
    }
  }
}

export interface TrainResult {
  losses: number[];
}

/** Optimize only the prompt embedding; returns it with the loss curve. */
export function trainTextualInversion(
  model: TinyDenoiser, images: TrainImage[], initEmbedding: Mat,
  opts: TrainOptions,
): { vStar: Mat } & TrainResult {
  const samples = buildSamples(images, opts);
  const vStar = Float64Array.from(initEmbedding);
  const adam = new Adam(vStar.length, opts.lr);
  const losses: number[] = [];
  const hadLora = model.lora;
  model.lora = null;
  try {
    for (let step = 0; step < opts.steps; step++) {
      const s = samples[step % samples.length];
      const { eps, cache } = model.forward({
        latent: s.noisy, size: s.size, depth: s.depth,
        timestep: s.timestep, embedding: vStar,
      });
      const { loss, dEps } = lossAndDEps(eps, s.noise);
      if (!Number.isFinite(loss)) {
        throw new TrainingDiverged(`loss became ${loss} at step ${step}`);
      }
      losses.push(loss);
      const { dEmbedding } = model.backward(dEps, cache);
      adam.step(vStar, dEmbedding);
    }
  } finally {
    model.lora = hadLora;
  }
  return { vStar, losses };
}

/** Optimize only the adapter factors; base weights stay frozen. */
export function trainLora(
  model: TinyDenoiser, images: TrainImage[], embedding: Mat, rank: number,
  opts: TrainOptions,
): { delta: LoraDelta } & TrainResult {
  if (rank < 1) throw new Error("rank must be >= 1");
  const samples = buildSamples(images, opts);
  const delta = loraInit(rank, (opts.seed ?? 0) ^ 0x51ed2701);
  const previous = model.lora;
  model.lora = delta;
  const optimizers = Object.fromEntries(LORA_TARGETS.flatMap((name) => [
    [`${name}.b`, new Adam(delta[name].b.length, opts.lr)],
    [`${name}.a`, new Adam(delta[name].a.length, opts.lr)],
  ]));
  const losses: number[] = [];
  try {
    for (let step = 0; step < opts.steps; step++) {
      const s = samples[step % samples.length];
      const { eps, cache } = model.forward({
        latent: s.noisy, size: s.size, depth: s.depth,
        timestep: s.timestep, embedding,
      });
      const { loss, dEps } = lossAndDEps(eps, s.noise);
      if (!Number.isFinite(loss)) {
        throw new TrainingDiverged(`loss became ${loss} at step ${step}`);
      }
      losses.push(loss);
      const { dLora } = model.backward(dEps, cache);
      for (const name of LORA_TARGETS) {
        optimizers[`${name}.b`].step(delta[name].b, dLora![name].db);
        optimizers[`${name}.a`].step(delta[name].a, dLora![name].da);
      }
    }
  } finally {
    model.lora = previous;
  }
  return { delta, losses };
}

export function runningAverage(values: number[], window: number): number[] {
  const out: number[] = [];
  for (let i = 0; i < values.length; i++) {
    const lo = Math.max(0, i - window + 1);
    const slice = values.slice(lo, i + 1);
    out.push(slice.reduce((a, b) => a + b, 0) / slice.length);
  }
  return out;
}
