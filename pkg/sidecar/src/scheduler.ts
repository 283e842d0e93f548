/** Tiny-mode diffusion conventions: a linear signal schedule, one
 * deterministic denoising step per call, and a fixed channel lift between
 * RGB images and 4-channel latents at 8x spatial compression. These are the
 * sidecar's own conventions, documented here, with no fidelity claim to any
 * particular pretrained backbone.
 */
import { CHANNELS, ModelInput, TinyDenoiser } from "./tinymodel.js";

export const MAX_TIMESTEP = 999;
export const COMPRESSION = 8;

export function alphaBar(t: number): number {
  const clamped = Math.min(Math.max(t, 0), MAX_TIMESTEP);
  return 0.9999 - (0.9999 - 0.02) * (clamped / MAX_TIMESTEP);
}

/** One deterministic (eta = 0) denoising step t -> t-1. */
export function denoiseStep(model: TinyDenoiser, input: ModelInput): Float64Array {
  const { eps } = model.forward(input);
  const t = input.timestep;
  const ab = alphaBar(t);
  const abPrev = alphaBar(t - 1);
  const out = new Float64Array(eps.length);
  const z = input.latent;
  const c1 = Math.sqrt(abPrev / ab);
  const c2 = Math.sqrt(1 - abPrev) - c1 * Math.sqrt(1 - ab);
  for (let i = 0; i < eps.length; i++) out[i] = c1 * z[i] + c2 * eps[i];
  return out;
}

/** Fixed 4x3 channel lift; rows are the latent channels. */
const LIFT = [
  [0.9, 0.1, 0.0],
  [0.1, 0.9, 0.0],
  [0.0, 0.1, 0.9],
  [0.5, 0.5, 0.5],
];

/** Moore-Penrose pseudo-inverse of LIFT (3x4), precomputed. */
const UNLIFT = pinvLift();

function pinvLift(): number[][] {
  // (L^T L)^-1 L^T for the fixed 4x3 matrix via cofactor inversion.
  const ltl = [...Array(3)].map((_, i) =>
    [...Array(3)].map((_, j) =>
      LIFT.reduce((s, row) => s + row[i] * row[j], 0)));
  const [a, b, c] = ltl[0];
  const [d, e, f] = ltl[1];
  const [g, h, i] = ltl[2];
  const det = a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g);
  const inv = [
    [(e * i - f * h) / det, (c * h - b * i) / det, (b * f - c * e) / det],
    [(f * g - d * i) / det, (a * i - c * g) / det, (c * d - a * f) / det],
    [(d * h - e * g) / det, (b * g - a * h) / det, (a * e - b * d) / det],
  ];
  return [...Array(3)].map((_, r) =>
    [...Array(4)].map((_, col) =>
      inv[r].reduce((s, v, j) => s + v * LIFT[col][j], 0)));
}

/** RGB (3, H, W) in [0,1] -> latent (4, H/8, W/8): average pool then lift. */
export function encodeImage(image: ArrayLike<number>, height: number,
                            width: number): { latent: Float64Array; size: number } {
  if (height % COMPRESSION !== 0 || width % COMPRESSION !== 0 || height !== width) {
    throw new Error(`image must be square with sides divisible by ${COMPRESSION}`);
  }
  const size = height / COMPRESSION;
  const pooled = new Float64Array(3 * size * size);
  const f = COMPRESSION;
  for (let ch = 0; ch < 3; ch++) {
    for (let r = 0; r < size; r++) {
      for (let c = 0; c < size; c++) {
        let s = 0;
        for (let dr = 0; dr < f; dr++) {
          for (let dc = 0; dc < f; dc++) {
            s += image[(ch * height + r * f + dr) * width + c * f + dc];
          }
        }
        pooled[(ch * size + r) * size + c] = s / (f * f);
      }
    }
  }
  const latent = new Float64Array(CHANNELS * size * size);
  for (let k = 0; k < CHANNELS; k++) {
    for (let p = 0; p < size * size; p++) {
      let s = 0;
      for (let ch = 0; ch < 3; ch++) s += LIFT[k][ch] * pooled[ch * size * size + p];
      latent[k * size * size + p] = s;
    }
  }
  return { latent, size };
}

/** Latent (4, s, s) -> RGB (H, W, 3) in [0,1], H = W = 8s, nearest upsample. */
export function decodeLatent(latent: ArrayLike<number>, size: number): {
  image: Float64Array; height: number; width: number;
} {
  const out = size * COMPRESSION;
  const image = new Float64Array(out * out * 3);
  for (let r = 0; r < out; r++) {
    const lr = Math.floor(r / COMPRESSION);
    for (let c = 0; c < out; c++) {
      const lc = Math.floor(c / COMPRESSION);
      for (let ch = 0; ch < 3; ch++) {
        let s = 0;
        for (let k = 0; k < CHANNELS; k++) {
          s += UNLIFT[ch][k] * latent[(k * size + lr) * size + lc];
        }
        image[(r * out + c) * 3 + ch] = Math.min(Math.max(s, 0), 1);
      }
    }
  }
  return { image, height: out, width: out };
}
