/** Dataset augmentation: rotation, translation, scaling, flipping, and
 * background replacement, applied identically to image, mask, and depth.
 *
 * Exact right-angle rotations (with optional flip, unit scale, zero
 * translation) run as index permutations, so masks align with analytic
 * transforms bit for bit. Everything else goes through one inverse-mapped
 * affine resampler: bilinear for image and depth, nearest for the mask.
 */
import { Rng } from "./rng.js";

export interface Sample {
  image: Float64Array;         // (3, H, W) in [0, 1]
  mask: Float64Array;          // (H, W), values 0 or 1
  depth: Float64Array;         // (H, W) in [0, 1]
  size: number;                // H = W
}

export interface AugmentConfig {
  rotationDegrees: [number, number];
  translation: [number, number];      // fraction of the image side
  scale: [number, number];
  flipProbability: number;
  backgrounds?: Float64Array[];       // each (3, size, size)
}

export const IDENTITY_CONFIG: AugmentConfig = {
  rotationDegrees: [0, 0],
  translation: [0, 0],
  scale: [1, 1],
  flipProbability: 0,
};

interface Transform {
  angle: number;               // degrees, counterclockwise
  tx: number;                  // pixels
  ty: number;
  scale: number;
  flip: boolean;               // horizontal flip applied before rotation
}

function sampleTransform(cfg: AugmentConfig, rng: Rng): Transform {
  return {
    angle: rng.uniform(cfg.rotationDegrees[0], cfg.rotationDegrees[1]),
    tx: rng.uniform(cfg.translation[0], cfg.translation[1]),
    ty: rng.uniform(cfg.translation[0], cfg.translation[1]),
    scale: rng.uniform(cfg.scale[0], cfg.scale[1]),
    flip: rng.next() < cfg.flipProbability,
  };
}

function isExactGridTransform(t: Transform): boolean {
  return t.scale === 1 && t.tx === 0 && t.ty === 0 &&
    Math.abs(t.angle % 90) === 0;
}

/** Source index for an exact grid transform, or -1 when out of range. */
function gridSource(r: number, c: number, size: number, t: Transform): [number, number] {
  let sr = r;
  let sc = c;
  const quarter = ((Math.round(t.angle / 90) % 4) + 4) % 4;
  // invert the rotation: output = rot(quarter) of source
  for (let i = 0; i < quarter; i++) {
    const nr = sc;
    const nc = size - 1 - sr;
    sr = nr;
    sc = nc;
  }
  if (t.flip) sc = size - 1 - sc;
  return [sr, sc];
}

export function applyTransform(sample: Sample, t: Transform,
                               background?: Float64Array): Sample {
  const size = sample.size;
  const image = new Float64Array(3 * size * size);
  const mask = new Float64Array(size * size);
  const depth = new Float64Array(size * size);

  const paint = (r: number, c: number, sr: number, sc: number,
                 weights?: [number, number, number, number],
                 corners?: [number, number][]) => {
    const oi = r * size + c;
    if (weights && corners) {
      for (let ch = 0; ch < 3; ch++) {
        let s = 0;
        for (let k = 0; k < 4; k++) {
          s += weights[k] * sample.image[(ch * size + corners[k][0]) * size + corners[k][1]];
        }
        image[ch * size * size + oi] = s;
      }
      let d = 0;
      for (let k = 0; k < 4; k++) {
        d += weights[k] * sample.depth[corners[k][0] * size + corners[k][1]];
      }
      depth[oi] = d;
      mask[oi] = sample.mask[sr * size + sc];
    } else {
      for (let ch = 0; ch < 3; ch++) {
        image[ch * size * size + oi] = sample.image[(ch * size + sr) * size + sc];
      }
      depth[oi] = sample.depth[sr * size + sc];
      mask[oi] = sample.mask[sr * size + sc];
    }
  };

  const outside = (r: number, c: number) => {
    const oi = r * size + c;
    for (let ch = 0; ch < 3; ch++) {
      image[ch * size * size + oi] = background ? background[ch * size * size + oi] : 0;
    }
    mask[oi] = 0;
    depth[oi] = 0;
  };

  if (isExactGridTransform(t)) {
    for (let r = 0; r < size; r++) {
      for (let c = 0; c < size; c++) {
        const [sr, sc] = gridSource(r, c, size, t);
        paint(r, c, sr, sc);
      }
    }
  } else {
    const center = (size - 1) / 2;
    const rad = (t.angle * Math.PI) / 180;
    const cos = Math.cos(rad);
    const sin = Math.sin(rad);
    for (let r = 0; r < size; r++) {
      for (let c = 0; c < size; c++) {
        // invert: undo translation, rotation, scale, then flip
        let x = c - center - t.tx;
        let y = r - center - t.ty;
        const ix = (cos * x + sin * y) / t.scale;
        const iy = (-sin * x + cos * y) / t.scale;
        x = t.flip ? -ix : ix;
        y = iy;
        const sc = x + center;
        const sr = y + center;
        if (sr < 0 || sc < 0 || sr > size - 1 || sc > size - 1) {
          outside(r, c);
          continue;
        }
        const r0 = Math.floor(sr);
        const c0 = Math.floor(sc);
        const r1 = Math.min(r0 + 1, size - 1);
        const c1 = Math.min(c0 + 1, size - 1);
        const fr = sr - r0;
        const fc = sc - c0;
        paint(r, c, Math.round(sr), Math.round(sc),
              [(1 - fr) * (1 - fc), (1 - fr) * fc, fr * (1 - fc), fr * fc],
              [[r0, c0], [r0, c1], [r1, c0], [r1, c1]]);
      }
    }
  }

  // background replacement composites the transformed object over the
  // background everywhere the transformed mask is empty
  if (background) {
    for (let r = 0; r < size; r++) {
      for (let c = 0; c < size; c++) {
        const oi = r * size + c;
        if (mask[oi] < 0.5) {
          for (let ch = 0; ch < 3; ch++) {
            image[ch * size * size + oi] = background[ch * size * size + oi];
          }
          depth[oi] = 0;
        }
      }
    }
  }
  return { image, mask, depth, size };
}

/** Emit `count` augmented (image, mask, depth) triples from the source set. */
export function augmentDataset(samples: Sample[], cfg: AugmentConfig,
                               count: number, seed = 0): Sample[] {
  if (samples.length === 0) throw new Error("need at least one sample");
  const rng = new Rng(seed ^ 0x9e3779b9);
  const out: Sample[] = [];
  for (let i = 0; i < count; i++) {
    const source = samples[rng.int(samples.length)];
    const transform = sampleTransform(cfg, rng);
    const background = cfg.backgrounds && cfg.backgrounds.length > 0
      ? cfg.backgrounds[rng.int(cfg.backgrounds.length)]
      : undefined;
    out.push(applyTransform(source, transform, background));
  }
  return out;
}
