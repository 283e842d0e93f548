/** Monocular depth prediction behind one pluggable function.
 *
 * The built-in "luma" predictor is a deterministic stand-in (blurred
 * luminance, bright-is-near); an external model plugs in as a callable.
 * Output follows the pipeline convention: values in [0, 1], near = 1,
 * resolution equal to the input.
 */

export class PredictorUnavailable extends Error {}

export type DepthPredictor = (image: Float64Array, size: number) => Float64Array;

export function lumaPredictor(blurRadius = 2): DepthPredictor {
  return (image, size) => {
    const luma = new Float64Array(size * size);
    for (let p = 0; p < size * size; p++) {
      luma[p] = 0.299 * image[p] + 0.587 * image[size * size + p] +
        0.114 * image[2 * size * size + p];
    }
    const blurred = boxBlur(luma, size, blurRadius);
    let min = Infinity;
    let max = -Infinity;
    for (const v of blurred) {
      if (v < min) min = v;
      if (v > max) max = v;
    }
    if (max === min) {
      blurred.fill(0.5);
      return blurred;
    }
    for (let i = 0; i < blurred.length; i++) {
      blurred[i] = (blurred[i] - min) / (max - min);
    }
    return blurred;
  };
}

function boxBlur(values: Float64Array, size: number, radius: number): Float64Array {
  if (radius <= 0) return Float64Array.from(values);
  const out = new Float64Array(size * size);
  for (let r = 0; r < size; r++) {
    for (let c = 0; c < size; c++) {
      let s = 0;
      let n = 0;
      for (let dr = -radius; dr <= radius; dr++) {
        const rr = Math.min(Math.max(r + dr, 0), size - 1);
        for (let dc = -radius; dc <= radius; dc++) {
          const cc = Math.min(Math.max(c + dc, 0), size - 1);
          s += values[rr * size + cc];
          n += 1;
        }
      }
      out[r * size + c] = s / n;
    }
  }
  return out;
}

const BUILTINS: Record<string, () => DepthPredictor> = {
  luma: () => lumaPredictor(),
};

export function resolvePredictor(kind: string): DepthPredictor {
  const found = BUILTINS[kind];
  if (!found) {
    throw new PredictorUnavailable(
      `no depth predictor named ${JSON.stringify(kind)}`);
  }
  return found();
}

export function predictDepth(image: Float64Array, size: number,
                             predictor: DepthPredictor | string = "luma"): Float64Array {
  const fn = typeof predictor === "string" ? resolvePredictor(predictor) : predictor;
  const out = fn(image, size);
  if (out.length !== size * size) {
    throw new PredictorUnavailable("predictor returned wrong resolution");
  }
  return out;
}
