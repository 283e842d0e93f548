/** Dense row-major Float64 matrix helpers for the tiny backbone.
 *
 * Shapes are tracked by the callers; these are plain loops, fast enough for
 * a 320-wide single-block model and fully deterministic.
 */

export type Mat = Float64Array;

export function zeros(n: number): Mat {
  return new Float64Array(n);
}

/** C = A(n x k) * B(k x m) */
export function matmul(a: Mat, b: Mat, n: number, k: number, m: number): Mat {
  const c = new Float64Array(n * m);
  for (let i = 0; i < n; i++) {
    for (let p = 0; p < k; p++) {
      const av = a[i * k + p];
      if (av === 0) continue;
      const bRow = p * m;
      const cRow = i * m;
      for (let j = 0; j < m; j++) c[cRow + j] += av * b[bRow + j];
    }
  }
  return c;
}

/** C = A^T(k x n -> n x k) * B(k x m): a is (k x n) stored row-major. */
export function matmulTa(a: Mat, b: Mat, k: number, n: number, m: number): Mat {
  const c = new Float64Array(n * m);
  for (let p = 0; p < k; p++) {
    const aRow = p * n;
    const bRow = p * m;
    for (let i = 0; i < n; i++) {
      const av = a[aRow + i];
      if (av === 0) continue;
      const cRow = i * m;
      for (let j = 0; j < m; j++) c[cRow + j] += av * b[bRow + j];
    }
  }
  return c;
}

/** C = A(n x k) * B^T(m x k -> k x m): b is (m x k) stored row-major. */
export function matmulTb(a: Mat, b: Mat, n: number, k: number, m: number): Mat {
  const c = new Float64Array(n * m);
  for (let i = 0; i < n; i++) {
    const aRow = i * k;
    for (let j = 0; j < m; j++) {
      const bRow = j * k;
      let s = 0;
      for (let p = 0; p < k; p++) s += a[aRow + p] * b[bRow + p];
      c[i * m + j] = s;
    }
  }
  return c;
}

export function addInPlace(a: Mat, b: Mat, scale = 1.0): void {
  for (let i = 0; i < a.length; i++) a[i] += scale * b[i];
}

export function scaleInPlace(a: Mat, s: number): void {
  for (let i = 0; i < a.length; i++) a[i] *= s;
}

/** Row-wise softmax of an (n x m) matrix, in place. */
export function softmaxRows(s: Mat, n: number, m: number): void {
  for (let i = 0; i < n; i++) {
    const row = i * m;
    let max = -Infinity;
    for (let j = 0; j < m; j++) if (s[row + j] > max) max = s[row + j];
    let sum = 0;
    for (let j = 0; j < m; j++) {
      const e = Math.exp(s[row + j] - max);
      s[row + j] = e;
      sum += e;
    }
    for (let j = 0; j < m; j++) s[row + j] /= sum;
  }
}

/** Backward of row-wise softmax: given P and dP, returns dS. */
export function softmaxRowsBackward(p: Mat, dp: Mat, n: number, m: number): Mat {
  const ds = new Float64Array(n * m);
  for (let i = 0; i < n; i++) {
    const row = i * m;
    let dot = 0;
    for (let j = 0; j < m; j++) dot += dp[row + j] * p[row + j];
    for (let j = 0; j < m; j++) ds[row + j] = (dp[row + j] - dot) * p[row + j];
  }
  return ds;
}
