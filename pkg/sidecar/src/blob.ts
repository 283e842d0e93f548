/** Wire blob codec: base64 of little-endian float32, row-major.
 *
 * Outgoing blobs canonicalize negative zero to positive zero so that
 * mathematically identical pipelines are also bit-identical on the wire.
 */

export class BlobError extends Error {}

export function encodeF32(values: ArrayLike<number>): string {
  const arr = new Float32Array(values.length);
  for (let i = 0; i < values.length; i++) {
    const v = values[i];
    arr[i] = v === 0 ? 0 : v;
  }
  return Buffer.from(arr.buffer, arr.byteOffset, arr.byteLength).toString("base64");
}

export function decodeF32(blobB64: string, expectedLength: number,
                          field = "blob"): Float32Array {
  const raw = Buffer.from(blobB64, "base64");
  if (raw.length !== expectedLength * 4) {
    throw new BlobError(
      `${field} length mismatch: got ${raw.length} bytes, ` +
      `expected ${expectedLength * 4}`);
  }
  const out = new Float32Array(expectedLength);
  for (let i = 0; i < expectedLength; i++) out[i] = raw.readFloatLE(i * 4);
  return out;
}

export function shapeSize(shape: number[]): number {
  return shape.reduce((a, b) => a * b, 1);
}
