/** Reader for PRDN dataset files (little-endian).
 *
 * Layout: magic "PRDN" | version u32=1 | N u32 | M u32 | n_samples u32 |
 * flags u32 | Re(A) f64 MxN | Im(A) f64 MxN | per sample: h f64 2N |
 * y f64 2M | snr_db f64. The real-form operator is the 2M x 2N block
 * matrix [[Re, -Im], [Im, Re]].
 */

import { readFileSync } from "node:fs";

export interface PrdnDataset {
  n: number; // complex dims
  m: number;
  nSamples: number;
  flags: number;
  aReal: Float64Array; // (2M x 2N) row-major
  h: Float64Array[]; // each 2N
  y: Float64Array[]; // each 2M
  snrDb: Float64Array;
}

export function readDataset(path: string): PrdnDataset {
  const buf = readFileSync(path);
  if (buf.length < 24) throw new Error(`${path}: truncated header`);
  const magic = buf.toString("latin1", 0, 4);
  if (magic !== "PRDN") throw new Error(`${path}: bad magic ${JSON.stringify(magic)}`);
  const dv = new DataView(buf.buffer, buf.byteOffset, buf.byteLength);
  const version = dv.getUint32(4, true);
  if (version !== 1) throw new Error(`${path}: unsupported version ${version}`);
  const n = dv.getUint32(8, true);
  const m = dv.getUint32(12, true);
  const nSamples = dv.getUint32(16, true);
  const flags = dv.getUint32(20, true);
  const expect = 24 + 2 * m * n * 8 + nSamples * (2 * n + 2 * m + 1) * 8;
  if (buf.length !== expect) {
    throw new Error(`${path}: size ${buf.length} != predicted ${expect}`);
  }
  const f64 = (offset: number, count: number): Float64Array => {
    const out = new Float64Array(count);
    for (let i = 0; i < count; i++) out[i] = dv.getFloat64(offset + 8 * i, true);
    return out;
  };
  let off = 24;
  const aRe = f64(off, m * n);
  off += m * n * 8;
  const aIm = f64(off, m * n);
  off += m * n * 8;
  // assemble [[Re, -Im], [Im, Re]]
  const rows = 2 * m;
  const cols = 2 * n;
  const aReal = new Float64Array(rows * cols);
  for (let r = 0; r < m; r++) {
    for (let c = 0; c < n; c++) {
      const re = aRe[r * n + c];
      const im = aIm[r * n + c];
      aReal[r * cols + c] = re;
      aReal[r * cols + n + c] = -im;
      aReal[(m + r) * cols + c] = im;
      aReal[(m + r) * cols + n + c] = re;
    }
  }
  const h: Float64Array[] = [];
  const y: Float64Array[] = [];
  const snrDb = new Float64Array(nSamples);
  for (let i = 0; i < nSamples; i++) {
    h.push(f64(off, 2 * n));
    off += 2 * n * 8;
    y.push(f64(off, 2 * m));
    off += 2 * m * 8;
    snrDb[i] = dv.getFloat64(off, true);
    off += 8;
  }
  return { n, m, nSamples, flags, aReal, h, y, snrDb };
}
