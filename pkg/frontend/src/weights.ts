/** PRDW weight-file writer (and a reader used for the export self-check).
 *
 * Layout: magic "PRDW" | version u32=1 | N u32 | tensor_count u32 |
 * per tensor: name_len u16 | name utf-8 | rank u8 | dims u32 x rank |
 * f32 data row-major | trailer: sigma f64 | norm_mean f32 x 2 |
 * norm_scale f32 x 2. Tensors are written in canonical order but loaders
 * key by name.
 */

import { readFileSync, writeFileSync } from "node:fs";

import { canonicalTensors, Network } from "./network.js";

export function exportWeights(path: string, net: Network): void {
  if (!net.normMean || !net.normScale || net.normMean.length !== 2 || net.normScale.length !== 2) {
    throw new Error("export refused: normalization constants missing");
  }
  for (const s of net.normScale) {
    if (!Number.isFinite(s) || s === 0) {
      throw new Error(`export refused: bad normalization scale ${s}`);
    }
  }
  const specs = canonicalTensors();
  const chunks: Buffer[] = [];
  const head = Buffer.alloc(16);
  head.write("PRDW", 0, "latin1");
  head.writeUInt32LE(1, 4);
  head.writeUInt32LE(net.n, 8);
  head.writeUInt32LE(specs.length, 12);
  chunks.push(head);
  for (const { name, shape } of specs) {
    const data = net.weights.get(name);
    if (!data) throw new Error(`export refused: tensor ${name} missing`);
    const size = shape.reduce((a, b) => a * b, 1);
    if (data.length !== size) {
      throw new Error(`export refused: tensor ${name} has ${data.length} values, expected ${size}`);
    }
    const nameBuf = Buffer.from(name, "utf-8");
    const meta = Buffer.alloc(2 + nameBuf.length + 1 + 4 * shape.length);
    meta.writeUInt16LE(nameBuf.length, 0);
    nameBuf.copy(meta, 2);
    meta.writeUInt8(shape.length, 2 + nameBuf.length);
    shape.forEach((d, k) => meta.writeUInt32LE(d, 2 + nameBuf.length + 1 + 4 * k));
    chunks.push(meta);
    const blob = Buffer.alloc(4 * size);
    for (let i = 0; i < size; i++) blob.writeFloatLE(Math.fround(data[i]), 4 * i);
    chunks.push(blob);
  }
  const trailer = Buffer.alloc(8 + 8 + 8);
  trailer.writeDoubleLE(net.sigma, 0);
  trailer.writeFloatLE(Math.fround(net.normMean[0]), 8);
  trailer.writeFloatLE(Math.fround(net.normMean[1]), 12);
  trailer.writeFloatLE(Math.fround(net.normScale[0]), 16);
  trailer.writeFloatLE(Math.fround(net.normScale[1]), 20);
  chunks.push(trailer);
  writeFileSync(path, Buffer.concat(chunks));
}

export interface LoadedWeights {
  n: number;
  sigma: number;
  normMean: Float64Array;
  normScale: Float64Array;
  tensors: Map<string, { shape: number[]; data: Float64Array }>;
}

export function readWeights(path: string): LoadedWeights {
  const buf = readFileSync(path);
  if (buf.toString("latin1", 0, 4) !== "PRDW") throw new Error(`${path}: bad magic`);
  if (buf.readUInt32LE(4) !== 1) throw new Error(`${path}: bad version`);
  const n = buf.readUInt32LE(8);
  const count = buf.readUInt32LE(12);
  let off = 16;
  const tensors = new Map<string, { shape: number[]; data: Float64Array }>();
  for (let t = 0; t < count; t++) {
    const nameLen = buf.readUInt16LE(off);
    off += 2;
    const name = buf.toString("utf-8", off, off + nameLen);
    off += nameLen;
    const rank = buf.readUInt8(off);
    off += 1;
    const shape: number[] = [];
    for (let k = 0; k < rank; k++) {
      shape.push(buf.readUInt32LE(off));
      off += 4;
    }
    const size = shape.reduce((a, b) => a * b, 1);
    const data = new Float64Array(size);
    for (let i = 0; i < size; i++) data[i] = buf.readFloatLE(off + 4 * i);
    off += 4 * size;
    tensors.set(name, { shape, data });
  }
  const sigma = buf.readDoubleLE(off);
  const normMean = new Float64Array([buf.readFloatLE(off + 8), buf.readFloatLE(off + 12)]);
  const normScale = new Float64Array([buf.readFloatLE(off + 16), buf.readFloatLE(off + 20)]);
  if (off + 24 !== buf.length) throw new Error(`${path}: trailing bytes`);
  return { n, sigma, normMean, normScale, tensors };
}
