/** The fixed residual denoiser and its hand-written backward pass.
 *
 * Architecture (must match the inference runtime exactly): per-channel
 * affine normalization, head 3x3 conv (2 -> 64), four residual blocks of
 * conv/relu/conv/relu with skip add (64 maps), tail 3x3 conv (64 -> 2),
 * global residual add in normalized space, denormalization. All convs are
 * cross-correlations, stride 1, zero padding 1. Math in float64.
 */

import { Rng } from "./rng.js";

export const N_BLOCKS = 4;
export const N_FEATURES = 64;

export interface TensorSpec {
  name: string;
  shape: number[];
}

export function canonicalTensors(features = N_FEATURES, blocks = N_BLOCKS): TensorSpec[] {
  const t: TensorSpec[] = [
    { name: "head.w", shape: [features, 2, 3, 3] },
    { name: "head.b", shape: [features] },
  ];
  for (let i = 0; i < blocks; i++) {
    for (let j = 0; j < 2; j++) {
      t.push({ name: `block${i}.conv${j}.w`, shape: [features, features, 3, 3] });
      t.push({ name: `block${i}.conv${j}.b`, shape: [features] });
    }
  }
  t.push({ name: "tail.w", shape: [2, features, 3, 3] });
  t.push({ name: "tail.b", shape: [2] });
  return t;
}

export interface Network {
  n: number; // complex dim; image side = sqrt(n)
  side: number;
  weights: Map<string, Float64Array>;
  normMean: Float64Array; // per channel (2)
  normScale: Float64Array;
  sigma: number;
}

export function buildNetwork(n: number, seed: number, sigma: number): Network {
  const side = Math.round(Math.sqrt(n));
  if (side * side !== n) throw new Error(`antenna count ${n} is not a perfect square`);
  const rng = new Rng(seed);
  const weights = new Map<string, Float64Array>();
  for (const { name, shape } of canonicalTensors()) {
    const size = shape.reduce((a, b) => a * b, 1);
    const data = new Float64Array(size);
    // damped He-normal for interior conv weights, zeros for biases and
    // for the tail (training starts from the identity map, and the
    // smaller feature scale keeps the first optimizer steps from
    // swinging the unrolled iteration)
    if (name.endsWith(".w") && !name.startsWith("tail")) {
      const fanIn = shape[1] * shape[2] * shape[3];
      const std = 0.5 * Math.sqrt(2 / fanIn);
      for (let i = 0; i < size; i++) data[i] = std * rng.gaussian();
    }
    weights.set(name, data);
  }
  return {
    n,
    side,
    weights,
    normMean: new Float64Array([0, 0]),
    normScale: new Float64Array([1, 1]),
    sigma,
  };
}

export function zeroLike(net: Network): Map<string, Float64Array> {
  const out = new Map<string, Float64Array>();
  for (const [k, v] of net.weights) out.set(k, new Float64Array(v.length));
  return out;
}

// padded-input workspace, grown on demand (single-threaded trainer)
let padBuf = new Float64Array(0);

/** 3x3 same-padding cross-correlation: x (ci, s, s) -> out (co, s, s). */
export function conv3x3(
  x: Float64Array,
  cIn: number,
  side: number,
  w: Float64Array,
  b: Float64Array,
  cOut: number,
  out?: Float64Array,
): Float64Array {
  const hw = side * side;
  const ps = side + 2;
  const phw = ps * ps;
  if (padBuf.length < cIn * phw) padBuf = new Float64Array(cIn * phw);
  const xp = padBuf;
  for (let ci = 0; ci < cIn; ci++) {
    const xBase = ci * hw;
    const pBase = ci * phw;
    xp.fill(0, pBase, pBase + ps);
    for (let i = 0; i < side; i++) {
      const rowP = pBase + (i + 1) * ps;
      xp[rowP] = 0;
      const rowX = xBase + i * side;
      for (let j = 0; j < side; j++) xp[rowP + 1 + j] = x[rowX + j];
      xp[rowP + side + 1] = 0;
    }
    xp.fill(0, pBase + (side + 1) * ps, pBase + phw);
  }
  const y = out ?? new Float64Array(cOut * hw);
  for (let co = 0; co < cOut; co++) {
    y.fill(b[co], co * hw, (co + 1) * hw);
    for (let ci = 0; ci < cIn; ci++) {
      const wBase = (co * cIn + ci) * 9;
      const w00 = w[wBase], w01 = w[wBase + 1], w02 = w[wBase + 2];
      const w10 = w[wBase + 3], w11 = w[wBase + 4], w12 = w[wBase + 5];
      const w20 = w[wBase + 6], w21 = w[wBase + 7], w22 = w[wBase + 8];
      const pBase = ci * phw;
      for (let i = 0; i < side; i++) {
        const r0 = pBase + i * ps;
        const r1 = r0 + ps;
        const r2 = r1 + ps;
        const rowO = co * hw + i * side;
        for (let j = 0; j < side; j++) {
          y[rowO + j] +=
            w00 * xp[r0 + j] + w01 * xp[r0 + j + 1] + w02 * xp[r0 + j + 2] +
            w10 * xp[r1 + j] + w11 * xp[r1 + j + 1] + w12 * xp[r1 + j + 2] +
            w20 * xp[r2 + j] + w21 * xp[r2 + j + 1] + w22 * xp[r2 + j + 2];
        }
      }
    }
  }
  return y;
}

/** Gradients of conv3x3: fills dW, dB and returns dX. */
export function conv3x3Backward(
  x: Float64Array,
  cIn: number,
  side: number,
  w: Float64Array,
  cOut: number,
  dY: Float64Array,
  dW: Float64Array,
  dB: Float64Array,
): Float64Array {
  const hw = side * side;
  const dX = new Float64Array(cIn * hw);
  for (let co = 0; co < cOut; co++) {
    let bAcc = 0;
    const yBase = co * hw;
    for (let k = 0; k < hw; k++) bAcc += dY[yBase + k];
    dB[co] += bAcc;
    for (let ci = 0; ci < cIn; ci++) {
      const wBase = (co * cIn + ci) * 9;
      const xBase = ci * hw;
      for (let a = 0; a < 3; a++) {
        for (let bb = 0; bb < 3; bb++) {
          // dW[a,b] = sum_{i,j} dY[i,j] * x[i+a-1, j+b-1]
          let acc = 0;
          const di = a - 1;
          const dj = bb - 1;
          const i0 = Math.max(0, -di);
          const i1 = Math.min(side, side - di);
          for (let i = i0; i < i1; i++) {
            const rowY = yBase + i * side;
            const rowX = xBase + (i + di) * side;
            const j0 = Math.max(0, -dj);
            const j1 = Math.min(side, side - dj);
            for (let j = j0; j < j1; j++) acc += dY[rowY + j] * x[rowX + j + dj];
          }
          dW[wBase + a * 3 + bb] += acc;
          // dX[i+a-1, j+b-1] += dY[i,j] * w[a,b]
          const wv = w[wBase + a * 3 + bb];
          if (wv !== 0) {
            for (let i = i0; i < i1; i++) {
              const rowY = yBase + i * side;
              const rowX = xBase + (i + di) * side;
              const j0 = Math.max(0, -dj);
              const j1 = Math.min(side, side - dj);
              for (let j = j0; j < j1; j++) dX[rowX + j + dj] += dY[rowY + j] * wv;
            }
          }
        }
      }
    }
  }
  return dX;
}

export interface ForwardCache {
  un: Float64Array; // normalized input planes
  blockInputs: Float64Array[]; // v entering each block
  pre: Float64Array[]; // pre-relu activations, two per block
  act: Float64Array[]; // post-relu activations, two per block
  vFinal: Float64Array;
}

/** Forward pass on a length-2n embedding; optionally keeps the cache. */
export function netForward(
  net: Network,
  z: Float64Array,
  keepCache: boolean,
): { out: Float64Array; cache: ForwardCache | null } {
  const { side, weights, normMean, normScale } = net;
  const hw = side * side;
  const un = new Float64Array(2 * hw);
  for (let c = 0; c < 2; c++) {
    const m = normMean[c];
    const s = normScale[c];
    for (let k = 0; k < hw; k++) un[c * hw + k] = (z[c * hw + k] - m) / s;
  }
  let v = conv3x3(un, 2, side, weights.get("head.w")!, weights.get("head.b")!, N_FEATURES);
  const blockInputs: Float64Array[] = [];
  const pre: Float64Array[] = [];
  const act: Float64Array[] = [];
  for (let i = 0; i < N_BLOCKS; i++) {
    if (keepCache) blockInputs.push(v);
    const p1 = conv3x3(
      v, N_FEATURES, side,
      weights.get(`block${i}.conv0.w`)!, weights.get(`block${i}.conv0.b`)!, N_FEATURES,
    );
    const a1 = new Float64Array(p1.length);
    for (let k = 0; k < p1.length; k++) a1[k] = p1[k] > 0 ? p1[k] : 0;
    const p2 = conv3x3(
      a1, N_FEATURES, side,
      weights.get(`block${i}.conv1.w`)!, weights.get(`block${i}.conv1.b`)!, N_FEATURES,
    );
    const a2 = new Float64Array(p2.length);
    for (let k = 0; k < p2.length; k++) a2[k] = p2[k] > 0 ? p2[k] : 0;
    const vNext = new Float64Array(v.length);
    for (let k = 0; k < v.length; k++) vNext[k] = v[k] + a2[k];
    if (keepCache) {
      pre.push(p1, p2);
      act.push(a1, a2);
    }
    v = vNext;
  }
  const tail = conv3x3(v, N_FEATURES, side, weights.get("tail.w")!, weights.get("tail.b")!, 2);
  const out = new Float64Array(2 * hw);
  for (let c = 0; c < 2; c++) {
    const m = normMean[c];
    const s = normScale[c];
    for (let k = 0; k < hw; k++) {
      out[c * hw + k] = (un[c * hw + k] + tail[c * hw + k]) * s + m;
    }
  }
  const cache = keepCache ? { un, blockInputs, pre, act, vFinal: v } : null;
  return { out, cache };
}

/** Backward pass: accumulates weight grads into `grads`, returns dz. */
export function netBackward(
  net: Network,
  cache: ForwardCache,
  dOut: Float64Array,
  grads: Map<string, Float64Array>,
): Float64Array {
  const { side, weights, normScale } = net;
  const hw = side * side;
  // out = (un + tail) * s + m: d(un-path) = dOut * s on both branches
  const dSum = new Float64Array(2 * hw);
  for (let c = 0; c < 2; c++) {
    const s = normScale[c];
    for (let k = 0; k < hw; k++) dSum[c * hw + k] = dOut[c * hw + k] * s;
  }
  // tail conv
  let dV = conv3x3Backward(
    cache.vFinal, N_FEATURES, side, weights.get("tail.w")!, 2, dSum,
    grads.get("tail.w")!, grads.get("tail.b")!,
  );
  // blocks in reverse
  for (let i = N_BLOCKS - 1; i >= 0; i--) {
    const dA2 = dV; // skip add passes dV to both branches
    const p2 = cache.pre[2 * i + 1];
    const dP2 = new Float64Array(dA2.length);
    for (let k = 0; k < dA2.length; k++) dP2[k] = p2[k] > 0 ? dA2[k] : 0;
    const dA1 = conv3x3Backward(
      cache.act[2 * i], N_FEATURES, side, weights.get(`block${i}.conv1.w`)!, N_FEATURES, dP2,
      grads.get(`block${i}.conv1.w`)!, grads.get(`block${i}.conv1.b`)!,
    );
    const p1 = cache.pre[2 * i];
    const dP1 = new Float64Array(dA1.length);
    for (let k = 0; k < dA1.length; k++) dP1[k] = p1[k] > 0 ? dA1[k] : 0;
    const dIn = conv3x3Backward(
      cache.blockInputs[i], N_FEATURES, side, weights.get(`block${i}.conv0.w`)!, N_FEATURES, dP1,
      grads.get(`block${i}.conv0.w`)!, grads.get(`block${i}.conv0.b`)!,
    );
    const merged = new Float64Array(dV.length);
    for (let k = 0; k < dV.length; k++) merged[k] = dV[k] + dIn[k];
    dV = merged;
  }
  // head conv
  const dUnFromHead = conv3x3Backward(
    cache.un, 2, side, weights.get("head.w")!, N_FEATURES, dV,
    grads.get("head.w")!, grads.get("head.b")!,
  );
  // un = (z - m)/s; both the global-residual branch (dSum) and the head
  // branch reach un, then dz = dUn / s
  const dZ = new Float64Array(2 * hw);
  for (let c = 0; c < 2; c++) {
    const s = normScale[c];
    for (let k = 0; k < hw; k++) {
      dZ[c * hw + k] = (dSum[c * hw + k] + dUnFromHead[c * hw + k]) / s;
    }
  }
  return dZ;
}
