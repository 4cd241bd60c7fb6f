/** Finite-difference oracles for every hand-written backward pass. */

import { describe, expect, it } from "vitest";

import { matVec, resolventMatrix } from "../src/linalg.js";
import {
  buildNetwork,
  conv3x3,
  conv3x3Backward,
  netBackward,
  netForward,
  zeroLike,
} from "../src/network.js";
import { Rng } from "../src/rng.js";
import { unrollBackward, unrollForward, UnrollContext } from "../src/unroll.js";

function randArray(rng: Rng, n: number, scale = 1): Float64Array {
  const out = new Float64Array(n);
  for (let i = 0; i < n; i++) out[i] = scale * rng.gaussian();
  return out;
}

describe("conv3x3 gradients", () => {
  it("weight, bias, and input grads match central differences", () => {
    const rng = new Rng(1);
    const cIn = 3;
    const cOut = 2;
    const side = 4;
    const x = randArray(rng, cIn * side * side);
    const w = randArray(rng, cOut * cIn * 9, 0.5);
    const b = randArray(rng, cOut, 0.1);
    const probe = randArray(rng, cOut * side * side); // random linear functional
    const phi = (xv: Float64Array, wv: Float64Array, bv: Float64Array) => {
      const y = conv3x3(xv, cIn, side, wv, bv, cOut);
      let acc = 0;
      for (let i = 0; i < y.length; i++) acc += probe[i] * y[i];
      return acc;
    };
    const dW = new Float64Array(w.length);
    const dB = new Float64Array(b.length);
    const dX = conv3x3Backward(x, cIn, side, w, cOut, probe, dW, dB);
    const h = 1e-6;
    for (let t = 0; t < 20; t++) {
      const i = Math.floor(rng.next() * w.length);
      const wp = Float64Array.from(w);
      const wm = Float64Array.from(w);
      wp[i] += h;
      wm[i] -= h;
      const fd = (phi(x, wp, b) - phi(x, wm, b)) / (2 * h);
      expect(Math.abs(fd - dW[i])).toBeLessThan(1e-4 * Math.max(1, Math.abs(fd)));
    }
    for (let t = 0; t < 10; t++) {
      const i = Math.floor(rng.next() * x.length);
      const xp = Float64Array.from(x);
      const xm = Float64Array.from(x);
      xp[i] += h;
      xm[i] -= h;
      const fd = (phi(xp, w, b) - phi(xm, w, b)) / (2 * h);
      expect(Math.abs(fd - dX[i])).toBeLessThan(1e-4 * Math.max(1, Math.abs(fd)));
    }
    for (let i = 0; i < b.length; i++) {
      const bp = Float64Array.from(b);
      const bm = Float64Array.from(b);
      bp[i] += h;
      bm[i] -= h;
      const fd = (phi(x, w, bp) - phi(x, w, bm)) / (2 * h);
      expect(Math.abs(fd - dB[i])).toBeLessThan(1e-4 * Math.max(1, Math.abs(fd)));
    }
  });
});

describe("network gradients", () => {
  it("full net backward matches central differences on sampled weights", () => {
    const rng = new Rng(2);
    const net = buildNetwork(4, 7, 1.0); // side 2: smallest net
    net.normMean = new Float64Array([0.1, -0.2]);
    net.normScale = new Float64Array([0.8, 1.3]);
    const z = randArray(rng, 8);
    const probe = randArray(rng, 8);
    const phi = () => {
      const { out } = netForward(net, z, false);
      let acc = 0;
      for (let i = 0; i < out.length; i++) acc += probe[i] * out[i];
      return acc;
    };
    const grads = zeroLike(net);
    const { cache } = netForward(net, z, true);
    const dZ = netBackward(net, cache!, probe, grads);
    const h = 1e-6;
    const names = ["head.w", "block0.conv0.w", "block2.conv1.w", "tail.w", "block1.conv0.b", "tail.b"];
    for (const name of names) {
      const w = net.weights.get(name)!;
      const g = grads.get(name)!;
      for (let t = 0; t < 6; t++) {
        const i = Math.floor(rng.next() * w.length);
        const orig = w[i];
        w[i] = orig + h;
        const fp = phi();
        w[i] = orig - h;
        const fm = phi();
        w[i] = orig;
        const fd = (fp - fm) / (2 * h);
        expect(Math.abs(fd - g[i])).toBeLessThan(2e-4 * Math.max(1, Math.abs(fd)));
      }
    }
    for (let t = 0; t < 8; t++) {
      const i = Math.floor(rng.next() * z.length);
      const orig = z[i];
      z[i] = orig + h;
      const fp = phi();
      z[i] = orig - h;
      const fm = phi();
      z[i] = orig;
      const fd = (fp - fm) / (2 * h);
      expect(Math.abs(fd - dZ[i])).toBeLessThan(2e-4 * Math.max(1, Math.abs(fd)));
    }
  });
});

describe("unrolled iteration gradients", () => {
  it("backward through K steps matches central differences", () => {
    const rng = new Rng(3);
    const twoN = 8; // complex dim 4, side 2
    const rows = 12;
    const a = randArray(rng, rows * twoN);
    const sigma = 1.3;
    const b = resolventMatrix(a, rows, twoN, sigma);
    const ctx: UnrollContext = { b, twoN, sigma, k: 3 };
    const net = buildNetwork(4, 11, sigma);
    net.normMean = new Float64Array([0.05, -0.03]);
    net.normScale = new Float64Array([0.9, 1.1]);
    const c = randArray(rng, twoN);
    const target = randArray(rng, twoN);
    const loss = () => {
      const { estimate } = unrollForward(ctx, net, c, false);
      let acc = 0;
      for (let i = 0; i < twoN; i++) acc += 0.5 * (estimate[i] - target[i]) ** 2;
      return acc;
    };
    const grads = zeroLike(net);
    const { estimate, cache } = unrollForward(ctx, net, c, true);
    const dEst = new Float64Array(twoN);
    for (let i = 0; i < twoN; i++) dEst[i] = estimate[i] - target[i];
    unrollBackward(ctx, net, cache!, dEst, grads);
    const h = 1e-6;
    for (const name of ["head.w", "block0.conv1.w", "block3.conv0.w", "tail.w", "head.b"]) {
      const w = net.weights.get(name)!;
      const g = grads.get(name)!;
      for (let t = 0; t < 5; t++) {
        const i = Math.floor(rng.next() * w.length);
        const orig = w[i];
        w[i] = orig + h;
        const fp = loss();
        w[i] = orig - h;
        const fm = loss();
        w[i] = orig;
        const fd = (fp - fm) / (2 * h);
        expect(Math.abs(fd - g[i])).toBeLessThan(3e-4 * Math.max(1, Math.abs(fd)));
      }
    }
  });

  it("matVec agrees with a directly computed product", () => {
    const m = new Float64Array([1, 2, 3, 4, 5, 6]);
    const x = new Float64Array([1, -1]);
    const y = matVec(m, 3, 2, x);
    expect(Array.from(y)).toEqual([-1, -1, -1]);
  });
});
