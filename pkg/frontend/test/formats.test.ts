/** PRDN reading against the estimator CLI's writer, and PRDW export. */

import { execFileSync } from "node:child_process";
import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { beforeAll, describe, expect, it } from "vitest";

import { readDataset } from "../src/dataset.js";
import { matVec, resolventMatrix } from "../src/linalg.js";
import { buildNetwork, netForward } from "../src/network.js";
import { Rng } from "../src/rng.js";
import { exportWeights, readWeights } from "../src/weights.js";

let dir: string;
let dsPath: string;

beforeAll(() => {
  dir = mkdtempSync(join(tmpdir(), "prden-ts-"));
  dsPath = join(dir, "small.prdn");
  execFileSync("prden", [
    "generate", "--out", dsPath, "--samples", "6", "--snr", "10", "--seed", "11",
    "--n-antennas", "16", "--n-upas", "4", "--p-slots", "8", "--n-rf", "2",
  ]);
});

describe("PRDN reader", () => {
  it("parses the header and shapes", () => {
    const ds = readDataset(dsPath);
    expect(ds.n).toBe(16);
    expect(ds.m).toBe(16);
    expect(ds.nSamples).toBe(6);
    expect(ds.h[0].length).toBe(32);
    expect(ds.y[0].length).toBe(32);
    expect(ds.snrDb[0]).toBe(10);
  });

  it("real-form operator reproduces the stored measurements on noiseless data", () => {
    const clean = join(dir, "clean.prdn");
    execFileSync("prden", [
      "generate", "--out", clean, "--samples", "2", "--snr", "inf", "--seed", "4",
      "--n-antennas", "16", "--n-upas", "4", "--p-slots", "8", "--n-rf", "2",
    ]);
    const ds = readDataset(clean);
    for (let i = 0; i < ds.nSamples; i++) {
      const yHat = matVec(ds.aReal, 2 * ds.m, 2 * ds.n, ds.h[i]);
      let worst = 0;
      for (let k = 0; k < yHat.length; k++) worst = Math.max(worst, Math.abs(yHat[k] - ds.y[i][k]));
      expect(worst).toBeLessThan(1e-12);
    }
  });

  it("rejects a truncated file", () => {
    const raw = readFileSync(dsPath);
    const bad = join(dir, "bad.prdn");
    writeFileSync(bad, raw.subarray(0, raw.length - 8));
    expect(() => readDataset(bad)).toThrow(/size/);
  });
});

describe("PRDW export", () => {
  it("round-trips through its own reader bit-identically after f32 rounding", () => {
    const net = buildNetwork(16, 5, 1.25);
    // make all values exactly f32-representable so reload is exact
    for (const [, w] of net.weights) {
      for (let i = 0; i < w.length; i++) w[i] = Math.fround(w[i]);
    }
    net.normMean = new Float64Array([0.25, -0.5]);
    net.normScale = new Float64Array([1.5, 0.75]);
    const path = join(dir, "w.prdw");
    exportWeights(path, net);
    const back = readWeights(path);
    expect(back.n).toBe(16);
    expect(back.sigma).toBe(1.25);
    expect(Array.from(back.normMean)).toEqual([0.25, -0.5]);
    for (const [name, w] of net.weights) {
      const got = back.tensors.get(name)!;
      expect(got).toBeDefined();
      expect(Array.from(got.data)).toEqual(Array.from(w));
    }
  });

  it("refuses to export without normalization constants", () => {
    const net = buildNetwork(16, 5, 1.0);
    (net as any).normScale = new Float64Array([1.0, 0.0]);
    expect(() => exportWeights(join(dir, "x.prdw"), net)).toThrow(/normalization/);
  });

  it("zero-tail initial network is the exact identity", () => {
    const net = buildNetwork(16, 9, 1.0);
    const rng = new Rng(0);
    const z = new Float64Array(32);
    for (let i = 0; i < z.length; i++) z[i] = rng.gaussian();
    const { out } = netForward(net, z, false);
    expect(Array.from(out)).toEqual(Array.from(z));
  });

  it("resolvent inverse solves the regularized normal equations", () => {
    const rng = new Rng(8);
    const rows = 10;
    const cols = 6;
    const a = new Float64Array(rows * cols);
    for (let i = 0; i < a.length; i++) a[i] = rng.gaussian();
    const sigma = 0.7;
    const b = resolventMatrix(a, rows, cols, sigma);
    // (A^T A + sigma I) b = I
    for (let col = 0; col < cols; col++) {
      const e = new Float64Array(cols);
      for (let r = 0; r < cols; r++) e[r] = b[r * cols + col];
      // g e should be the unit vector
      const ge = new Float64Array(cols);
      for (let r = 0; r < rows; r++) {
        let av = 0;
        for (let c2 = 0; c2 < cols; c2++) av += a[r * cols + c2] * e[c2];
        for (let c2 = 0; c2 < cols; c2++) ge[c2] += a[r * cols + c2] * av;
      }
      for (let r = 0; r < cols; r++) ge[r] += sigma * e[r];
      for (let r = 0; r < cols; r++) {
        expect(Math.abs(ge[r] - (r === col ? 1 : 0))).toBeLessThan(1e-9);
      }
    }
  });
});
