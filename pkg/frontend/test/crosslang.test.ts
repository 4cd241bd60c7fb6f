/** Cross-language contract: the exported weight file drives the inference
 * runtime to the same forward outputs as this trainer (<= 1e-5 on 10
 * random inputs after export/reload). */

import { execFileSync } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { buildNetwork, netForward } from "../src/network.js";
import { Rng } from "../src/rng.js";
import { exportWeights } from "../src/weights.js";

const CHECK_SCRIPT = `
import json, sys
import numpy as np
from prden.denoiser import load_weights

weights_path, probes_path = sys.argv[1], sys.argv[2]
net = load_weights(weights_path)
with open(probes_path) as fh:
    probes = json.load(fh)
worst = 0.0
for rec in probes:
    z = np.array(rec["input"], dtype=np.float64)
    want = np.array(rec["output"], dtype=np.float64)
    got = net(z)
    worst = max(worst, float(np.max(np.abs(got - want))))
print(f"{worst:.3e}")
`;

describe("cross-language forward agreement", () => {
  it("runtime forward matches trainer forward to 1e-5 on 10 inputs", () => {
    const dir = mkdtempSync(join(tmpdir(), "prden-xl-"));
    const net = buildNetwork(16, 123, 1.5);
    // give every path nontrivial values, then round to f32 so the file
    // holds exactly what this side computed with
    const rng = new Rng(42);
    for (const [name, w] of net.weights) {
      if (name.startsWith("tail")) {
        for (let i = 0; i < w.length; i++) w[i] = Math.fround(0.05 * rng.gaussian());
      } else {
        for (let i = 0; i < w.length; i++) w[i] = Math.fround(w[i]);
      }
    }
    net.normMean = new Float64Array([Math.fround(0.1), Math.fround(-0.2)]);
    net.normScale = new Float64Array([Math.fround(0.9), Math.fround(1.2)]);
    const wPath = join(dir, "net.prdw");
    exportWeights(wPath, net);

    const probes: { input: number[]; output: number[] }[] = [];
    for (let t = 0; t < 10; t++) {
      const z = new Float64Array(32);
      for (let i = 0; i < z.length; i++) z[i] = rng.gaussian();
      const { out } = netForward(net, z, false);
      probes.push({ input: Array.from(z), output: Array.from(out) });
    }
    const pPath = join(dir, "probes.json");
    writeFileSync(pPath, JSON.stringify(probes));
    const stdout = execFileSync("python3", ["-c", CHECK_SCRIPT, wPath, pPath], {
      encoding: "utf-8",
    });
    const worst = parseFloat(stdout.trim());
    expect(worst).toBeLessThan(1e-5);
  });

  it("runtime rejects nothing about our header (inspect succeeds)", () => {
    const dir = mkdtempSync(join(tmpdir(), "prden-xl2-"));
    const net = buildNetwork(16, 7, 2.0);
    const wPath = join(dir, "id.prdw");
    exportWeights(wPath, net);
    const out = execFileSync("prden", ["inspect", wPath], { encoding: "utf-8" });
    expect(out).toContain("weights N=16 tensors=20");
    expect(out).toContain("sigma=2");
  });
});
