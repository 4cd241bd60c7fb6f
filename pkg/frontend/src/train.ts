/** Training loop: Adam on the unrolled iteration's MSE against the true
 * channel.
 *
 * Data is rescaled so the channel entries have unit RMS (gradients at the
 * raw physical scale ~1e-5 would drown in Adam's epsilon); the rescale is
 * exactly absorbed into the exported normalization constants, so the
 * weight file operates on raw embeddings. Normalization statistics are
 * measured per channel from the identity-start prox inputs. The tail conv
 * starts at zero, so epoch 0 reproduces the identity-denoiser iteration
 * exactly.
 */

import { appendFileSync, writeFileSync } from "node:fs";

import { PrdnDataset, readDataset } from "./dataset.js";
import { matTVec, nmseDb, norm2, resolventMatrix } from "./linalg.js";
import { buildNetwork, netForward, Network, zeroLike } from "./network.js";
import { Rng } from "./rng.js";
import { unrollBackward, unrollForward, UnrollContext } from "./unroll.js";
import { exportWeights } from "./weights.js";

export interface TrainConfig {
  trainDataset: string;
  valDataset: string;
  outWeights: string;
  epochs: number; // default 150
  batchSize: number; // default 128
  learningRate: number; // default 1e-3 (Adam)
  unrollK: number; // default 8, must be >= 1
  sigma: number;
  seed: number;
  logPath?: string;
  valEvery?: number; // epochs between val passes (default 1)
  keepBest?: boolean; // export the best-validation epoch (default true)
}

export const DEFAULTS = {
  epochs: 150,
  batchSize: 128,
  learningRate: 1e-3,
  unrollK: 8,
  sigma: 1.0,
  seed: 0,
  valEvery: 1,
};

export interface EpochLog {
  epoch: number;
  trainLoss: number;
  valNmseDb: number;
  lipschitz: number;
  seconds: number;
}

export interface TrainResult {
  net: Network;
  scale: number; // RMS rescale factor applied to the data
  log: EpochLog[];
  identityValNmseDb: number; // val NMSE of the identity-start iteration
  bestValNmseDb: number;
  bestEpoch: number;
}

class Adam {
  private m: Map<string, Float64Array>;
  private v: Map<string, Float64Array>;
  private t = 0;

  constructor(
    private net: Network,
    private lr: number,
    private warmupSteps: number,
    private beta1 = 0.9,
    private beta2 = 0.999,
    private eps = 1e-8,
  ) {
    this.m = zeroLike(net);
    this.v = zeroLike(net);
  }

  step(grads: Map<string, Float64Array>): void {
    this.t += 1;
    // linear warmup keeps early coherent tail updates from swinging the
    // unrolled iteration out of its contractive regime
    const warm = this.warmupSteps > 0 ? Math.min(1, this.t / this.warmupSteps) : 1;
    const lr = this.lr * warm;
    const c1 = 1 - Math.pow(this.beta1, this.t);
    const c2 = 1 - Math.pow(this.beta2, this.t);
    for (const [name, w] of this.net.weights) {
      const g = grads.get(name)!;
      const m = this.m.get(name)!;
      const v = this.v.get(name)!;
      for (let i = 0; i < w.length; i++) {
        m[i] = this.beta1 * m[i] + (1 - this.beta1) * g[i];
        v[i] = this.beta2 * v[i] + (1 - this.beta2) * g[i] * g[i];
        w[i] -= (lr * (m[i] / c1)) / (Math.sqrt(v[i] / c2) + this.eps);
      }
    }
  }
}

function rmsScale(ds: PrdnDataset): number {
  let acc = 0;
  let count = 0;
  for (const h of ds.h) {
    for (let i = 0; i < h.length; i++) acc += h[i] * h[i];
    count += h.length;
  }
  const rms = Math.sqrt(acc / Math.max(count, 1));
  if (rms === 0) throw new Error("training channels are identically zero");
  return rms;
}

/** c_i = B A^T y_i for every sample, in rescaled units. */
function precomputeC(ds: PrdnDataset, b: Float64Array, scale: number): Float64Array[] {
  const rows = 2 * ds.m;
  const cols = 2 * ds.n;
  const out: Float64Array[] = [];
  for (const y of ds.y) {
    const ys = Float64Array.from(y, (v) => v / scale);
    const aty = matTVec(ds.aReal, rows, cols, ys);
    const c = new Float64Array(cols);
    for (let r = 0; r < cols; r++) {
      let acc = 0;
      const base = r * cols;
      for (let k = 0; k < cols; k++) acc += b[base + k] * aty[k];
      c[r] = acc;
    }
    out.push(c);
  }
  return out;
}

/** Per-channel mean/std of the identity-start prox inputs u = 2 c. */
function measureNormalization(net: Network, cs: Float64Array[], maxSamples = 256): void {
  const hw = net.side * net.side;
  const mean = [0, 0];
  const sq = [0, 0];
  let count = 0;
  for (const c of cs.slice(0, maxSamples)) {
    for (let ch = 0; ch < 2; ch++) {
      for (let k = 0; k < hw; k++) {
        const v = 2 * c[ch * hw + k];
        mean[ch] += v;
        sq[ch] += v * v;
      }
    }
    count += hw;
  }
  for (let ch = 0; ch < 2; ch++) {
    const m = mean[ch] / count;
    const variance = Math.max(sq[ch] / count - m * m, 1e-24);
    net.normMean[ch] = m;
    net.normScale[ch] = Math.sqrt(variance);
  }
}

export function empiricalLipschitz(net: Network, nPairs: number, seed: number): number {
  const rng = new Rng(seed);
  const len = 2 * net.n;
  let worst = 0;
  for (let t = 0; t < nPairs; t++) {
    const z1 = new Float64Array(len);
    const z2 = new Float64Array(len);
    for (let i = 0; i < len; i++) {
      z1[i] = rng.gaussian();
      z2[i] = z1[i] + 0.1 * rng.gaussian();
    }
    const d1 = netForward(net, z1, false).out;
    const d2 = netForward(net, z2, false).out;
    let num = 0;
    let den = 0;
    for (let i = 0; i < len; i++) {
      num += (d1[i] - d2[i]) ** 2;
      den += (z1[i] - z2[i]) ** 2;
    }
    if (den > 0) worst = Math.max(worst, Math.sqrt(num / den));
  }
  return worst;
}

function valNmse(
  ctx: UnrollContext,
  net: Network,
  cs: Float64Array[],
  hs: Float64Array[],
  scale: number,
): number {
  let acc = 0;
  for (let i = 0; i < cs.length; i++) {
    const est = unrollForward(ctx, net, cs[i], false).estimate;
    const hScaled = Float64Array.from(hs[i], (v) => v / scale);
    acc += nmseDb(hScaled, est);
  }
  return acc / cs.length;
}

export function train(cfg: TrainConfig, quiet = false): TrainResult {
  if (cfg.unrollK < 1) throw new Error(`unrollK must be >= 1, got ${cfg.unrollK}`);
  if (cfg.sigma <= 0) throw new Error(`sigma must be positive, got ${cfg.sigma}`);
  const trainDs = readDataset(cfg.trainDataset);
  const valDs = readDataset(cfg.valDataset);
  if (trainDs.n !== valDs.n || trainDs.m !== valDs.m) {
    throw new Error(
      `geometry mismatch: train N=${trainDs.n} M=${trainDs.m}, val N=${valDs.n} M=${valDs.m}`,
    );
  }
  const side = Math.round(Math.sqrt(trainDs.n));
  if (side * side !== trainDs.n) {
    throw new Error(`antenna count ${trainDs.n} is not a perfect square`);
  }
  const twoN = 2 * trainDs.n;
  const scale = rmsScale(trainDs);
  // each dataset carries its own measurement operator; the network only
  // ever sees prox inputs, so train and val may use different pilots
  const bTrain = resolventMatrix(trainDs.aReal, 2 * trainDs.m, twoN, cfg.sigma);
  const bVal = resolventMatrix(valDs.aReal, 2 * valDs.m, twoN, cfg.sigma);
  const ctx: UnrollContext = { b: bTrain, twoN, sigma: cfg.sigma, k: cfg.unrollK };
  const ctxVal: UnrollContext = { b: bVal, twoN, sigma: cfg.sigma, k: cfg.unrollK };
  const cTrain = precomputeC(trainDs, bTrain, scale);
  const cVal = precomputeC(valDs, bVal, scale);
  const hTrainScaled = trainDs.h.map((h) => Float64Array.from(h, (v) => v / scale));

  const net = buildNetwork(trainDs.n, cfg.seed, cfg.sigma);
  measureNormalization(net, cTrain);

  const identityValNmseDb = valNmse(ctxVal, net, cVal, valDs.h, scale);
  const log: EpochLog[] = [];
  const logLine = (s: string) => {
    if (!quiet) console.log(s);
    if (cfg.logPath) appendFileSync(cfg.logPath, s + "\n");
  };
  if (cfg.logPath) writeFileSync(cfg.logPath, "");
  logLine(
    `start n=${trainDs.n} train=${trainDs.nSamples} val=${valDs.nSamples} ` +
      `k=${cfg.unrollK} sigma=${cfg.sigma} identity_val_nmse_db=${identityValNmseDb.toFixed(3)}`,
  );

  const stepsPerEpoch = Math.ceil(trainDs.nSamples / cfg.batchSize);
  const adam = new Adam(net, cfg.learningRate, stepsPerEpoch);
  const rng = new Rng(cfg.seed ^ 0x5eed);
  const order = new Int32Array(trainDs.nSamples);
  for (let i = 0; i < order.length; i++) order[i] = i;
  const valEvery = cfg.valEvery ?? DEFAULTS.valEvery;
  const keepBest = cfg.keepBest ?? true;
  let bestValNmseDb = identityValNmseDb;
  let bestEpoch = 0;
  let bestWeights: Map<string, Float64Array> | null = null;
  const snapshot = () => {
    const snap = new Map<string, Float64Array>();
    for (const [k, v] of net.weights) snap.set(k, Float64Array.from(v));
    return snap;
  };
  if (keepBest) bestWeights = snapshot();

  for (let epoch = 1; epoch <= cfg.epochs; epoch++) {
    const t0 = Date.now();
    rng.shuffle(order);
    let epochLoss = 0;
    let batches = 0;
    for (let start = 0; start < order.length; start += cfg.batchSize) {
      const idx = order.subarray(start, Math.min(start + cfg.batchSize, order.length));
      const grads = zeroLike(net);
      let batchLoss = 0;
      for (const i of idx) {
        const { estimate, cache } = unrollForward(ctx, net, cTrain[i], true);
        const h = hTrainScaled[i];
        const dEst = new Float64Array(twoN);
        let loss = 0;
        for (let k = 0; k < twoN; k++) {
          const d = estimate[k] - h[k];
          loss += 0.5 * d * d;
          dEst[k] = d / idx.length;
        }
        batchLoss += loss;
        unrollBackward(ctx, net, cache!, dEst, grads);
      }
      batchLoss /= idx.length;
      if (!Number.isFinite(batchLoss)) {
        throw new Error(
          `NaN/Inf loss at epoch ${epoch}, batch ${batches} (lr=${cfg.learningRate}, ` +
            `k=${cfg.unrollK}); aborting`,
        );
      }
      adam.step(grads);
      epochLoss += batchLoss;
      batches += 1;
    }
    epochLoss /= Math.max(batches, 1);
    let valDb = NaN;
    if (epoch % valEvery === 0 || epoch === cfg.epochs) {
      valDb = valNmse(ctxVal, net, cVal, valDs.h, scale);
    }
    const lip = empiricalLipschitz(net, 8, cfg.seed + epoch);
    const seconds = (Date.now() - t0) / 1000;
    log.push({ epoch, trainLoss: epochLoss, valNmseDb: valDb, lipschitz: lip, seconds });
    if (keepBest && Number.isFinite(valDb) && valDb < bestValNmseDb) {
      bestValNmseDb = valDb;
      bestEpoch = epoch;
      bestWeights = snapshot();
    }
    logLine(
      `epoch ${epoch}/${cfg.epochs} loss=${epochLoss.toExponential(4)} ` +
        `val_nmse_db=${Number.isFinite(valDb) ? valDb.toFixed(3) : "-"} ` +
        `lipschitz=${lip.toFixed(3)} (${seconds.toFixed(1)}s)`,
    );
  }
  if (keepBest && bestWeights) {
    for (const [k, v] of bestWeights) net.weights.get(k)!.set(v);
    logLine(`restored best-validation weights (epoch ${bestEpoch}, ${bestValNmseDb.toFixed(3)} dB)`);
  } else {
    const last = log.length ? log[log.length - 1] : null;
    bestValNmseDb = last ? last.valNmseDb : identityValNmseDb;
    bestEpoch = last ? last.epoch : 0;
  }

  // fold the data rescale into the stored normalization constants so the
  // exported network operates on raw (unscaled) embeddings
  const exportNet: Network = {
    ...net,
    normMean: Float64Array.from(net.normMean, (v) => v * scale),
    normScale: Float64Array.from(net.normScale, (v) => v * scale),
  };
  exportWeights(cfg.outWeights, exportNet);
  logLine(`exported ${cfg.outWeights}`);
  return { net: exportNet, scale, log, identityValNmseDb, bestValNmseDb, bestEpoch };
}
