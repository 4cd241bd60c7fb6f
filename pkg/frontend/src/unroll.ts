/** The unrolled dual-splitting iteration and its gradient.
 *
 * One sample's forward pass runs K iterations of the five-step update
 * with the network standing in for the proximal step:
 *
 *     q   = c + B eta            (c = B A^T y, B = (A^T A + sigma I)^{-1})
 *     u   = (2 sigma q - eta) / sigma
 *     p   = R_theta(u)
 *     eta = eta + 2 sigma (p - q)
 *
 * and the training estimate is the q implied by the final eta. Gradients
 * are obtained by reverse-unrolling through all K steps (shared weights),
 * not by the implicit fixed-point formula.
 */

import { matVec, matTVec } from "./linalg.js";
import { ForwardCache, netBackward, netForward, Network } from "./network.js";

export interface UnrollContext {
  b: Float64Array; // (2N x 2N) resolvent inverse, symmetric
  twoN: number;
  sigma: number;
  k: number;
}

export interface UnrollCache {
  etas: Float64Array[]; // eta entering each step (length k)
  qs: Float64Array[];
  us: Float64Array[];
  ps: Float64Array[];
  netCaches: ForwardCache[];
  etaFinal: Float64Array;
  qFinal: Float64Array;
}

/** K unrolled steps from eta = 0; returns the final primal estimate. */
export function unrollForward(
  ctx: UnrollContext,
  net: Network,
  c: Float64Array,
  keepCache: boolean,
): { estimate: Float64Array; cache: UnrollCache | null } {
  const { b, twoN, sigma, k } = ctx;
  let eta = new Float64Array(twoN);
  const etas: Float64Array[] = [];
  const qs: Float64Array[] = [];
  const us: Float64Array[] = [];
  const ps: Float64Array[] = [];
  const netCaches: ForwardCache[] = [];
  for (let step = 0; step < k; step++) {
    const q = matVec(b, twoN, twoN, eta);
    for (let i = 0; i < twoN; i++) q[i] += c[i];
    const u = new Float64Array(twoN);
    for (let i = 0; i < twoN; i++) u[i] = (2 * sigma * q[i] - eta[i]) / sigma;
    const { out: p, cache } = netForward(net, u, keepCache);
    const etaNext = new Float64Array(twoN);
    for (let i = 0; i < twoN; i++) etaNext[i] = eta[i] + 2 * sigma * (p[i] - q[i]);
    if (keepCache) {
      etas.push(eta);
      qs.push(q);
      us.push(u);
      ps.push(p);
      netCaches.push(cache!);
    }
    eta = etaNext;
  }
  const qFinal = matVec(b, twoN, twoN, eta);
  for (let i = 0; i < twoN; i++) qFinal[i] += c[i];
  const cache = keepCache ? { etas, qs, us, ps, netCaches, etaFinal: eta, qFinal } : null;
  return { estimate: qFinal, cache };
}

/** Reverse pass; dEstimate is dLoss/dq_final. Accumulates into grads. */
export function unrollBackward(
  ctx: UnrollContext,
  net: Network,
  cache: UnrollCache,
  dEstimate: Float64Array,
  grads: Map<string, Float64Array>,
): void {
  const { b, twoN, sigma, k } = ctx;
  // q_final = c + B eta_K: dEta = B^T dEstimate (B symmetric)
  let dEta = matVec(b, twoN, twoN, dEstimate);
  for (let step = k - 1; step >= 0; step--) {
    // eta_out = eta_in + 2 sigma (p - q)
    const dP = new Float64Array(twoN);
    for (let i = 0; i < twoN; i++) dP[i] = 2 * sigma * dEta[i];
    const dU = netBackward(net, cache.netCaches[step], dP, grads);
    // u = 2 q - eta_in / sigma
    const dQ = new Float64Array(twoN);
    for (let i = 0; i < twoN; i++) dQ[i] = -2 * sigma * dEta[i] + 2 * dU[i];
    // q = c + B eta_in
    const bq = matVec(b, twoN, twoN, dQ);
    const dEtaIn = new Float64Array(twoN);
    for (let i = 0; i < twoN; i++) dEtaIn[i] = dEta[i] + bq[i] - dU[i] / sigma;
    dEta = dEtaIn;
  }
}
