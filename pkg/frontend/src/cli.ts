/** CLI: `train --config path.json`.
 *
 * Config keys (snake_case, defaults in parentheses): train_dataset,
 * val_dataset, out_weights, epochs (150), batch_size (128),
 * learning_rate (1e-3), unroll_k (8), sigma (1.0), seed (0), log_path,
 * val_every (1).
 */

import { readFileSync } from "node:fs";

import { DEFAULTS, train, TrainConfig } from "./train.js";

function loadConfig(path: string): TrainConfig {
  const raw = JSON.parse(readFileSync(path, "utf-8"));
  for (const key of ["train_dataset", "val_dataset", "out_weights"]) {
    if (typeof raw[key] !== "string") throw new Error(`config needs string key ${key}`);
  }
  return {
    trainDataset: raw.train_dataset,
    valDataset: raw.val_dataset,
    outWeights: raw.out_weights,
    epochs: raw.epochs ?? DEFAULTS.epochs,
    batchSize: raw.batch_size ?? DEFAULTS.batchSize,
    learningRate: raw.learning_rate ?? DEFAULTS.learningRate,
    unrollK: raw.unroll_k ?? DEFAULTS.unrollK,
    sigma: raw.sigma ?? DEFAULTS.sigma,
    seed: raw.seed ?? DEFAULTS.seed,
    logPath: raw.log_path,
    valEvery: raw.val_every ?? DEFAULTS.valEvery,
    keepBest: raw.keep_best ?? true,
  };
}

export function main(argv: string[]): number {
  if (argv[0] !== "train") {
    console.error("usage: cli.js train --config path.json");
    return 2;
  }
  const flagIdx = argv.indexOf("--config");
  if (flagIdx < 0 || !argv[flagIdx + 1]) {
    console.error("train requires --config path.json");
    return 2;
  }
  try {
    const cfg = loadConfig(argv[flagIdx + 1]);
    const result = train(cfg);
    console.log(
      `done: identity_val=${result.identityValNmseDb.toFixed(3)} dB, ` +
        `best_val=${result.bestValNmseDb.toFixed(3)} dB (epoch ${result.bestEpoch})`,
    );
    return 0;
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

const isMain = process.argv[1] && process.argv[1].endsWith("cli.js");
if (isMain) {
  process.exit(main(process.argv.slice(2)));
}
