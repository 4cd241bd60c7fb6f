"""NMSE metric, SNR sweeps, iteration curves, and CSV reports.

NMSE uses the squared-norm convention 10 log10(||h - h_est||^2 / ||h||^2);
``squared=False`` reproduces the literal unsquared ratio (half the dB).
Sweep results average NMSE in dB across samples. Reports are pure
functions of (dataset bytes, config, seeds) as long as timing is disabled
(``timing_repeats = 0``, the default); wall-clock timing is opt-in and
marked NaN otherwise.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .baselines import fista, fit_covariance, ista, lmmse_estimate, ls_estimate
from .channel import generate_channel, unitary_dft
from .config import RunConfig
from .datasets import Dataset
from .denoiser import load_weights
from .errors import ValidationError
from .prox import L1SoftThreshold
from .realform import ProblemInstance
from .solver import SolverConfig, run, run_deq

__all__ = [
    "nmse_db",
    "BenchmarkReport",
    "ReportRow",
    "snr_sweep",
    "iteration_curve",
    "report_to_csv",
    "curves_to_csv",
    "ITERATIVE_ALGORITHMS",
    "ALGORITHMS",
]

ALGORITHMS = ("ls", "lmmse", "ista", "fista", "pr", "pr-den")
ITERATIVE_ALGORITHMS = ("ista", "fista", "pr", "pr-den")


def nmse_db(h_true: np.ndarray, h_est: np.ndarray, squared: bool = True) -> float:
    """10 log10 of the (squared) error-to-signal norm ratio, in dB.

    An exact match returns -inf as a distinct sentinel; a zero true
    channel is a domain error.
    """
    h_true = np.asarray(h_true, dtype=np.float64)
    h_est = np.asarray(h_est, dtype=np.float64)
    if h_true.shape != h_est.shape:
        raise ValidationError(f"shape mismatch: {h_true.shape} vs {h_est.shape}")
    denom = float(np.linalg.norm(h_true))
    if denom == 0.0:
        raise ValidationError("NMSE undefined for a zero true channel")
    err = float(np.linalg.norm(h_true - h_est))
    if err == 0.0:
        return float("-inf")
    ratio = err / denom
    return (20.0 if squared else 10.0) * math.log10(ratio)


@dataclass
class ReportRow:
    algorithm: str
    snr_db: float
    n_samples: int
    nmse_db_mean: float
    nmse_db_std: float
    iters_mean: float
    time_ms_median: float  # NaN when timing is disabled


@dataclass
class BenchmarkReport:
    rows: list = field(default_factory=list)


def _held_out_covariance(cfg: RunConfig, n: int):
    """LMMSE covariance from freshly generated channels (never test data)."""
    if cfg.geometry.n_antennas != n:
        raise ValidationError(
            f"configured geometry has N={cfg.geometry.n_antennas}, dataset has N={n}"
        )
    f_h = unitary_dft(n).conj().T
    samples = np.empty((cfg.benchmark.n_fit, 2 * n))
    for i in range(cfg.benchmark.n_fit):
        rng = np.random.default_rng([cfg.seed, 9, i])
        h_spatial, _ = generate_channel(cfg.geometry, cfg.channel, rng)
        hp = f_h @ h_spatial
        samples[i] = np.concatenate([hp.real, hp.imag])
    return fit_covariance(samples)


def _solver_config(cfg: RunConfig, record_trace: bool = False) -> SolverConfig:
    s = cfg.solver
    return SolverConfig(
        sigma=s.sigma,
        max_iter=s.max_iter,
        tol=s.tol,
        damping_rho=s.damping_rho,
        stop_criterion=s.stop_criterion,
        x_tol=s.x_tol,
        record_trace=record_trace,
    )


def build_estimators(names, cfg: RunConfig, n: int) -> dict:
    """name -> estimator map; estimators return (estimate, n_iter, converged).

    ``converged`` is None for closed-form estimators. The instance's own
    lam field (already resolved through the configured lambda rule) drives
    the L1 methods. Shared context (LMMSE covariance, denoiser weights) is
    constructed once here.
    """
    unknown = set(names) - set(ALGORITHMS)
    if unknown:
        raise ValidationError(
            f"unknown algorithm(s) {', '.join(sorted(unknown))}; valid: {', '.join(ALGORITHMS)}"
        )
    fns = {}
    if "ls" in names:
        fns["ls"] = lambda inst, cb=None: (ls_estimate(inst), 0, None)
    if "lmmse" in names:
        cov = _held_out_covariance(cfg, n)
        fns["lmmse"] = lambda inst, cb=None: (lmmse_estimate(inst, cov), 0, None)
    if "ista" in names:
        def _ista(inst, cb=None):
            est, tr = ista(inst, inst.lam, cfg.solver.max_iter, cfg.solver.tol, callback=cb)
            return est, tr.n_iter, tr.converged
        fns["ista"] = _ista
    if "fista" in names:
        def _fista(inst, cb=None):
            est, tr = fista(inst, inst.lam, cfg.solver.max_iter, cfg.solver.tol, callback=cb)
            return est, tr.n_iter, tr.converged
        fns["fista"] = _fista
    if "pr" in names:
        def _pr(inst, cb=None):
            res = run(inst, L1SoftThreshold(inst.lam), _solver_config(cfg), callback=cb)
            return res.estimate, res.n_iter, res.converged
        fns["pr"] = _pr
    if "pr-den" in names:
        if not cfg.solver.weights:
            raise ValidationError(
                "algorithm pr-den needs a weight file; set solver.weights or pass --weights"
            )
        net = load_weights(cfg.solver.weights, expect_n=n)
        def _prden(inst, cb=None):
            res = run_deq(inst, net, _solver_config(cfg), callback=cb)
            return res.estimate, res.n_iter, res.converged
        fns["pr-den"] = _prden
    return {name: fns[name] for name in names}


def _noise_var_for(op, h_emb: np.ndarray, snr_db: float) -> float:
    if math.isinf(snr_db):
        return 0.0
    clean = op.a_real @ h_emb
    return float(clean @ clean) / (10.0 ** (snr_db / 10.0) * clean.size)


def _renoise(dataset: Dataset, i: int, snr_db: float, seed_key) -> np.ndarray:
    from .channel import add_noise
    from .realform import extract_complex

    h_c = extract_complex(dataset.h[i])
    y, _ = add_noise(dataset.op, h_c, snr_db, rng_seed=seed_key)
    return y


def _sample_instances(dataset: Dataset, cfg: RunConfig, snr_db: float | None, snr_index: int):
    """Yield (index, instance) pairs at the requested SNR.

    snr_db None uses the stored measurements; otherwise samples whose
    stored SNR differs are re-measured at the target (requires the
    operator's pilot structure for noise coloring).
    """
    op = dataset.op
    for i in range(dataset.n_samples):
        stored = float(dataset.snr_db[i])
        if snr_db is None or stored == snr_db:
            y = dataset.y[i]
            eff_snr = stored
        else:
            y = _renoise(dataset, i, snr_db, [cfg.seed, 4, snr_index, i])
            eff_snr = snr_db
        noise_var = _noise_var_for(op, dataset.h[i], eff_snr)
        inst = ProblemInstance(
            op=op,
            y=y,
            lam=cfg.solver.effective_lam(noise_var, 2 * op.n_complex),
            sigma=cfg.solver.sigma,
            noise_var=noise_var,
        )
        yield i, inst


def snr_sweep(
    dataset: Dataset,
    algorithms,
    snrs,
    cfg: RunConfig,
) -> BenchmarkReport:
    """One report row per (algorithm, snr): NMSE stats, iterations, timing.

    ``snrs = None`` evaluates stored measurements grouped by their stored
    SNR. Per-sample work parallelizes over ``cfg.threads``; aggregation is
    in fixed sample order, so results are thread-count independent.
    """
    n = dataset.op.n_complex
    estimators = build_estimators(algorithms, cfg, n)
    if snrs is None:
        snr_list = sorted(set(float(s) for s in dataset.snr_db))
    else:
        snr_list = [float(s) for s in snrs]
    report = BenchmarkReport()
    for alg in algorithms:
        fn = estimators[alg]
        for si, snr in enumerate(snr_list):
            pairs = list(_sample_instances(dataset, cfg, None if snrs is None else snr, si))

            def one(pair):
                i, inst = pair
                est, iters, _ = fn(inst)
                return nmse_db(dataset.h[i], est, squared=cfg.benchmark.nmse_squared), iters

            if cfg.threads > 1 and len(pairs) > 1:
                from concurrent.futures import ThreadPoolExecutor

                with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
                    results = list(pool.map(one, pairs))
            else:
                results = [one(p) for p in pairs]
            nmses = np.array([r[0] for r in results])
            iters = np.array([r[1] for r in results], dtype=np.float64)
            t_med = float("nan")
            if cfg.benchmark.timing_repeats > 0 and pairs:
                times = []
                for _ in range(cfg.benchmark.timing_repeats):
                    t0 = time.perf_counter()
                    fn(pairs[0][1])
                    times.append((time.perf_counter() - t0) * 1e3)
                t_med = float(np.median(times))
            report.rows.append(
                ReportRow(
                    algorithm=alg,
                    snr_db=snr,
                    n_samples=len(pairs),
                    nmse_db_mean=float(np.mean(nmses)) if nmses.size else float("nan"),
                    nmse_db_std=float(np.std(nmses)) if nmses.size else float("nan"),
                    iters_mean=float(np.mean(iters)) if iters.size else float("nan"),
                    time_ms_median=t_med,
                )
            )
    return report


def iteration_curve(
    dataset: Dataset,
    algorithms,
    cfg: RunConfig,
    snr_db: float | None = None,
) -> dict:
    """algorithm -> mean per-iteration NMSE curve (length curve_iters).

    Early stopping is disabled so every sample contributes exactly
    curve_iters points. Only iterative algorithms qualify.
    """
    bad = [a for a in algorithms if a not in ITERATIVE_ALGORITHMS]
    if bad:
        raise ValidationError(
            f"not iterative: {', '.join(bad)}; curves support {', '.join(ITERATIVE_ALGORITHMS)}"
        )
    iters = cfg.benchmark.curve_iters
    curve_cfg = RunConfig(
        geometry=cfg.geometry,
        channel=cfg.channel,
        pilot=cfg.pilot,
        solver=type(cfg.solver)(
            lam=cfg.solver.lam,
            sigma=cfg.solver.sigma,
            max_iter=iters,
            tol=0.0,
            damping_rho=cfg.solver.damping_rho,
            stop_criterion=cfg.solver.stop_criterion,
            x_tol=0.0,
            weights=cfg.solver.weights,
        ),
        benchmark=cfg.benchmark,
        seed=cfg.seed,
        threads=cfg.threads,
    )
    n = dataset.op.n_complex
    estimators = build_estimators(algorithms, curve_cfg, n)
    n_use = min(cfg.benchmark.curve_samples, dataset.n_samples)
    curves = {}
    for alg in algorithms:
        fn = estimators[alg]
        acc = np.zeros(iters)
        count = 0
        for i, inst in _sample_instances(dataset, curve_cfg, snr_db, 0):
            if count >= n_use:
                break
            points = []
            fn(inst, cb=lambda est: points.append(
                nmse_db(dataset.h[i], est, squared=cfg.benchmark.nmse_squared)))
            if len(points) != iters:
                raise ValidationError(
                    f"{alg}: expected {iters} curve points, got {len(points)}"
                )
            acc += np.array(points)
            count += 1
        curves[alg] = acc / max(count, 1)
    return curves


def _fmt(v: float) -> str:
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


def report_to_csv(report: BenchmarkReport) -> str:
    lines = ["algorithm,snr_db,n_samples,nmse_db_mean,nmse_db_std,iters_mean,time_ms_median"]
    for r in report.rows:
        lines.append(
            ",".join(
                [
                    r.algorithm,
                    _fmt(r.snr_db),
                    str(r.n_samples),
                    _fmt(r.nmse_db_mean),
                    _fmt(r.nmse_db_std),
                    _fmt(r.iters_mean),
                    _fmt(r.time_ms_median),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def curves_to_csv(curves: dict) -> str:
    lines = ["algorithm,iteration,nmse_db_mean"]
    for alg in curves:
        for k, v in enumerate(curves[alg]):
            lines.append(f"{alg},{k},{_fmt(float(v))}")
    return "\n".join(lines) + "\n"
