"""Command-line interface: generate, estimate, benchmark, selftest, inspect.

A JSON config file (see :mod:`prden.config`) provides defaults; flags
override file values. Every command is deterministic under a fixed
``--seed`` (benchmark timing is opt-in because wall time never is).
Exit codes: 0 success, 2 validation error, 3 numeric failure, 4 I/O.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import config as cfgmod
from .channel import ArrayGeometry, ChannelConfig, PilotConfig
from .datasets import generate_dataset, read_dataset, read_header
from .errors import NumericError, ValidationError
from .metrics import (
    ALGORITHMS,
    _sample_instances,
    build_estimators,
    curves_to_csv,
    iteration_curve,
    nmse_db,
    report_to_csv,
    snr_sweep,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERIC = 3
EXIT_IO = 4


def _parse_snr(text: str) -> float:
    if text.strip().lower() in ("inf", "+inf", "noiseless"):
        return float("inf")
    try:
        return float(text)
    except ValueError as exc:
        raise ValidationError(f"bad SNR value {text!r}") from exc


def _default_threads() -> int:
    env = os.environ.get("PRDN_THREADS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ValidationError(f"PRDN_THREADS must be an integer, got {env!r}") from exc
    return 1


def _load_config(args) -> cfgmod.RunConfig:
    """Config file (if any) with flag overrides applied."""
    cfg = cfgmod.load(args.config) if getattr(args, "config", None) else cfgmod.RunConfig()
    geom = cfg.geometry
    pilot = cfg.pilot
    if getattr(args, "n_antennas", None) is not None or getattr(args, "n_upas", None) is not None:
        geom = ArrayGeometry(
            n_antennas=args.n_antennas if args.n_antennas is not None else geom.n_antennas,
            n_upas=args.n_upas if args.n_upas is not None else geom.n_upas,
            d=geom.d,
            d_upa=geom.d_upa,
        )
    if getattr(args, "p_slots", None) is not None or getattr(args, "n_rf", None) is not None:
        pilot = PilotConfig(
            p_slots=args.p_slots if args.p_slots is not None else pilot.p_slots,
            n_rf=args.n_rf if args.n_rf is not None else pilot.n_rf,
            rng_seed=pilot.rng_seed,
        )
    s = cfg.solver
    solver = cfgmod.SolverSettings(
        lam=args.lam if getattr(args, "lam", None) is not None else s.lam,
        lam_rule=args.lam_rule if getattr(args, "lam_rule", None) is not None else s.lam_rule,
        sigma=args.sigma if getattr(args, "sigma", None) is not None else s.sigma,
        max_iter=args.max_iter if getattr(args, "max_iter", None) is not None else s.max_iter,
        tol=args.tol if getattr(args, "tol", None) is not None else s.tol,
        damping_rho=args.damping_rho
        if getattr(args, "damping_rho", None) is not None
        else s.damping_rho,
        stop_criterion=args.stop_criterion
        if getattr(args, "stop_criterion", None) is not None
        else s.stop_criterion,
        x_tol=s.x_tol,
        weights=args.weights if getattr(args, "weights", None) is not None else s.weights,
    )
    b = cfg.benchmark
    bench = cfgmod.BenchmarkSettings(
        n_fit=args.n_fit if getattr(args, "n_fit", None) is not None else b.n_fit,
        timing_repeats=args.timing if getattr(args, "timing", None) is not None else b.timing_repeats,
        curve_iters=args.curve_iters
        if getattr(args, "curve_iters", None) is not None
        else b.curve_iters,
        curve_samples=b.curve_samples,
        nmse_squared=False if getattr(args, "nmse_unsquared", False) else b.nmse_squared,
    )
    seed = args.seed if getattr(args, "seed", None) is not None else cfg.seed
    threads = args.threads if getattr(args, "threads", None) is not None else cfg.threads
    return cfgmod.RunConfig(
        geometry=geom,
        channel=cfg.channel,
        pilot=pilot,
        solver=solver,
        benchmark=bench,
        seed=seed,
        threads=threads,
    )


def cmd_generate(args) -> int:
    cfg = _load_config(args)
    snr = _parse_snr(args.snr)
    generate_dataset(
        cfg.geometry,
        cfg.channel,
        cfg.pilot,
        args.samples,
        snr,
        args.out,
        seed=cfg.seed,
        threads=cfg.threads,
        pilot_seed=args.pilot_seed,
    )
    print(f"wrote {args.samples} samples to {args.out} (snr={snr} dB, seed={cfg.seed})")
    return EXIT_OK


def cmd_estimate(args) -> int:
    cfg = _load_config(args)
    ds = read_dataset(args.dataset)
    n = ds.op.n_complex
    fn = build_estimators([args.algorithm], cfg, n)[args.algorithm]
    lines = ["sample,snr_db,nmse_db,iters"]
    nmses = []
    converged = []
    for i, inst in _sample_instances(ds, cfg, None, 0):
        est, iters, conv = fn(inst)
        v = nmse_db(ds.h[i], est, squared=cfg.benchmark.nmse_squared)
        nmses.append(v)
        if conv is not None:
            converged.append(conv)
        lines.append(f"{i},{ds.snr_db[i]:.12g},{v:.12g},{iters}")
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    mean = float(np.mean(nmses)) if nmses else float("nan")
    summary = f"algorithm={args.algorithm} samples={len(nmses)} mean_nmse_db={mean:.4f}"
    if converged:
        summary += f" converged_fraction={sum(converged) / len(converged):.3f}"
    print(summary)
    return EXIT_OK


def cmd_benchmark(args) -> int:
    cfg = _load_config(args)
    ds = read_dataset(args.dataset)
    algorithms = [a.strip() for a in args.algorithms.split(",") if a.strip()]
    snrs = None
    if args.snrs:
        snrs = [_parse_snr(t) for t in args.snrs.split(",") if t.strip()]
    report = snr_sweep(ds, algorithms, snrs, cfg)
    csv = report_to_csv(report)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(csv)
    print(f"wrote {len(report.rows)} rows to {args.out}")
    if args.curves:
        iterative = [a for a in algorithms if a in ("ista", "fista", "pr", "pr-den")]
        curves = iteration_curve(ds, iterative, cfg, None if snrs is None else snrs[0])
        with open(args.curves, "w", encoding="utf-8") as fh:
            fh.write(curves_to_csv(curves))
        print(f"wrote curves for {', '.join(iterative)} to {args.curves}")
    bad = [r for r in report.rows if not math.isfinite(r.nmse_db_mean)]
    if bad:
        names = ", ".join(f"{r.algorithm}@{r.snr_db}dB" for r in bad)
        raise NumericError(f"non-finite NMSE in rows: {names}")
    return EXIT_OK


def _selftest_suites(iters: int, seed: int):
    """(name, defect, tolerance) triples for the structural identities."""
    from .prox import (
        L1SoftThreshold,
        QuadraticResolvent,
        ZeroRegularizer,
        moreau_check,
    )
    from .realform import ProblemInstance, build_real_operator, embed_complex
    from .solver import init_state, iterate_once, iterate_raw

    rng = np.random.default_rng(seed)

    def random_instance(m, n, lam, sigma):
        a = rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))
        op = build_real_operator(a.real, a.imag)
        h = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        y = embed_complex(a @ h)
        return ProblemInstance(op=op, y=y, lam=lam, sigma=sigma)

    equiv_defect = 0.0
    ident_defect = 0.0
    for lam in (0.01, 0.1):
        for sigma in (0.5, 1.0, 2.0):
            inst = random_instance(8, 16, lam, sigma)
            g = L1SoftThreshold(lam)
            state = init_state(np.zeros(32), sigma=sigma)
            eta_raw = state.eta.copy()
            for _ in range(iters):
                eta_old = state.eta
                state = iterate_once(state, inst, g)
                eta_raw = iterate_raw(eta_raw, inst, g)
                equiv_defect = max(equiv_defect, float(np.max(np.abs(state.eta - eta_raw))))
                ident_defect = max(
                    ident_defect,
                    float(np.max(np.abs((state.x - state.w) - 0.5 * (state.eta - eta_old)))),
                )

    moreau_defect = 0.0
    prox = L1SoftThreshold(0.7)
    for sigma in (0.1, 1.0, 10.0):
        for _ in range(20):
            z = rng.standard_normal(24) * float(rng.choice([0.1, 1.0, 10.0]))
            moreau_defect = max(moreau_defect, moreau_check(prox, z, sigma))
    moreau_defect = max(moreau_defect, moreau_check(ZeroRegularizer(), rng.standard_normal(8), 1.0))

    inst = random_instance(8, 12, 0.1, 1.5)
    g = L1SoftThreshold(0.1)
    lip_excess = 0.0
    for _ in range(200):
        a_pt = rng.standard_normal(24)
        b_pt = rng.standard_normal(24)
        num = float(np.linalg.norm(iterate_raw(a_pt, inst, g) - iterate_raw(b_pt, inst, g)))
        den = float(np.linalg.norm(a_pt - b_pt))
        lip_excess = max(lip_excess, num / den - 1.0)

    wood_defect = 0.0
    for _ in range(20):
        a = rng.standard_normal((8, 16)) + 1j * rng.standard_normal((8, 16))
        op = build_real_operator(a.real, a.imag)
        sigma = float(rng.uniform(0.2, 4.0))
        direct = QuadraticResolvent(op, sigma, strategy="direct")
        wood = QuadraticResolvent(op, sigma, strategy="woodbury")
        b_vec = rng.standard_normal(32)
        xd = direct.solve(b_vec)
        xw = wood.solve(b_vec)
        wood_defect = max(
            wood_defect, float(np.linalg.norm(xd - xw) / max(1.0, np.linalg.norm(xd)))
        )

    return [
        ("route-equivalence", equiv_defect, 1e-10),
        ("update-identity", ident_defect, 1e-12),
        ("moreau-identity", moreau_defect, 1e-10),
        ("nonexpansiveness-excess", lip_excess, 1e-9),
        ("woodbury-vs-direct", wood_defect, 1e-9),
    ]


def cmd_selftest(args) -> int:
    scale = 1.0
    env = os.environ.get("PRDN_SELFTEST_TOL_SCALE", "").strip()
    if env:
        scale = float(env)
    failures = 0
    for name, defect, tol in _selftest_suites(args.iters, args.seed if args.seed is not None else 0):
        tol_eff = tol * scale
        status = "PASS" if defect <= tol_eff else "FAIL"
        if status == "FAIL":
            failures += 1
        print(f"{status} {name} defect={defect:.3e} tol={tol_eff:.3e}")
    if failures:
        print(f"{failures} suite(s) failed")
        return EXIT_NUMERIC
    print("all selftest suites passed")
    return EXIT_OK


def cmd_inspect(args) -> int:
    for path in args.paths:
        with open(path, "rb") as fh:
            magic = fh.read(4)
        if magic == b"PRDN":
            hdr = read_header(path)
            size_ok = os.path.getsize(path) == hdr["predicted_size"]
            print(
                f"{path}: dataset N={hdr['n']} M={hdr['m']} samples={hdr['n_samples']} "
                f"flags=0x{hdr['flags']:x} slots={hdr['n_slots']} size_ok={size_ok}"
            )
        elif magic == b"PRDW":
            from .denoiser import load_weights, read_weight_header

            hdr = read_weight_header(path)
            net = load_weights(path)
            print(
                f"{path}: weights N={hdr['n']} tensors={hdr['tensor_count']} "
                f"sigma={net.sigma:g} norm_mean={net.norm_mean.tolist()} "
                f"norm_scale={net.norm_scale.tolist()}"
            )
        else:
            raise ValidationError(f"{path}: unknown magic {magic!r}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prden",
        description="Dual Peaceman-Rachford channel estimation: simulate, solve, benchmark.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, solver_flags=True):
        p.add_argument("--config", help="JSON config file (flags override it)")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=None, help="default: env PRDN_THREADS or 1")
        if solver_flags:
            p.add_argument("--lambda", dest="lam", type=float, default=None)
            p.add_argument("--lam-rule", choices=("noise", "fixed"), default=None)
            p.add_argument("--sigma", type=float, default=None)
            p.add_argument("--max-iter", type=int, default=None)
            p.add_argument("--tol", type=float, default=None)
            p.add_argument("--damping-rho", type=float, default=None)
            p.add_argument("--stop-criterion", choices=("eta_rel", "x_abs"), default=None)
            p.add_argument("--weights", default=None, help="PRDW weight file for pr-den")

    p = sub.add_parser("generate", help="simulate channels and write a dataset")
    add_common(p, solver_flags=False)
    p.add_argument("--out", required=True)
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--snr", default="10", help='dB, or "inf" for noiseless')
    p.add_argument("--n-antennas", type=int, default=None)
    p.add_argument("--n-upas", type=int, default=None)
    p.add_argument("--p-slots", type=int, default=None)
    p.add_argument("--n-rf", type=int, default=None)
    p.add_argument("--pilot-seed", type=int, default=None,
                   help="pin the combining matrices separately from --seed "
                        "(lets dataset splits share one operator)")
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("estimate", help="run one estimator over a dataset")
    add_common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--algorithm", required=True, choices=ALGORITHMS)
    p.add_argument("--out", default=None, help="per-sample CSV (default: stdout)")
    p.add_argument("--n-fit", type=int, default=None, help="LMMSE covariance fit samples")
    p.add_argument("--nmse-unsquared", action="store_true",
                   help="report the literal unsquared norm-ratio metric")
    p.set_defaults(fn=cmd_estimate)

    p = sub.add_parser("benchmark", help="NMSE/iterations/runtime sweep to CSV")
    add_common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--algorithms", required=True, help="comma-separated names")
    p.add_argument("--snrs", default=None, help="comma-separated dB targets (default: stored)")
    p.add_argument("--out", required=True)
    p.add_argument("--curves", default=None, help="also write per-iteration NMSE curves CSV")
    p.add_argument("--curve-iters", type=int, default=None)
    p.add_argument("--timing", type=int, default=None, help="timing repeats (breaks determinism)")
    p.add_argument("--n-fit", type=int, default=None)
    p.add_argument("--nmse-unsquared", action="store_true",
                   help="report the literal unsquared norm-ratio metric")
    p.set_defaults(fn=cmd_benchmark)

    p = sub.add_parser("selftest", help="verify the solver's structural identities")
    p.add_argument("--iters", type=int, default=50, help="equivalence horizon")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=cmd_selftest)

    p = sub.add_parser("inspect", help="print dataset / weight file headers")
    p.add_argument("paths", nargs="+")
    p.set_defaults(fn=cmd_inspect)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "threads", None) is None and hasattr(args, "threads"):
        args.threads = _default_threads()
    try:
        return args.fn(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
