"""Peaceman-Rachford fixed-point solver on the dual problem.

Three entry points share one iteration body:

* ``run`` — the printed five-step iteration (q, w, p, x, eta updates) with
  a cached resolvent factorization;
* ``iterate_raw`` — one application of the composed reflected resolvents,
  the raw fixed-point map (used to verify that both routes generate the
  same eta sequence);
* ``run_deq`` — the same loop with the proximal step replaced by a learned
  denoiser (deep-equilibrium inference), plus safeguards.

The returned channel estimate defaults to the f-side primal iterate q
(which converges to the minimizer of the regularized objective); the
dual-side output x (which converges to the dual optimum w*) is exposed
alongside it. For convex g the two limits describe different variables:
q is the channel, x the multiplier.

Convergence caveat: the undamped iteration is a composition of
reflections, nonexpansive but not averaged. It converges linearly when
the data term is strongly convex (A with full column rank, e.g. the
overdetermined desk pilot configuration); on underdetermined problems
with L1 it can settle into a period-2 orbit around the fixed point.
``damping_rho < 1`` (Krasnoselskii-Mann averaging) restores convergence
there at the cost of speed.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError, ValidationError
from .prox import DenoiserProx, ProxOperator, QuadraticResolvent, reflected_resolvent_M1, reflected_resolvent_M2, resolvent_f
from .realform import ProblemInstance

__all__ = [
    "SolverState",
    "SolverConfig",
    "SolverTrace",
    "SolverResult",
    "init_state",
    "iterate_once",
    "iterate_raw",
    "run",
    "run_deq",
    "linear_term_norms",
]


@dataclass
class SolverState:
    """Iterates of one PR step: eta is the fixed-point variable."""

    eta: np.ndarray
    q: np.ndarray
    w: np.ndarray
    p: np.ndarray
    x: np.ndarray
    k: int = 0


@dataclass
class SolverConfig:
    sigma: float = 1.0
    max_iter: int = 500
    tol: float = 1e-8  # stop when ||eta+ - eta|| <= tol * (1 + ||eta||)
    damping_rho: float = 1.0  # 1 = pure PR; <1 Krasnoselskii-Mann averaging
    mode: str = "algorithm1"  # algorithm1 | raw_fixed_point | deq
    stop_criterion: str = "eta_rel"  # eta_rel | x_abs (runtime-benchmark parity)
    x_tol: float = 1e-2
    record_trace: bool = True

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValidationError(f"sigma must be positive, got {self.sigma}")
        if not 0 < self.damping_rho <= 1:
            raise ValidationError(f"damping_rho must be in (0, 1], got {self.damping_rho}")
        if self.mode not in ("algorithm1", "raw_fixed_point", "deq"):
            raise ValidationError(f"unknown solver mode {self.mode!r}")
        if self.stop_criterion not in ("eta_rel", "x_abs"):
            raise ValidationError(f"unknown stop criterion {self.stop_criterion!r}")


@dataclass
class SolverTrace:
    """Per-iteration history; all lists share the iteration count."""

    eta_residual: list = field(default_factory=list)
    primal_gap: list = field(default_factory=list)  # ||p - q||
    objective: list = field(default_factory=list)  # g(q) + 1/2 ||y - A q||^2
    wall_time: list = field(default_factory=list)
    # DEQ diagnostics (never enforced): max affine-step norm and measured
    # contraction factor of the composed map.
    alpha: float | None = None
    beta: float | None = None

    def residual_ratios(self) -> np.ndarray:
        """||d eta^{k+1}|| / ||d eta^k||, the empirical contraction factors."""
        r = np.asarray(self.eta_residual, dtype=np.float64)
        if r.size < 2:
            return np.empty(0)
        prev = r[:-1]
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(prev > 0, r[1:] / prev, np.inf)


@dataclass
class SolverResult:
    estimate: np.ndarray  # q_L, the f-side primal iterate
    x_final: np.ndarray  # x_L, the dual-side output
    state: SolverState
    trace: SolverTrace
    converged: bool
    n_iter: int


def init_state(x0: np.ndarray, p0: np.ndarray | None = None, sigma: float = 1.0) -> SolverState:
    """eta0 = x0 + sigma * p0, with p0 defaulting to x0."""
    x0 = np.asarray(x0, dtype=np.float64)
    if p0 is None:
        p0 = x0
    p0 = np.asarray(p0, dtype=np.float64)
    if x0.shape != p0.shape:
        raise ValidationError(f"x0 and p0 shapes differ: {x0.shape} vs {p0.shape}")
    eta = x0 + sigma * p0
    return SolverState(eta=eta, q=x0.copy(), w=x0.copy(), p=p0.copy(), x=x0.copy(), k=0)


def _objective(instance: ProblemInstance, prox_g: ProxOperator, h: np.ndarray) -> float:
    r = instance.y - instance.op.a_real @ h
    return prox_g.value(h) + 0.5 * float(r @ r)


def iterate_once(
    state: SolverState,
    instance: ProblemInstance,
    prox_g: ProxOperator,
    resolvent: QuadraticResolvent | None = None,
    damping_rho: float = 1.0,
) -> SolverState:
    """One five-step PR update of (q, w, p, x, eta)."""
    sigma = instance.sigma
    if resolvent is None:
        resolvent = QuadraticResolvent(instance.op, sigma)
    eta = state.eta
    q = resolvent_f(resolvent, instance.op, instance.y, eta)
    w = eta - sigma * q
    p = prox_g.evaluate((2.0 * sigma * q - eta) / sigma, 1.0 / sigma)
    x = eta + sigma * p - 2.0 * sigma * q
    eta_next = eta + 2.0 * sigma * (p - q)
    if damping_rho < 1.0:
        eta_next = (1.0 - damping_rho) * eta + damping_rho * eta_next
    if not np.all(np.isfinite(eta_next)):
        raise NumericError(f"non-finite iterate at iteration {state.k + 1}")
    return SolverState(eta=eta_next, q=q, w=w, p=p, x=x, k=state.k + 1)


def iterate_raw(
    eta: np.ndarray,
    instance: ProblemInstance,
    prox_g: ProxOperator,
    resolvent: QuadraticResolvent | None = None,
) -> np.ndarray:
    """One application of the composed reflected resolvents to eta.

    Valid only for convex g: the Moreau route to the dual resolvents
    assumes the conjugate relations hold.
    """
    if not prox_g.convex:
        raise ValidationError("raw fixed-point iteration requires a convex regularizer")
    sigma = instance.sigma
    if resolvent is None:
        resolvent = QuadraticResolvent(instance.op, sigma)
    v = reflected_resolvent_M2(resolvent, instance.op, instance.y, sigma, eta)
    return reflected_resolvent_M1(prox_g, sigma, v)


def _run_loop(
    instance: ProblemInstance,
    prox_g: ProxOperator,
    config: SolverConfig,
    x0: np.ndarray | None = None,
    callback=None,
) -> SolverResult:
    two_n = 2 * instance.op.n_complex
    if x0 is None:
        x0 = np.zeros(two_n)
    state = init_state(x0, sigma=config.sigma)
    resolvent = QuadraticResolvent(instance.op, config.sigma)
    trace = SolverTrace()
    converged = False
    for _ in range(config.max_iter):
        t0 = time.perf_counter()
        eta_prev = state.eta
        x_prev = state.x
        state = iterate_once(state, instance, prox_g, resolvent, config.damping_rho)
        residual = float(np.linalg.norm(state.eta - eta_prev))
        if config.record_trace:
            trace.eta_residual.append(residual)
            trace.primal_gap.append(float(np.linalg.norm(state.p - state.q)))
            trace.objective.append(_objective(instance, prox_g, state.q))
            trace.wall_time.append(time.perf_counter() - t0)
        if callback is not None:
            callback(state.q)
        if config.stop_criterion == "eta_rel":
            if residual <= config.tol * (1.0 + float(np.linalg.norm(eta_prev))):
                converged = True
                break
        else:
            if float(np.linalg.norm(state.x - x_prev)) < config.x_tol:
                converged = True
                break
    return SolverResult(
        estimate=state.q.copy(),
        x_final=state.x.copy(),
        state=state,
        trace=trace,
        converged=converged,
        n_iter=state.k,
    )


def run(
    instance: ProblemInstance,
    prox_g: ProxOperator,
    config: SolverConfig | None = None,
    x0: np.ndarray | None = None,
    callback=None,
) -> SolverResult:
    """Iterate to tolerance or max_iter; never raises on non-convergence."""
    if config is None:
        config = SolverConfig(sigma=instance.sigma)
    if config.mode == "raw_fixed_point":
        return _run_raw(instance, prox_g, config, x0)
    return _run_loop(instance, prox_g, config, x0, callback)


def _run_raw(
    instance: ProblemInstance,
    prox_g: ProxOperator,
    config: SolverConfig,
    x0: np.ndarray | None = None,
) -> SolverResult:
    """Fixed-point iteration on the composed reflected resolvents only.

    Tracks eta alone (the raw map has no named intermediates); the final
    primal estimate is recovered with one resolvent evaluation.
    """
    two_n = 2 * instance.op.n_complex
    if x0 is None:
        x0 = np.zeros(two_n)
    state = init_state(x0, sigma=config.sigma)
    resolvent = QuadraticResolvent(instance.op, config.sigma)
    trace = SolverTrace()
    eta = state.eta
    converged = False
    k = 0
    for k in range(1, config.max_iter + 1):
        t0 = time.perf_counter()
        eta_next = iterate_raw(eta, instance, prox_g, resolvent)
        if config.damping_rho < 1.0:
            eta_next = (1.0 - config.damping_rho) * eta + config.damping_rho * eta_next
        residual = float(np.linalg.norm(eta_next - eta))
        q = resolvent_f(resolvent, instance.op, instance.y, eta_next)
        if config.record_trace:
            trace.eta_residual.append(residual)
            trace.primal_gap.append(float("nan"))
            trace.objective.append(_objective(instance, prox_g, q))
            trace.wall_time.append(time.perf_counter() - t0)
        done = residual <= config.tol * (1.0 + float(np.linalg.norm(eta)))
        eta = eta_next
        if done:
            converged = True
            break
    q = resolvent_f(resolvent, instance.op, instance.y, eta)
    w = eta - config.sigma * q
    final = SolverState(eta=eta, q=q, w=w, p=q.copy(), x=w.copy(), k=k)
    return SolverResult(
        estimate=q, x_final=w.copy(), state=final, trace=trace, converged=converged, n_iter=k
    )


def run_deq(
    instance: ProblemInstance,
    denoiser,
    config: SolverConfig | None = None,
    x0: np.ndarray | None = None,
    diagnostics: bool = False,
    callback=None,
) -> SolverResult:
    """PR iteration with the proximal step replaced by a learned denoiser.

    ``denoiser`` is any callable on length-2N real embeddings (a loaded
    network, or a closed-form plug). Damping and max_iter act as
    safeguards since nonexpansiveness is only approximate for a trained
    network; the trace's residual ratios are the per-step contraction
    diagnostic.
    """
    if config is None:
        config = SolverConfig(sigma=instance.sigma, mode="deq")
    two_n = 2 * instance.op.n_complex
    if isinstance(denoiser, ProxOperator):
        prox = denoiser
    else:
        prox = DenoiserProx(denoiser)
    expected = getattr(denoiser, "expected_len", None) or getattr(prox, "expected_len", None)
    if expected is not None and expected != two_n:
        raise ValidationError(
            f"denoiser expects embeddings of length {expected}, instance has {two_n}"
        )
    result = _run_loop(instance, prox, config, x0, callback)
    if diagnostics:
        result.trace.alpha = max(linear_term_norms(instance, config.sigma))
        ratios = result.trace.residual_ratios()
        result.trace.beta = float(np.max(ratios)) if ratios.size else None
    return result


def linear_term_norms(instance: ProblemInstance, sigma: float) -> tuple[float, float, float]:
    """Spectral norms of the three affine steps around the proximal one.

    Step 1 maps eta to the prox input (2 q(eta) - eta/sigma); steps 2 and 3
    scale the prox output by sigma and the (x - w) correction by 2. Dense
    eigendecomposition of the normal matrix; diagnostic use only.
    """
    a = instance.op.a_real
    evals = np.linalg.eigvalsh(a.T @ a)
    # Jacobian of step 1: (2 sigma (A^T A + sigma I)^{-1} - I) / sigma
    j1 = np.max(np.abs(2.0 * sigma / (evals + sigma) - 1.0)) / sigma
    return (float(j1), float(sigma), 2.0)
