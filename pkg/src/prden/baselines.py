"""Reference estimators: LS, sample-covariance LMMSE, ISTA, FISTA.

All operate on the real-form problem. FISTA/ISTA minimize the same
regularized objective as the PR solver (lam * ||h||_1 + 1/2 ||y - A h||^2)
and serve as its independent optimization oracle.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ValidationError
from .prox import soft_threshold
from .realform import ProblemInstance

__all__ = [
    "CovarianceModel",
    "fit_covariance",
    "ls_estimate",
    "lmmse_estimate",
    "ista",
    "fista",
    "lipschitz_constant",
    "IterTrace",
]


@dataclass
class CovarianceModel:
    """Sample second moment E[h h^T] in real form (2N x 2N)."""

    r_h: np.ndarray
    n_fit: int
    ridge: float = 0.0


def fit_covariance(samples: np.ndarray, ridge: float = 0.0) -> CovarianceModel:
    """Fit the uncentered sample second moment from rows of real embeddings."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 2 or samples.shape[0] < 1:
        raise ValidationError(f"need a (n_samples, 2N) array, got shape {samples.shape}")
    n = samples.shape[0]
    r = samples.T @ samples / n
    r = 0.5 * (r + r.T)  # exact symmetry against accumulation order
    return CovarianceModel(r_h=r, n_fit=n, ridge=ridge)


def ls_estimate(instance: ProblemInstance) -> np.ndarray:
    """Minimum-norm least-squares solution of A h = y."""
    sol, *_ = np.linalg.lstsq(instance.op.a_real, instance.y, rcond=None)
    return sol


def lmmse_estimate(instance: ProblemInstance, cov: CovarianceModel) -> np.ndarray:
    """Linear MMSE: R A^T (A R A^T + noise_var I)^{-1} y.

    The colored combined noise is proxied by its average per-component
    variance (instance.noise_var). Falls back to a ridge-stabilized solve
    with a warning when the inner matrix is numerically singular.
    """
    a = instance.op.a_real
    r = cov.r_h
    if cov.ridge > 0:
        r = r + cov.ridge * np.eye(r.shape[0])
    ra = r @ a.T
    inner = a @ ra + instance.noise_var * np.eye(a.shape[0])
    try:
        sol = scipy.linalg.solve(inner, instance.y, assume_a="pos")
    except (scipy.linalg.LinAlgError, np.linalg.LinAlgError):
        bump = 1e-10 * max(1.0, float(np.trace(inner)) / inner.shape[0])
        warnings.warn(f"LMMSE inner matrix singular; retrying with ridge {bump:.1e}")
        sol = scipy.linalg.solve(inner + bump * np.eye(inner.shape[0]), instance.y, assume_a="pos")
    return ra @ sol


def lipschitz_constant(a: np.ndarray, max_iter: int = 100, tol: float = 1e-6) -> float:
    """Largest eigenvalue of A^T A by power iteration."""
    rng = np.random.default_rng(0)
    v = rng.standard_normal(a.shape[1])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = a.T @ (a @ v)
        lam_new = float(np.linalg.norm(w))
        if lam_new == 0.0:
            return 0.0
        v = w / lam_new
        if abs(lam_new - lam) <= tol * lam_new:
            lam = lam_new
            break
        lam = lam_new
    return lam


@dataclass
class IterTrace:
    objective: list = field(default_factory=list)
    n_iter: int = 0
    converged: bool = False


def _prox_gradient(
    instance: ProblemInstance,
    lam: float,
    max_iter: int,
    tol: float,
    accelerated: bool,
    callback=None,
) -> tuple[np.ndarray, IterTrace]:
    if lam < 0:
        raise ValidationError(f"lambda must be nonnegative, got {lam}")
    a = instance.op.a_real
    y = instance.y
    big_l = lipschitz_constant(a)
    if big_l == 0.0:
        big_l = 1.0  # A = 0: any step works, objective is separable
    step = 1.0 / big_l
    x = np.zeros(a.shape[1])
    z = x
    t = 1.0
    trace = IterTrace()
    converged = False
    k = 0
    for k in range(1, max_iter + 1):
        grad = a.T @ (a @ z - y)
        x_new = soft_threshold(z - step * grad, lam * step)
        if accelerated:
            t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            z = x_new + ((t - 1.0) / t_new) * (x_new - x)
            t = t_new
        else:
            z = x_new
        resid = instance.y - a @ x_new
        trace.objective.append(lam * float(np.sum(np.abs(x_new))) + 0.5 * float(resid @ resid))
        if callback is not None:
            callback(x_new)
        done = np.linalg.norm(x_new - x) <= tol * (1.0 + np.linalg.norm(x))
        x = x_new
        if done:
            converged = True
            break
    trace.n_iter = k
    trace.converged = converged
    return x, trace


def fista(
    instance: ProblemInstance,
    lam: float,
    max_iter: int = 2000,
    tol: float = 1e-10,
    callback=None,
) -> tuple[np.ndarray, IterTrace]:
    """Accelerated proximal gradient on the regularized objective."""
    return _prox_gradient(instance, lam, max_iter, tol, accelerated=True, callback=callback)


def ista(
    instance: ProblemInstance,
    lam: float,
    max_iter: int = 2000,
    tol: float = 1e-10,
    callback=None,
) -> tuple[np.ndarray, IterTrace]:
    """Unaccelerated proximal gradient (one step = prox of a gradient step)."""
    return _prox_gradient(instance, lam, max_iter, tol, accelerated=False, callback=callback)
