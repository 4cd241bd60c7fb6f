"""Proximal operators, resolvents, and reflected resolvents.

The dual-side resolvents never materialize conjugate functions: both are
computed from primal proximal operators through the Moreau decomposition

    prox_{s f}(x) + s * prox_{f*/s}(x/s) = x.

With M2 = subgradient of f* (f the quadratic data term) and M1 =
subgradient of g* composed with negation, the resolvents reduce to

    J_{s M2}(eta) = eta - s * q,   q = (A^T A + s I)^{-1} (A^T y + eta)
    J_{s M1}(v)   = v + s * prox_{g/s}(-v/s)

and the reflected resolvents are R = 2J - I. The scale convention is the
single easiest thing to get wrong here: ``prox_{g/s}`` with g = lam*||.||_1
soft-thresholds at lam/s, not lam*s.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from . import kernels
from .errors import NumericError, ValidationError
from .realform import MeasurementOperator

__all__ = [
    "soft_threshold",
    "ProxOperator",
    "ZeroRegularizer",
    "L1SoftThreshold",
    "DenoiserProx",
    "QuadraticResolvent",
    "resolvent_f",
    "reflected_resolvent_M2",
    "reflected_resolvent_M1",
    "moreau_check",
]


def soft_threshold(z: np.ndarray, t: float) -> np.ndarray:
    """Elementwise ``sign(z) * max(|z| - t, 0)``."""
    if t < 0:
        raise ValidationError(f"threshold must be nonnegative, got {t}")
    return kernels.soft_threshold(np.asarray(z, dtype=np.float64), float(t))


class ProxOperator:
    """Interface for a regularizer g through its proximal operator.

    ``evaluate(z, scale)`` computes ``prox_{scale * g}(z)``. Convex
    implementations additionally expose the proximal operator of the
    conjugate g* (an independent closed form, used as the oracle in
    Moreau-identity checks) and the function value of g itself.
    """

    convex: bool = False

    def evaluate(self, z: np.ndarray, scale: float) -> np.ndarray:
        raise NotImplementedError

    def value(self, z: np.ndarray) -> float:
        """g(z); NaN when g has no closed form (learned denoisers)."""
        return float("nan")

    def conjugate_prox(self, z: np.ndarray, scale: float) -> np.ndarray:
        """prox_{scale * g*}(z) from a closed form independent of evaluate()."""
        raise ValidationError(f"{type(self).__name__} has no closed-form conjugate")


class ZeroRegularizer(ProxOperator):
    """g = 0: the prox is the identity, the conjugate prox is zero."""

    convex = True

    def evaluate(self, z, scale):
        return np.asarray(z, dtype=np.float64).copy()

    def value(self, z):
        return 0.0

    def conjugate_prox(self, z, scale):
        # g* is the indicator of {0}
        return np.zeros_like(np.asarray(z, dtype=np.float64))


class L1SoftThreshold(ProxOperator):
    """g = lam * ||.||_1; prox is the soft threshold at lam * scale."""

    convex = True

    def __init__(self, lam: float):
        if lam < 0:
            raise ValidationError(f"lambda must be nonnegative, got {lam}")
        self.lam = float(lam)

    def evaluate(self, z, scale):
        if scale <= 0:
            raise ValidationError(f"prox scale must be positive, got {scale}")
        return soft_threshold(z, self.lam * scale)

    def value(self, z):
        return self.lam * float(np.sum(np.abs(z)))

    def conjugate_prox(self, z, scale):
        # g* is the indicator of the L-inf ball of radius lam, for any scale
        return np.clip(np.asarray(z, dtype=np.float64), -self.lam, self.lam)


class DenoiserProx(ProxOperator):
    """Wraps a learned denoiser (any callable on real embeddings) as a prox.

    The network replaces ``prox_{g/sigma}`` at the sigma it was trained
    for; the scale argument is ignored. Not convex: excluded from the
    raw-iteration path and from Moreau/nonexpansiveness guarantees.
    """

    convex = False

    def __init__(self, fn, expected_len: int | None = None):
        self.fn = fn
        self.expected_len = expected_len

    def evaluate(self, z, scale):
        return self.fn(z)


class QuadraticResolvent:
    """Cached factorization for solving ``(A^T A + sigma I) x = b``.

    Strategies: ``direct`` Cholesky of the 2N x 2N normal matrix, or
    ``woodbury`` via a Cholesky of ``(A A^T + sigma I)`` (2M x 2M), chosen
    automatically when 2M < 2N. Both are kept so they can cross-validate
    each other.
    """

    def __init__(self, op: MeasurementOperator, sigma: float, strategy: str = "auto"):
        if sigma <= 0:
            raise NumericError(f"sigma must be positive for the resolvent, got {sigma}")
        a = op.a_real
        if not np.all(np.isfinite(a)):
            raise NumericError("operator contains non-finite entries")
        two_m, two_n = a.shape
        if strategy == "auto":
            strategy = "woodbury" if two_m < two_n else "direct"
        if strategy not in ("direct", "woodbury"):
            raise ValidationError(f"unknown resolvent strategy {strategy!r}")
        self.strategy = strategy
        self.sigma = float(sigma)
        self._a = a
        try:
            if strategy == "direct":
                gram = a.T @ a + sigma * np.eye(two_n)
                self._factor = scipy.linalg.cho_factor(gram)
            else:
                gram = a @ a.T + sigma * np.eye(two_m)
                self._factor = scipy.linalg.cho_factor(gram)
        except scipy.linalg.LinAlgError as exc:
            raise NumericError(f"resolvent factorization failed: {exc}") from exc

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Return x with ``(A^T A + sigma I) x = b``."""
        b = np.asarray(b, dtype=np.float64)
        if self.strategy == "direct":
            return scipy.linalg.cho_solve(self._factor, b)
        ab = self._a @ b
        inner = scipy.linalg.cho_solve(self._factor, ab)
        return (b - self._a.T @ inner) / self.sigma


def resolvent_f(
    res: QuadraticResolvent, op: MeasurementOperator, y: np.ndarray, eta: np.ndarray
) -> np.ndarray:
    """q = (A^T A + sigma I)^{-1} (A^T y + eta), i.e. prox_{f/sigma}(eta/sigma)."""
    return res.solve(op.a_real.T @ np.asarray(y, dtype=np.float64) + eta)


def reflected_resolvent_M2(
    res: QuadraticResolvent,
    op: MeasurementOperator,
    y: np.ndarray,
    sigma: float,
    eta: np.ndarray,
) -> np.ndarray:
    """R_{sigma M2}(eta) = eta - 2 sigma q with M2 the dual data-term operator."""
    q = resolvent_f(res, op, y, eta)
    return eta - 2.0 * sigma * q


def reflected_resolvent_M1(prox_g: ProxOperator, sigma: float, v: np.ndarray) -> np.ndarray:
    """R_{sigma M1}(v) = v + 2 sigma prox_{g/sigma}(-v/sigma)."""
    if sigma <= 0:
        raise ValidationError(f"sigma must be positive, got {sigma}")
    v = np.asarray(v, dtype=np.float64)
    return v + 2.0 * sigma * prox_g.evaluate(-v / sigma, 1.0 / sigma)


def moreau_check(prox_g: ProxOperator, z: np.ndarray, sigma: float) -> float:
    """Moreau-identity defect ``||prox_{s g}(z) + s prox_{g*/s}(z/s) - z||``.

    The conjugate prox comes from the operator's independent closed form
    (L-inf ball projection for L1, zero map for g = 0), so the defect
    genuinely cross-checks the two routes rather than restating one.
    """
    if not prox_g.convex:
        raise ValidationError("Moreau identity requires a convex regularizer")
    z = np.asarray(z, dtype=np.float64)
    lhs = prox_g.evaluate(z, sigma) + sigma * prox_g.conjugate_prox(z / sigma, 1.0 / sigma)
    return float(np.linalg.norm(lhs - z))
