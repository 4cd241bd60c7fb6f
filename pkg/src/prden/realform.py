"""Real-form embedding of complex measurement equations.

Complex vectors are plain ``numpy`` complex arrays. Their real form stacks
real parts above imaginary parts (``[Re; Im]``, length 2N), and a complex
matrix ``A`` becomes the 2M x 2N block matrix

    [[Re(A), -Im(A)],
     [Im(A),  Re(A)]]

so that ``realform(A) @ embed(h) == embed(A @ h)``. Every module in the
package uses this stacking order; mixing conventions corrupts results
silently, so all real-form construction happens here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

__all__ = [
    "embed_complex",
    "extract_complex",
    "MeasurementOperator",
    "build_real_operator",
    "apply_operator",
    "ProblemInstance",
]


def embed_complex(v: np.ndarray) -> np.ndarray:
    """Embed a complex vector as ``[Re(v); Im(v)]`` (float64, length 2N)."""
    v = np.asarray(v)
    return np.concatenate([np.real(v), np.imag(v)]).astype(np.float64, copy=False)


def extract_complex(x: np.ndarray) -> np.ndarray:
    """Inverse of :func:`embed_complex`: real length-2N vector to complex length-N."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size % 2 != 0:
        raise ValidationError(f"real embedding must be 1-D of even length, got shape {x.shape}")
    n = x.size // 2
    return x[:n] + 1j * x[n:]


@dataclass(frozen=True)
class MeasurementOperator:
    """Overall combining matrix in real form, plus its complex origin.

    ``combiner`` holds the stacked per-slot combining blocks (the complex
    matrix applied to the per-slot antenna noise; row block ``p`` of size
    M/n_slots acts on that slot's own noise vector). It is ``None`` for
    operators without slot structure, in which case noise is modeled as
    white on the measurement.
    """

    a_real: np.ndarray  # (2M, 2N) float64
    a_complex: np.ndarray  # (M, N) complex128
    m_complex: int
    n_complex: int
    combiner: np.ndarray | None = None  # (M, N) complex128
    n_slots: int = 1

    @property
    def shape_real(self) -> tuple[int, int]:
        return self.a_real.shape


def build_real_operator(
    a_re: np.ndarray,
    a_im: np.ndarray,
    combiner: np.ndarray | None = None,
    n_slots: int = 1,
) -> MeasurementOperator:
    """Assemble the 2M x 2N real block operator from Re(A) and Im(A)."""
    a_re = np.asarray(a_re, dtype=np.float64)
    a_im = np.asarray(a_im, dtype=np.float64)
    if a_re.shape != a_im.shape or a_re.ndim != 2:
        raise ValidationError(
            f"real and imaginary blocks must share an MxN shape, got {a_re.shape} vs {a_im.shape}"
        )
    m, n = a_re.shape
    a_real = np.block([[a_re, -a_im], [a_im, a_re]])
    a_complex = a_re + 1j * a_im
    return MeasurementOperator(
        a_real=a_real,
        a_complex=a_complex,
        m_complex=m,
        n_complex=n,
        combiner=combiner,
        n_slots=n_slots,
    )


def apply_operator(op: MeasurementOperator, x: np.ndarray) -> np.ndarray:
    """Apply the real-form operator to a real embedding (length 2N -> 2M)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (2 * op.n_complex,):
        raise ValidationError(
            f"operand has shape {x.shape}, expected ({2 * op.n_complex},)"
        )
    return op.a_real @ x


@dataclass(frozen=True)
class ProblemInstance:
    """One regularized estimation problem: min_h g(h) + 1/2 ||y - A h||^2."""

    op: MeasurementOperator
    y: np.ndarray  # (2M,) real embedding of the measurement
    lam: float = 0.0  # L1 weight when g = lam * ||.||_1
    sigma: float = 1.0  # splitting parameter
    noise_var: float = 0.0  # avg variance per real component of the combined noise

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValidationError(f"sigma must be positive, got {self.sigma}")
        if self.lam < 0:
            raise ValidationError(f"lambda must be nonnegative, got {self.lam}")
        if self.noise_var < 0:
            raise ValidationError(f"noise_var must be nonnegative, got {self.noise_var}")
        y = np.asarray(self.y, dtype=np.float64)
        if y.shape != (2 * self.op.m_complex,):
            raise ValidationError(
                f"y has shape {y.shape}, expected ({2 * self.op.m_complex},)"
            )
        object.__setattr__(self, "y", y)
