"""Pure-NumPy reference implementations of the hot kernels.

These define the semantics; the compiled backend in ``_native.pyx`` must
agree with them (bit-exactly for elementwise ops, to float associativity
for the convolution reductions).
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "reference"


def soft_threshold(x: np.ndarray, t: float, out: np.ndarray | None = None) -> np.ndarray:
    """Elementwise ``sign(x) * max(|x| - t, 0)``; ``t`` must be >= 0."""
    x = np.asarray(x, dtype=np.float64)
    if out is None:
        out = np.empty_like(x)
    np.abs(x, out=out)
    out -= t
    np.maximum(out, 0.0, out=out)
    out *= np.sign(x)
    return out


def conv3x3(x: np.ndarray, w: np.ndarray, b: np.ndarray, relu: bool = False) -> np.ndarray:
    """3x3 same-padding convolution, stride 1.

    Parameters
    ----------
    x : (C_in, H, W) float64
    w : (C_out, C_in, 3, 3) float64
    b : (C_out,) float64
    relu : apply max(., 0) to the output in place.

    Returns
    -------
    (C_out, H, W) float64
    """
    c_in, h, wd = x.shape
    c_out = w.shape[0]
    xp = np.zeros((c_in, h + 2, wd + 2), dtype=np.float64)
    xp[:, 1:-1, 1:-1] = x
    # im2col: one GEMM over all 9 taps
    cols = np.empty((c_in, 3, 3, h, wd), dtype=np.float64)
    for di in range(3):
        for dj in range(3):
            cols[:, di, dj] = xp[:, di : di + h, dj : dj + wd]
    out = w.reshape(c_out, c_in * 9) @ cols.reshape(c_in * 9, h * wd)
    out += b[:, None]
    out = out.reshape(c_out, h, wd)
    if relu:
        np.maximum(out, 0.0, out=out)
    return out
