"""Hot-kernel backend selection.

Two implementations exist for each kernel: a compiled Cython extension
and a NumPy reference. Measured on this artifact's shapes (see
``benchmarks/bench_kernels.py``), the compiled soft threshold wins at
solver sizes (no temporaries, no ufunc dispatch), while the reference
convolution wins everywhere because its im2col + DGEMM route rides
OpenBLAS's hand-tuned FMA kernels, which a portable stencil does not
beat. Defaults follow those measurements per kernel.

Environment overrides: ``PRDN_KERNELS=native|reference|auto`` forces one
backend for everything; ``PRDN_PURE_PYTHON=1`` is an alias for
``reference`` (and is the automatic fallback when the extension was not
built).
"""

import os

from . import _reference

try:
    from . import _native
except ImportError:
    _native = None

_mode = os.environ.get("PRDN_KERNELS", "auto").strip().lower()
if os.environ.get("PRDN_PURE_PYTHON", "0") not in ("", "0"):
    _mode = "reference"
if _mode == "native" and _native is None:
    raise ImportError("PRDN_KERNELS=native but the compiled extension is not built")

if _mode == "reference" or _native is None:
    BACKEND = "reference"
    soft_threshold = _reference.soft_threshold
    conv3x3 = _reference.conv3x3
elif _mode == "native":
    BACKEND = "native"
    soft_threshold = _native.soft_threshold
    conv3x3 = _native.conv3x3
else:  # auto: fastest measured backend per kernel
    BACKEND = "auto(native-softthr,reference-conv)"
    soft_threshold = _native.soft_threshold
    conv3x3 = _reference.conv3x3

__all__ = ["BACKEND", "soft_threshold", "conv3x3"]
