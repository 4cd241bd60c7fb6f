"""Compare the compiled kernel backend against the NumPy reference.

Times the two hot kernels (3x3 conv forward, soft threshold) and one
end-to-end denoiser forward at several problem sizes, and checks agreement
while at it. Run from the repo root:

    python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from prden.denoiser import DenoiserNetwork, canonical_tensor_shapes
from prden.kernels import _reference

try:
    from prden.kernels import _native
except ImportError:
    _native = None


def timeit(fn, repeats=20):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best * 1e3  # ms


def forward_with(backend, net, z):
    """Denoiser forward wired to an explicit backend module."""
    import prden.denoiser as dn
    import prden.kernels as kn

    saved = kn.conv3x3
    kn.conv3x3 = backend.conv3x3
    try:
        return dn.forward(net, z)
    finally:
        kn.conv3x3 = saved


def main():
    backends = [("reference", _reference)]
    if _native is not None:
        backends.append(("native", _native))
    else:
        print("native backend not built (python setup.py build_ext --inplace)")
    rng = np.random.default_rng(0)

    print(f"{'kernel':<28} " + " ".join(f"{name:>12}" for name, _ in backends) + "   speedup")
    for n_side in (8, 16, 32):
        x = rng.standard_normal((64, n_side, n_side))
        w = rng.standard_normal((64, 64, 3, 3))
        b = rng.standard_normal(64)
        times = []
        outs = []
        for _, mod in backends:
            times.append(timeit(lambda m=mod: m.conv3x3(x, w, b)))
            outs.append(backends[len(outs)][1].conv3x3(x, w, b))
        if len(outs) == 2:
            err = np.max(np.abs(outs[0] - outs[1]))
            assert err <= 1e-10, f"backend mismatch: {err}"
        ratio = times[0] / times[-1]
        row = " ".join(f"{t:>10.3f}ms" for t in times)
        print(f"{'conv3x3 64ch ' + str(n_side) + 'x' + str(n_side):<28} {row}   {ratio:5.1f}x")

    for size in (128, 2048, 65536):
        z = rng.standard_normal(size)
        times = [timeit(lambda m=mod: m.soft_threshold(z, 0.3), repeats=200) for _, mod in backends]
        if len(backends) == 2:
            a = backends[0][1].soft_threshold(z, 0.3)
            c = backends[1][1].soft_threshold(z, 0.3)
            assert np.array_equal(a, c)
        ratio = times[0] / times[-1]
        row = " ".join(f"{t:>10.4f}ms" for t in times)
        print(f"{'soft_threshold n=' + str(size):<28} {row}   {ratio:5.1f}x")

    for n in (64, 1024):
        shapes = canonical_tensor_shapes()
        weights = {k: 0.05 * rng.standard_normal(s) for k, s in shapes.items()}
        net = DenoiserNetwork(n=n, weights=weights)
        z = rng.standard_normal(2 * n)
        times = [timeit(lambda m=mod: forward_with(m, net, z), repeats=5) for _, mod in backends]
        ratio = times[0] / times[-1]
        row = " ".join(f"{t:>10.3f}ms" for t in times)
        print(f"{'denoiser forward N=' + str(n):<28} {row}   {ratio:5.1f}x")


if __name__ == "__main__":
    main()
