"""Forward-only runtime for the residual denoiser network.

Architecture (fixed): head 3x3 conv (2 -> 64), four residual blocks, each
conv/relu/conv/relu with a skip add (64 maps throughout), tail 3x3 conv
(64 -> 2), and a global residual add, all stride 1 with zero padding 1.
A real embedding of length 2N maps to a 2 x sqrt(N) x sqrt(N) image:
channel 0 the real plane, channel 1 the imaginary plane, antenna n at
(row, col) = (n // sqrt(N), n % sqrt(N)). A per-channel affine
normalization (constants stored in the weight file) is applied before the
head and inverted after the global residual, so the trainable part sees
standardized statistics.

Weight file layout (little-endian):

    magic "PRDW" (4 bytes) | version u32 = 1 | N u32 | tensor_count u32 |
    per tensor: name_len u16 | name UTF-8 | rank u8 | dims u32 x rank |
                f32 data row-major |
    trailer: sigma f64 | norm_mean f32 x 2 | norm_scale f32 x 2

Conv weights are stored [out_ch, in_ch, kh, kw], biases [out_ch]. Tensors
are name-keyed; write order is canonical but loaders accept any order.
Weights are f32 on disk and promoted to f64 for computation.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ValidationError

__all__ = [
    "DenoiserNetwork",
    "canonical_tensor_shapes",
    "load_weights",
    "save_weights",
    "read_weight_header",
    "identity_network",
    "forward",
    "empirical_lipschitz",
    "N_BLOCKS",
    "N_FEATURES",
]

MAGIC = b"PRDW"
VERSION = 1
N_BLOCKS = 4
N_FEATURES = 64


def canonical_tensor_shapes(features: int = N_FEATURES, blocks: int = N_BLOCKS) -> dict:
    """Ordered name -> shape map of every tensor the network owns."""
    shapes = {"head.w": (features, 2, 3, 3), "head.b": (features,)}
    for i in range(blocks):
        for j in range(2):
            shapes[f"block{i}.conv{j}.w"] = (features, features, 3, 3)
            shapes[f"block{i}.conv{j}.b"] = (features,)
    shapes["tail.w"] = (2, features, 3, 3)
    shapes["tail.b"] = (2,)
    return shapes


@dataclass
class DenoiserNetwork:
    """Loaded network: promoted weights plus normalization metadata."""

    n: int  # complex dimension N (perfect square)
    weights: dict  # name -> float64 ndarray
    sigma: float = 1.0  # splitting parameter the net was trained at
    norm_mean: np.ndarray = None
    norm_scale: np.ndarray = None

    def __post_init__(self):
        side = math.isqrt(self.n)
        if side * side != self.n:
            raise ValidationError(f"antenna count {self.n} is not a perfect square")
        if self.norm_mean is None:
            self.norm_mean = np.zeros(2)
        if self.norm_scale is None:
            self.norm_scale = np.ones(2)
        self.norm_mean = np.asarray(self.norm_mean, dtype=np.float64).reshape(2)
        self.norm_scale = np.asarray(self.norm_scale, dtype=np.float64).reshape(2)
        if np.any(self.norm_scale == 0):
            raise ValidationError("normalization scale must be nonzero")
        shapes = canonical_tensor_shapes()
        missing = sorted(set(shapes) - set(self.weights))
        if missing:
            raise ValidationError(f"missing tensors: {', '.join(missing)}")
        extra = sorted(set(self.weights) - set(shapes))
        if extra:
            raise ValidationError(f"unexpected tensors: {', '.join(extra)}")
        for name, shape in shapes.items():
            got = self.weights[name].shape
            if got != shape:
                raise ValidationError(f"tensor {name} has shape {got}, expected {shape}")

    @property
    def expected_len(self) -> int:
        return 2 * self.n

    def __call__(self, z: np.ndarray) -> np.ndarray:
        return forward(self, z)


def identity_network(n: int, sigma: float = 1.0) -> DenoiserNetwork:
    """All-zero weights: the forward pass is exactly the identity."""
    weights = {name: np.zeros(shape) for name, shape in canonical_tensor_shapes().items()}
    return DenoiserNetwork(n=n, weights=weights, sigma=sigma)


def forward(net: DenoiserNetwork, z: np.ndarray) -> np.ndarray:
    """Run the network on a real embedding of length 2N."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (2 * net.n,):
        raise ValidationError(f"input has shape {z.shape}, expected ({2 * net.n},)")
    side = math.isqrt(net.n)
    x = z.reshape(2, side, side)  # [Re plane; Im plane], row-major antennas
    u = (x - net.norm_mean[:, None, None]) / net.norm_scale[:, None, None]
    w = net.weights
    v = kernels.conv3x3(u, w["head.w"], w["head.b"])
    for i in range(N_BLOCKS):
        t = kernels.conv3x3(v, w[f"block{i}.conv0.w"], w[f"block{i}.conv0.b"], relu=True)
        t = kernels.conv3x3(t, w[f"block{i}.conv1.w"], w[f"block{i}.conv1.b"], relu=True)
        v = v + t
    tail = kernels.conv3x3(v, w["tail.w"], w["tail.b"])
    out = u + tail  # global residual in normalized space
    out = out * net.norm_scale[:, None, None] + net.norm_mean[:, None, None]
    return out.reshape(2 * net.n)


def save_weights(path, net: DenoiserNetwork) -> None:
    """Serialize in canonical tensor order."""
    with open(path, "wb") as fh:
        shapes = canonical_tensor_shapes()
        fh.write(struct.pack("<4sIII", MAGIC, VERSION, net.n, len(shapes)))
        for name in shapes:
            data = np.ascontiguousarray(net.weights[name], dtype="<f4")
            raw = name.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<B", data.ndim))
            fh.write(struct.pack(f"<{data.ndim}I", *data.shape))
            fh.write(data.tobytes())
        fh.write(struct.pack("<d", float(net.sigma)))
        fh.write(np.asarray(net.norm_mean, dtype="<f4").tobytes())
        fh.write(np.asarray(net.norm_scale, dtype="<f4").tobytes())


def read_weight_header(path) -> dict:
    with open(path, "rb") as fh:
        raw = fh.read(16)
    if len(raw) < 16:
        raise ValidationError(f"{path}: truncated header")
    magic, version, n, count = struct.unpack("<4sIII", raw)
    if magic != MAGIC:
        raise ValidationError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise ValidationError(f"{path}: unsupported version {version}")
    return {"n": n, "tensor_count": count}


def load_weights(path, expect_n: int | None = None) -> DenoiserNetwork:
    """Load and fully validate a weight file.

    Distinct failures: bad magic/version, truncation (names the tensor
    being read), name-set mismatch, per-tensor shape mismatch, and an N
    that disagrees with ``expect_n``.
    """
    header = read_weight_header(path)
    with open(path, "rb") as fh:
        buf = fh.read()
    n, count = header["n"], header["tensor_count"]
    if expect_n is not None and n != expect_n:
        raise ValidationError(f"{path}: weight file is for N={n}, expected N={expect_n}")
    off = 16
    weights = {}
    for _ in range(count):
        name = "<name>"
        try:
            (name_len,) = struct.unpack_from("<H", buf, off)
            off += 2
            name = buf[off : off + name_len].decode("utf-8")
            if len(buf) < off + name_len:
                raise struct.error("name")
            off += name_len
            (rank,) = struct.unpack_from("<B", buf, off)
            off += 1
            dims = struct.unpack_from(f"<{rank}I", buf, off)
            off += 4 * rank
            size = int(np.prod(dims, dtype=np.int64)) if rank else 1
            blob = np.frombuffer(buf, dtype="<f4", count=size, offset=off)
            off += 4 * size
        except (struct.error, ValueError) as exc:
            raise ValidationError(f"{path}: truncated while reading tensor {name!r}") from exc
        weights[name] = blob.astype(np.float64).reshape(dims)
    try:
        (sigma,) = struct.unpack_from("<d", buf, off)
        norm_mean = np.frombuffer(buf, dtype="<f4", count=2, offset=off + 8).astype(np.float64)
        norm_scale = np.frombuffer(buf, dtype="<f4", count=2, offset=off + 16).astype(np.float64)
    except (struct.error, ValueError) as exc:
        raise ValidationError(f"{path}: truncated metadata trailer") from exc
    if off + 24 != len(buf):
        raise ValidationError(f"{path}: {len(buf) - off - 24} trailing bytes after metadata")
    return DenoiserNetwork(
        n=n, weights=weights, sigma=sigma, norm_mean=norm_mean, norm_scale=norm_scale
    )


def empirical_lipschitz(net, n_pairs: int = 100, rng_seed=0, scale: float = 1.0) -> float:
    """Max sampled ratio ||f(z1) - f(z2)|| / ||z1 - z2|| (diagnostic only)."""
    if n_pairs < 1:
        raise ValidationError(f"need at least one pair, got {n_pairs}")
    rng = np.random.default_rng(rng_seed)
    length = net.expected_len if hasattr(net, "expected_len") else None
    if length is None:
        raise ValidationError("denoiser does not expose expected_len")
    worst = 0.0
    for _ in range(n_pairs):
        z1 = scale * rng.standard_normal(length)
        z2 = z1 + scale * 10.0 ** rng.uniform(-3, 0) * rng.standard_normal(length)
        d_in = float(np.linalg.norm(z1 - z2))
        if d_in == 0.0:
            continue
        d_out = float(np.linalg.norm(net(z1) - net(z2)))
        worst = max(worst, d_out / d_in)
    return worst
