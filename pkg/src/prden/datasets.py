"""Binary dataset files: shared operator plus per-sample channel pairs.

Layout (little-endian):

    magic "PRDN" (4 bytes) | version u32 = 1 | N u32 | M u32 |
    n_samples u32 | flags u32 |
    Re(A) f64 row-major (M x N) | Im(A) f64 row-major (M x N) |
    per sample: h (2N f64, Re;Im) | y (2M f64) | snr_db f64

N and M are complex dimensions. Flag bit 0 records that the operator was
assembled as per-slot combining blocks times the unitary N-point DFT, in
which case the combiner is recoverable as A F^H for re-noising; bits 8+
then hold the slot count. The stored h is the problem-domain unknown (the
pre-DFT representation whose image under A is the physically combined
array channel). ``snr_db = +inf`` marks noiseless samples (y = A h).
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .channel import ArrayGeometry, ChannelConfig, PilotConfig, add_noise, generate_channel, generate_pilot_matrices, unitary_dft
from .errors import ValidationError
from .realform import MeasurementOperator, build_real_operator

__all__ = [
    "Dataset",
    "FLAG_DFT_PILOT",
    "write_dataset",
    "read_dataset",
    "read_header",
    "generate_dataset",
    "predicted_size",
]

MAGIC = b"PRDN"
VERSION = 1
FLAG_DFT_PILOT = 1
_SLOTS_SHIFT = 8
_HEADER = struct.Struct("<4s5I")


@dataclass
class Dataset:
    op: MeasurementOperator
    h: np.ndarray  # (n_samples, 2N)
    y: np.ndarray  # (n_samples, 2M)
    snr_db: np.ndarray  # (n_samples,)
    flags: int = 0

    @property
    def n_samples(self) -> int:
        return self.h.shape[0]


def predicted_size(n: int, m: int, n_samples: int) -> int:
    """Exact byte size of a file with the given complex dims and count."""
    return _HEADER.size + 2 * m * n * 8 + n_samples * (2 * n + 2 * m + 1) * 8


def write_dataset(path, dataset: Dataset) -> None:
    op = dataset.op
    n, m = op.n_complex, op.m_complex
    ns = dataset.n_samples
    if dataset.h.shape != (ns, 2 * n) or dataset.y.shape != (ns, 2 * m):
        raise ValidationError(
            f"sample arrays {dataset.h.shape}/{dataset.y.shape} inconsistent with N={n}, M={m}"
        )
    flags = dataset.flags
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, n, m, ns, flags))
        fh.write(np.ascontiguousarray(op.a_complex.real, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(op.a_complex.imag, dtype="<f8").tobytes())
        for i in range(ns):
            fh.write(np.ascontiguousarray(dataset.h[i], dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(dataset.y[i], dtype="<f8").tobytes())
            fh.write(struct.pack("<d", float(dataset.snr_db[i])))


def read_header(path) -> dict:
    """Parse and validate the fixed header only."""
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
    if len(raw) < _HEADER.size:
        raise ValidationError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, version, n, m, ns, flags = _HEADER.unpack(raw)
    if magic != MAGIC:
        raise ValidationError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise ValidationError(f"{path}: unsupported version {version}")
    return {
        "n": n,
        "m": m,
        "n_samples": ns,
        "flags": flags,
        "dft_pilot": bool(flags & FLAG_DFT_PILOT),
        "n_slots": flags >> _SLOTS_SHIFT,
        "predicted_size": predicted_size(n, m, ns),
    }


def read_dataset(path) -> Dataset:
    header = read_header(path)
    n, m, ns, flags = header["n"], header["m"], header["n_samples"], header["flags"]
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) != header["predicted_size"]:
        raise ValidationError(
            f"{path}: size {len(buf)} != header-predicted {header['predicted_size']}"
        )
    off = _HEADER.size
    block = m * n * 8
    a_re = np.frombuffer(buf, dtype="<f8", count=m * n, offset=off).reshape(m, n)
    a_im = np.frombuffer(buf, dtype="<f8", count=m * n, offset=off + block).reshape(m, n)
    off += 2 * block
    combiner = None
    n_slots = 1
    if flags & FLAG_DFT_PILOT:
        n_slots = flags >> _SLOTS_SHIFT
        if n_slots < 1 or m % n_slots != 0:
            raise ValidationError(f"{path}: invalid slot count {n_slots} for M={m}")
        combiner = (a_re + 1j * a_im) @ unitary_dft(n).conj().T
    op = build_real_operator(a_re, a_im, combiner=combiner, n_slots=n_slots)
    h = np.empty((ns, 2 * n))
    y = np.empty((ns, 2 * m))
    snr = np.empty(ns)
    rec = (2 * n + 2 * m + 1) * 8
    for i in range(ns):
        base = off + i * rec
        h[i] = np.frombuffer(buf, dtype="<f8", count=2 * n, offset=base)
        y[i] = np.frombuffer(buf, dtype="<f8", count=2 * m, offset=base + 2 * n * 8)
        (snr[i],) = struct.unpack_from("<d", buf, base + (2 * n + 2 * m) * 8)
    return Dataset(op=op, h=h, y=y, snr_db=snr, flags=flags)


def make_sample(
    geom: ArrayGeometry,
    cfg: ChannelConfig,
    op: MeasurementOperator,
    f_h: np.ndarray,
    snr_db: float,
    seed: int,
    index: int,
) -> tuple[np.ndarray, np.ndarray]:
    """One (h, y) pair from the per-sample derived seed (pure function)."""
    rng = np.random.default_rng([seed, 1, index])
    h_spatial, _ = generate_channel(geom, cfg, rng)
    h_problem = f_h @ h_spatial
    y, _ = add_noise(op, h_problem, snr_db, rng_seed=[seed, 2, index])
    h_emb = np.concatenate([h_problem.real, h_problem.imag])
    return h_emb, y


def generate_dataset(
    geom: ArrayGeometry,
    cfg: ChannelConfig,
    pilot: PilotConfig,
    n_samples: int,
    snr_db: float,
    path,
    seed: int = 0,
    threads: int = 1,
    pilot_seed: int | None = None,
) -> Dataset:
    """Generate and write a dataset; returns the in-memory copy.

    The master seed drives the pilot phases and the per-sample derived
    seeds (seed, sample_index), so output is bit-identical for any thread
    count. ``pilot_seed`` pins the combining matrices independently of the
    master seed, so train/val/test splits can share one measurement
    operator (fixed BS hardware) while drawing fresh channels and noise.
    """
    if n_samples < 0:
        raise ValidationError(f"n_samples must be >= 0, got {n_samples}")
    op_seed = [seed, 0] if pilot_seed is None else [pilot_seed, 0]
    op = generate_pilot_matrices(geom, PilotConfig(pilot.p_slots, pilot.n_rf, rng_seed=op_seed))
    f_h = unitary_dft(geom.n_antennas).conj().T
    n, m = op.n_complex, op.m_complex
    h = np.empty((n_samples, 2 * n))
    y = np.empty((n_samples, 2 * m))

    def one(i):
        return make_sample(geom, cfg, op, f_h, snr_db, seed, i)

    if threads > 1 and n_samples > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(n_samples)))
    else:
        results = [one(i) for i in range(n_samples)]
    for i, (hi, yi) in enumerate(results):
        h[i] = hi
        y[i] = yi
    flags = FLAG_DFT_PILOT | (pilot.p_slots << _SLOTS_SHIFT)
    ds = Dataset(op=op, h=h, y=y, snr_db=np.full(n_samples, snr_db), flags=flags)
    write_dataset(path, ds)
    return ds
