"""Hybrid far/near-field channel simulator for a multi-UPA planar array.

Geometry: S uniform planar arrays on a sqrt(S) x sqrt(S) grid, each holding
N/S antennas on a sqrt(N/S) x sqrt(N/S) grid; antennas sit in the z = 0
plane. The channel is a ray sum over one LoS path and L-1 reflected paths;
each ray uses the planar-wavefront response when its source distance
exceeds the Rayleigh distance and the spherical-wavefront response
otherwise.

All generators are pure functions of an explicit RNG (or the seed held in
the config), drawing in a fixed order so results are bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg

from .errors import ValidationError
from .realform import MeasurementOperator, build_real_operator, embed_complex

__all__ = [
    "ArrayGeometry",
    "ChannelConfig",
    "PathParams",
    "PilotConfig",
    "rayleigh_distance",
    "antenna_position",
    "antenna_positions",
    "far_response",
    "near_response",
    "reflection_coeff",
    "path_loss",
    "generate_channel",
    "generate_pilot_matrices",
    "add_noise",
    "unitary_dft",
]

SPEED_OF_LIGHT = 2.998e8  # m/s


def _isqrt_exact(n: int, what: str) -> int:
    r = math.isqrt(n)
    if r * r != n:
        raise ValidationError(f"{what} must be a perfect square, got {n}")
    return r


@dataclass(frozen=True)
class ArrayGeometry:
    """Antenna layout: counts and spacings of the UPA-of-UPAs grid."""

    n_antennas: int = 64  # N
    n_upas: int = 4  # S
    d: float = 5.0e-4  # antenna spacing (m)
    d_upa: float = 5.6e-2  # UPA spacing (m)

    def __post_init__(self):
        _isqrt_exact(self.n_upas, "geometry.n_upas")
        if self.n_antennas % self.n_upas != 0:
            raise ValidationError(
                f"geometry.n_antennas ({self.n_antennas}) not divisible by "
                f"geometry.n_upas ({self.n_upas})"
            )
        _isqrt_exact(self.n_antennas // self.n_upas, "geometry.n_antennas per UPA")

    @property
    def per_upa_side(self) -> int:
        return math.isqrt(self.n_antennas // self.n_upas)

    @property
    def upa_side(self) -> int:
        return math.isqrt(self.n_upas)

    @property
    def grid_side(self) -> int:
        return self.per_upa_side * self.upa_side


@dataclass(frozen=True)
class ChannelConfig:
    """Physical ray-model parameters and draw ranges (defaults: 300 GHz THz
    link, 5 paths, 20 m Rayleigh distance, 30 m LoS)."""

    f_c: float = 300e9  # carrier (Hz)
    c: float = SPEED_OF_LIGHT
    n_paths: int = 5  # L, including the LoS path
    k_abs: float = 0.0033  # molecular absorption (1/m)
    n_t: complex = 2.24 - 0.025j  # refractive index of reflectors
    sigma_rough: float = 8.8e-5  # roughness (m)
    d_rayleigh: float = 20.0  # far/near boundary (m); explicit override
    r1: float = 30.0  # LoS path length (m)
    tau_los: float = 100e-9  # LoS delay (s)
    theta_range: tuple = (-math.pi / 2, math.pi / 2)
    phi_range: tuple = (-math.pi, math.pi)
    phi_in_range: tuple = (0.0, math.pi / 2)
    r_range: tuple = (10.0, 25.0)  # scatterer distance (m)
    tau_range: tuple = (100e-9, 110e-9)
    rng_seed: int = 0

    def __post_init__(self):
        if self.f_c <= 0:
            raise ValidationError(f"carrier frequency must be positive, got {self.f_c}")
        if self.n_paths < 1:
            raise ValidationError(f"need at least one path, got {self.n_paths}")
        if self.d_rayleigh <= 0:
            raise ValidationError(f"Rayleigh distance must be positive, got {self.d_rayleigh}")


@dataclass(frozen=True)
class PathParams:
    """One ray: loss magnitude, angles, distance, delay, reflection."""

    beta: float
    phi: float  # azimuth (rad)
    theta: float  # elevation (rad)
    r: float  # source/scatterer distance (m)
    tau: float  # delay (s)
    gamma: complex  # reflection coefficient (1 for LoS)
    phi_in: float  # incidence angle (rad; 0 for LoS)
    is_los: bool
    is_far: bool


@dataclass(frozen=True)
class PilotConfig:
    """Pilot slots and RF chains; combiners are unit-modulus random-phase,
    the digital combiner is the identity, pilots are 1."""

    p_slots: int = 32  # P
    n_rf: int = 4
    rng_seed: int = 0

    def __post_init__(self):
        if self.p_slots < 1 or self.n_rf < 1:
            raise ValidationError("pilot slots and RF chains must be >= 1")


def rayleigh_distance(aperture_d: float, lambda_c: float) -> float:
    """Far/near boundary D^2 / lambda for aperture D and wavelength lambda."""
    if aperture_d <= 0 or lambda_c <= 0:
        raise ValidationError(
            f"aperture and wavelength must be positive, got {aperture_d}, {lambda_c}"
        )
    return aperture_d * aperture_d / lambda_c


def antenna_position(geom: ArrayGeometry, s1: int, s2: int) -> np.ndarray:
    """Position of grid element (s1, s2), both 1-based in 1..sqrt(N).

    s2 decomposes into (UPA column m2, within-UPA column m1) with the
    within index fastest, and drives the x coordinate; s1 does the same
    for y. Each UPA step advances by (sqrt(N/S) - 1) * d_upa.
    """
    side = geom.grid_side
    q = geom.per_upa_side
    if not (1 <= s1 <= side and 1 <= s2 <= side):
        raise ValidationError(f"antenna index ({s1}, {s2}) outside 1..{side}")
    n2, n1 = divmod(s1 - 1, q)  # y: UPA row, within-UPA row (0-based)
    m2, m1 = divmod(s2 - 1, q)  # x: UPA col, within-UPA col (0-based)
    step_upa = (q - 1) * geom.d_upa
    return np.array([m1 * geom.d + m2 * step_upa, n1 * geom.d + n2 * step_upa, 0.0])


@lru_cache(maxsize=8)
def _antenna_positions_cached(geom: ArrayGeometry) -> np.ndarray:
    side = geom.grid_side
    out = np.empty((geom.n_antennas, 3))
    k = 0
    for s1 in range(1, side + 1):
        for s2 in range(1, side + 1):
            out[k] = antenna_position(geom, s1, s2)
            k += 1
    out.setflags(write=False)
    return out


def antenna_positions(geom: ArrayGeometry) -> np.ndarray:
    """(N, 3) positions in vec order: s1-major, s2 fastest (read-only, cached)."""
    return _antenna_positions_cached(geom)


def _direction(phi: float, theta: float) -> np.ndarray:
    return np.array(
        [math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi), math.cos(theta)]
    )


def far_response(
    geom: ArrayGeometry, phi: float, theta: float, f_c: float, c: float = SPEED_OF_LIGHT
) -> np.ndarray:
    """Planar-wavefront response: entries exp(-j 2 pi (f_c/c) p.(-t)).

    t points from the array toward the source, so the wave propagates
    along -t; this sign makes the planar response the exact r -> infinity
    limit of :func:`near_response` up to a global phase (a spherical
    front ||p - r t|| ~ r - p.t), keeping hybrid channels continuous
    across the far/near boundary.
    """
    p = antenna_positions(geom)
    t = _direction(phi, theta)
    return np.exp(-2j * np.pi * (f_c / c) * (p @ -t))


def near_response(
    geom: ArrayGeometry,
    phi: float,
    theta: float,
    r: float,
    f_c: float,
    c: float = SPEED_OF_LIGHT,
) -> np.ndarray:
    """Spherical-wavefront response: entries exp(-j 2 pi (f_c/c) ||p - r t||)."""
    if r <= 0:
        raise ValidationError(f"source distance must be positive, got {r}")
    p = antenna_positions(geom)
    t = _direction(phi, theta)
    dist = np.linalg.norm(p - r * t, axis=1)
    return np.exp(-2j * np.pi * (f_c / c) * dist)


def reflection_coeff(
    phi_in: float,
    n_t: complex,
    sigma_rough: float,
    f_c: float,
    c: float = SPEED_OF_LIGHT,
    is_los: bool = False,
) -> complex:
    """Rough-surface reflection coefficient; exactly 1 for the LoS path."""
    if is_los:
        return 1.0 + 0.0j
    n_t = complex(n_t)
    phi_ref = np.arcsin(np.complex128(math.sin(phi_in) / n_t))
    cos_in = math.cos(phi_in)
    cos_ref = np.cos(phi_ref)
    fresnel = (cos_in - n_t * cos_ref) / (cos_in + n_t * cos_ref)
    rough = math.exp(
        -(8.0 * math.pi**2 * f_c**2 * sigma_rough**2 * cos_in**2) / (c * c)
    )
    return complex(fresnel * rough)


def path_loss(
    gamma: complex, r1: float, f_c: float, k_abs: float, c: float = SPEED_OF_LIGHT
) -> float:
    """|gamma| * (c / (4 pi f_c r1)) * exp(-k_abs r1 / 2); r1 is the LoS length."""
    if r1 <= 0:
        raise ValidationError(f"LoS path length must be positive, got {r1}")
    return abs(gamma) * (c / (4.0 * math.pi * f_c * r1)) * math.exp(-0.5 * k_abs * r1)


def generate_channel(
    geom: ArrayGeometry, cfg: ChannelConfig, rng: np.random.Generator | None = None
) -> tuple[np.ndarray, list[PathParams]]:
    """Draw one channel: h = sum_l beta_l a_l exp(-j 2 pi f_c tau_l).

    Path 0 is LoS (gamma = 1, fixed r1 and delay); the rest reflect off
    rough surfaces. Draw order per path is fixed (theta, phi, then for
    NLoS phi_in, r, tau) so a given rng state yields bit-identical output.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.rng_seed)
    h = np.zeros(geom.n_antennas, dtype=complex)
    paths = []
    for l in range(cfg.n_paths):
        theta = rng.uniform(*cfg.theta_range)
        phi = rng.uniform(*cfg.phi_range)
        if l == 0:
            phi_in = 0.0
            r = cfg.r1
            tau = cfg.tau_los
            gamma = 1.0 + 0.0j
        else:
            phi_in = rng.uniform(*cfg.phi_in_range)
            r = rng.uniform(*cfg.r_range)
            tau = rng.uniform(*cfg.tau_range)
            gamma = reflection_coeff(phi_in, cfg.n_t, cfg.sigma_rough, cfg.f_c, cfg.c)
        beta = path_loss(gamma, cfg.r1, cfg.f_c, cfg.k_abs, cfg.c)
        is_far = r > cfg.d_rayleigh
        if is_far:
            a = far_response(geom, phi, theta, cfg.f_c, cfg.c)
        else:
            a = near_response(geom, phi, theta, r, cfg.f_c, cfg.c)
        h += beta * a * np.exp(-2j * np.pi * cfg.f_c * tau)
        paths.append(
            PathParams(
                beta=beta,
                phi=phi,
                theta=theta,
                r=r,
                tau=tau,
                gamma=gamma,
                phi_in=phi_in,
                is_los=(l == 0),
                is_far=is_far,
            )
        )
    return h, paths


def reconstruct_channel(
    geom: ArrayGeometry, cfg: ChannelConfig, paths: list[PathParams]
) -> np.ndarray:
    """Recompute the ray sum from emitted path parameters (test oracle)."""
    h = np.zeros(geom.n_antennas, dtype=complex)
    for p in paths:
        if p.is_far:
            a = far_response(geom, p.phi, p.theta, cfg.f_c, cfg.c)
        else:
            a = near_response(geom, p.phi, p.theta, p.r, cfg.f_c, cfg.c)
        h += p.beta * a * np.exp(-2j * np.pi * cfg.f_c * p.tau)
    return h


def unitary_dft(n: int) -> np.ndarray:
    """Unitary n-point DFT matrix (F^H F = I)."""
    return scipy.linalg.dft(n) / math.sqrt(n)


def generate_pilot_matrices(geom: ArrayGeometry, pilot: PilotConfig) -> MeasurementOperator:
    """Assemble the overall operator: stacked per-slot rows W_p A_p F.

    A_p entries are (1/sqrt(N)) exp(j psi) with psi uniform per entry,
    W_p = I, and F the unitary N-point DFT. The stacked W_p A_p blocks are
    retained on the operator as the noise combiner.
    """
    rng = np.random.default_rng(pilot.rng_seed)
    n = geom.n_antennas
    f = unitary_dft(n)
    blocks = []
    for _ in range(pilot.p_slots):
        psi = rng.uniform(0.0, 2.0 * np.pi, size=(pilot.n_rf, n))
        blocks.append(np.exp(1j * psi) / math.sqrt(n))
    combiner = np.vstack(blocks)
    a = combiner @ f
    return build_real_operator(a.real, a.imag, combiner=combiner, n_slots=pilot.p_slots)


def add_noise(
    op: MeasurementOperator,
    h: np.ndarray,
    snr_db: float,
    rng_seed=0,
) -> tuple[np.ndarray, float]:
    """Measure h through the operator at a target SNR.

    Noise is drawn per slot at the antennas and colored by that slot's
    combining block when the operator carries one; otherwise it is white
    on the measurement. The noise power is set from the expected combined
    energy, E||n_combined||^2 = s2 * sum_p ||C_p||_F^2, so that
    ||A h||^2 / E||n_combined||^2 hits the target. Returns the real-form
    measurement and the average noise variance per real component.
    ``snr_db = inf`` returns the exact noiseless measurement.
    """
    h = np.asarray(h)
    if h.shape != (op.n_complex,):
        raise ValidationError(f"channel has shape {h.shape}, expected ({op.n_complex},)")
    clean = op.a_complex @ h
    if math.isinf(snr_db) and snr_db > 0:
        return embed_complex(clean), 0.0
    if not math.isfinite(snr_db):
        raise ValidationError(f"snr_db must be finite or +inf, got {snr_db}")
    rng = np.random.default_rng(rng_seed)
    snr_lin = 10.0 ** (snr_db / 10.0)
    signal_energy = float(np.real(np.vdot(clean, clean)))
    m = op.m_complex
    if op.combiner is not None:
        comb_energy = float(np.sum(np.abs(op.combiner) ** 2))
        s2 = signal_energy / (snr_lin * comb_energy)
        n_ant = op.combiner.shape[1]
        rows_per_slot = m // op.n_slots
        noise = np.empty(m, dtype=complex)
        for p in range(op.n_slots):
            n_p = math.sqrt(s2 / 2.0) * (
                rng.standard_normal(n_ant) + 1j * rng.standard_normal(n_ant)
            )
            block = op.combiner[p * rows_per_slot : (p + 1) * rows_per_slot]
            noise[p * rows_per_slot : (p + 1) * rows_per_slot] = block @ n_p
    else:
        s2 = signal_energy / (snr_lin * m)
        noise = math.sqrt(s2 / 2.0) * (rng.standard_normal(m) + 1j * rng.standard_normal(m))
    noise_var = signal_energy / (snr_lin * 2.0 * m)
    return embed_complex(clean + noise), noise_var
