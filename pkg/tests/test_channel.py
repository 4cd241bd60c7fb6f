"""Channel simulator: geometry, responses, reflection physics, pilots, noise."""

import cmath
import math

import numpy as np
import pytest

from prden.channel import (
    SPEED_OF_LIGHT,
    ArrayGeometry,
    ChannelConfig,
    PilotConfig,
    add_noise,
    antenna_position,
    antenna_positions,
    far_response,
    generate_channel,
    generate_pilot_matrices,
    near_response,
    path_loss,
    rayleigh_distance,
    reconstruct_channel,
    reflection_coeff,
    unitary_dft,
)
from prden.errors import ValidationError
from prden.realform import embed_complex

DESK_GEOM = ArrayGeometry(n_antennas=64, n_upas=4, d=5.0e-4, d_upa=5.6e-2)
SMALL_GEOM = ArrayGeometry(n_antennas=16, n_upas=4, d=5.0e-4, d_upa=5.6e-2)
SINGLE_GEOM = ArrayGeometry(n_antennas=1, n_upas=1, d=5.0e-4, d_upa=5.6e-2)


def test_rayleigh_distance_unit():
    assert rayleigh_distance(1.0, 1.0) == 1.0


def test_rayleigh_distance_formula():
    assert rayleigh_distance(0.1414, 1e-3) == pytest.approx(0.1414**2 / 1e-3, rel=1e-12)
    assert rayleigh_distance(0.1414, 1e-3) == pytest.approx(19.995, abs=2e-3)


def test_rayleigh_distance_rejects_nonpositive():
    with pytest.raises(ValidationError):
        rayleigh_distance(0.0, 1.0)
    with pytest.raises(ValidationError):
        rayleigh_distance(1.0, -2.0)


def test_first_antenna_at_origin():
    assert np.array_equal(antenna_position(DESK_GEOM, 1, 1), [0.0, 0.0, 0.0])


def test_antenna_position_hand_decomposition():
    # N=16, S=4: s1=1, s2=2 is the second within-UPA column -> [d, 0, 0]
    p = antenna_position(SMALL_GEOM, 1, 2)
    assert np.allclose(p, [5e-4, 0.0, 0.0], atol=0)


def test_antenna_position_upa_offset():
    # crossing into the next UPA column jumps by (sqrt(N/S)-1) * d_upa
    q = SMALL_GEOM.per_upa_side
    p = antenna_position(SMALL_GEOM, 1, q + 1)
    assert np.allclose(p, [(q - 1) * SMALL_GEOM.d_upa, 0.0, 0.0], atol=0)


def test_all_positions_distinct_nonnegative_planar():
    pos = antenna_positions(DESK_GEOM)
    assert pos.shape == (64, 3)
    assert np.all(pos >= 0)
    assert np.all(pos[:, 2] == 0)
    uniq = {tuple(p) for p in pos}
    assert len(uniq) == 64


def test_antenna_position_out_of_range():
    with pytest.raises(ValidationError):
        antenna_position(SMALL_GEOM, 0, 1)
    with pytest.raises(ValidationError):
        antenna_position(SMALL_GEOM, 1, 5)


def test_geometry_validation():
    with pytest.raises(ValidationError):
        ArrayGeometry(n_antennas=15, n_upas=4)
    with pytest.raises(ValidationError):
        ArrayGeometry(n_antennas=16, n_upas=3)


def test_far_response_unit_modulus_and_origin_entry():
    a = far_response(DESK_GEOM, phi=0.7, theta=1.1, f_c=300e9)
    assert np.max(np.abs(np.abs(a) - 1.0)) <= 1e-12
    assert a[0] == 1.0 + 0.0j  # antenna at the origin has zero phase


def test_far_response_broadside_all_ones():
    # theta = 0 -> direction [0, 0, 1], planar array has z = 0 everywhere
    a = far_response(DESK_GEOM, phi=0.3, theta=0.0, f_c=300e9)
    assert np.max(np.abs(a - 1.0)) <= 1e-12


def test_near_response_unit_modulus():
    a = near_response(DESK_GEOM, phi=-0.4, theta=0.9, r=5.0, f_c=300e9)
    assert np.max(np.abs(np.abs(a) - 1.0)) <= 1e-12


def test_near_response_far_limit_matches_far_response():
    """At r = 1e6 m the spherical response equals the planar one up to a
    global phase (entrywise ratio has constant angle within 1e-3 rad)."""
    phi, theta = 0.6, 1.2
    near = near_response(DESK_GEOM, phi, theta, 1e6, 300e9)
    far = far_response(DESK_GEOM, phi, theta, 300e9)
    ratio = near / far
    ang = np.angle(ratio / ratio[0])
    assert np.max(np.abs(ang)) <= 1e-3


def test_near_response_single_antenna_phase():
    r = 7.3
    f_c = 300e9
    a = near_response(SINGLE_GEOM, phi=0.2, theta=0.5, r=r, f_c=f_c)
    want = cmath.exp(-2j * math.pi * (f_c / SPEED_OF_LIGHT) * r)
    assert abs(a[0] - want) <= 1e-12


def test_near_response_rejects_nonpositive_distance():
    with pytest.raises(ValidationError):
        near_response(SINGLE_GEOM, 0.0, 0.0, 0.0, 300e9)


def test_reflection_los_is_exactly_one():
    assert reflection_coeff(0.3, 2.24 - 0.025j, 8.8e-5, 300e9, is_los=True) == 1.0 + 0.0j


def test_reflection_normal_incidence_real_index():
    got = reflection_coeff(0.0, 2.0, 0.0, 300e9)
    assert got == pytest.approx(-1.0 / 3.0, abs=1e-15)


def test_reflection_table_values_against_scripted_form():
    """Independent evaluation of the closed form with cmath."""
    phi_in = math.pi / 4
    n_t = 2.24 - 0.025j
    sig = 8.8e-5
    f_c = 300e9
    c = SPEED_OF_LIGHT
    phi_ref = cmath.asin(cmath.sin(phi_in) / n_t)
    fres = (cmath.cos(phi_in) - n_t * cmath.cos(phi_ref)) / (
        cmath.cos(phi_in) + n_t * cmath.cos(phi_ref)
    )
    want = fres * cmath.exp(-(8 * math.pi**2 * f_c**2 * sig**2 * math.cos(phi_in) ** 2) / c**2)
    got = reflection_coeff(phi_in, n_t, sig, f_c)
    assert abs(got - want) <= 1e-14 * abs(want)


def test_reflection_magnitude_bounded_over_draws():
    rng = np.random.default_rng(0)
    for _ in range(10_000):
        phi_in = rng.uniform(0.0, math.pi / 2)
        g = reflection_coeff(phi_in, 2.24 - 0.025j, 8.8e-5, 300e9)
        assert abs(g) <= 1.0 + 1e-12


def test_path_loss_constructed_unit_case():
    f_c = 300e9
    r1 = SPEED_OF_LIGHT / (4 * math.pi * f_c)
    assert path_loss(1.0, r1, f_c, 0.0) == pytest.approx(1.0, rel=1e-14)


def test_path_loss_inverse_distance():
    b1 = path_loss(1.0, 10.0, 300e9, 0.0)
    b2 = path_loss(1.0, 20.0, 300e9, 0.0)
    assert b2 == pytest.approx(b1 / 2, rel=1e-14)


def test_path_loss_table_values_scripted():
    want = (SPEED_OF_LIGHT / (4 * math.pi * 300e9 * 30.0)) * math.exp(-0.5 * 0.0033 * 30.0)
    assert path_loss(1.0, 30.0, 300e9, 0.0033) == pytest.approx(want, rel=1e-14)
    assert path_loss(0.0, 30.0, 300e9, 0.0033) == 0.0


def test_generate_channel_single_antenna_los_only():
    cfg = ChannelConfig(n_paths=1)
    h, paths = generate_channel(SINGLE_GEOM, cfg)
    beta = path_loss(1.0, cfg.r1, cfg.f_c, cfg.k_abs)
    want = beta * cmath.exp(-2j * math.pi * cfg.f_c * cfg.tau_los)
    assert abs(h[0] - want) <= 1e-12 * abs(want)
    assert paths[0].is_los and paths[0].gamma == 1.0 and paths[0].is_far


def test_generate_channel_reconstruction_identity():
    cfg = ChannelConfig()
    for seed in range(5):
        h, paths = generate_channel(DESK_GEOM, cfg, np.random.default_rng(seed))
        h2 = reconstruct_channel(DESK_GEOM, cfg, paths)
        assert np.max(np.abs(h - h2)) <= 1e-12 * max(1.0, np.max(np.abs(h)))


def test_generate_channel_far_branch_forced():
    cfg = ChannelConfig(r_range=(25.0, 40.0))  # all above d_rayleigh = 20
    _, paths = generate_channel(DESK_GEOM, cfg, np.random.default_rng(1))
    assert all(p.is_far for p in paths)


def test_generate_channel_near_branch_forced():
    cfg = ChannelConfig(r_range=(5.0, 15.0))
    _, paths = generate_channel(DESK_GEOM, cfg, np.random.default_rng(1))
    assert paths[0].is_far  # LoS at r1 = 30
    assert all(not p.is_far for p in paths[1:])


def test_generate_channel_hybrid_mixture():
    cfg = ChannelConfig()
    far = near = 0
    for seed in range(200):
        _, paths = generate_channel(DESK_GEOM, cfg, np.random.default_rng(seed))
        for p in paths[1:]:
            far += p.is_far
            near += not p.is_far
    assert far > 0 and near > 0


def test_pilot_constant_modulus():
    op = generate_pilot_matrices(SMALL_GEOM, PilotConfig(p_slots=8, n_rf=2, rng_seed=3))
    n = SMALL_GEOM.n_antennas
    assert np.max(np.abs(np.abs(op.combiner) - 1.0 / math.sqrt(n))) <= 1e-12
    assert op.m_complex == 16
    assert op.n_slots == 8


def test_dft_unitary():
    f = unitary_dft(16)
    assert np.max(np.abs(f.conj().T @ f - np.eye(16))) <= 1e-10


def test_pilot_determinism():
    a = generate_pilot_matrices(SMALL_GEOM, PilotConfig(4, 2, rng_seed=7))
    b = generate_pilot_matrices(SMALL_GEOM, PilotConfig(4, 2, rng_seed=7))
    c = generate_pilot_matrices(SMALL_GEOM, PilotConfig(4, 2, rng_seed=8))
    assert np.array_equal(a.a_real, b.a_real)
    assert not np.array_equal(a.a_real, c.a_real)


def test_add_noise_noiseless_is_exact():
    op = generate_pilot_matrices(SMALL_GEOM, PilotConfig(4, 2, rng_seed=0))
    h = np.random.default_rng(0).standard_normal(16) + 1j * np.random.default_rng(1).standard_normal(16)
    y, var = add_noise(op, h, float("inf"))
    assert np.array_equal(y, embed_complex(op.a_complex @ h))
    assert var == 0.0


def test_add_noise_reproducible():
    op = generate_pilot_matrices(SMALL_GEOM, PilotConfig(4, 2, rng_seed=0))
    h = np.ones(16, dtype=complex)
    y1, v1 = add_noise(op, h, 10.0, rng_seed=5)
    y2, v2 = add_noise(op, h, 10.0, rng_seed=5)
    y3, _ = add_noise(op, h, 10.0, rng_seed=6)
    assert np.array_equal(y1, y2) and v1 == v2
    assert not np.array_equal(y1, y3)


def test_add_noise_empirical_snr():
    """Monte-Carlo: realized SNR within 0.2 dB of the 10 dB target."""
    op = generate_pilot_matrices(SMALL_GEOM, PilotConfig(8, 2, rng_seed=0))
    h, _ = generate_channel(SMALL_GEOM, ChannelConfig(), np.random.default_rng(0))
    clean = embed_complex(op.a_complex @ h)
    sig = float(clean @ clean)
    total = 0.0
    n_draws = 1000
    for k in range(n_draws):
        y, _ = add_noise(op, h, 10.0, rng_seed=k)
        e = y - clean
        total += float(e @ e)
    snr_emp = 10.0 * math.log10(sig / (total / n_draws))
    assert abs(snr_emp - 10.0) <= 0.2


def test_add_noise_white_fallback_without_combiner():
    from prden.realform import build_real_operator

    rng = np.random.default_rng(2)
    a = rng.standard_normal((6, 4)) + 1j * rng.standard_normal((6, 4))
    op = build_real_operator(a.real, a.imag)
    h = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    y, var = add_noise(op, h, 20.0, rng_seed=1)
    assert y.shape == (12,)
    assert var > 0


def test_noise_var_convention():
    # noise_var must equal ||A h||^2 / (snr_lin * 2M) regardless of coloring
    op = generate_pilot_matrices(SMALL_GEOM, PilotConfig(4, 2, rng_seed=0))
    h = np.ones(16, dtype=complex)
    _, var = add_noise(op, h, 10.0, rng_seed=0)
    clean = op.a_complex @ h
    sig = float(np.real(np.vdot(clean, clean)))
    assert var == pytest.approx(sig / (10.0 * 2 * op.m_complex), rel=1e-12)
