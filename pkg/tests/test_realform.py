"""Real-form embedding: round trips, block structure, homomorphism."""

import numpy as np
import pytest

from prden import apply_operator, build_real_operator, embed_complex, extract_complex
from prden.errors import ValidationError


def test_embed_single_entry():
    assert np.array_equal(embed_complex(np.array([1 + 2j])), [1.0, 2.0])


def test_embed_zeros():
    assert np.array_equal(embed_complex(np.zeros(2, dtype=complex)), np.zeros(4))


def test_embed_extract_round_trip_exact():
    rng = np.random.default_rng(7)
    for _ in range(100):
        n = rng.integers(1, 40)
        v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        assert np.array_equal(extract_complex(embed_complex(v)), v)


def test_extract_rejects_odd_length():
    with pytest.raises(ValidationError):
        extract_complex(np.zeros(3))


def test_block_structure_one_plus_i():
    op = build_real_operator(np.array([[1.0]]), np.array([[1.0]]))
    assert np.array_equal(op.a_real, [[1.0, -1.0], [1.0, 1.0]])


def test_block_multiply_matches_complex_product():
    op = build_real_operator(np.array([[1.0]]), np.array([[1.0]]))
    out = apply_operator(op, embed_complex(np.array([2 + 0j])))
    assert np.array_equal(out, embed_complex(np.array([(1 + 1j) * 2])))


def test_zero_operator_maps_to_zero():
    op = build_real_operator(np.zeros((3, 4)), np.zeros((3, 4)))
    x = embed_complex(np.arange(4) + 1j * np.arange(4))
    assert np.array_equal(apply_operator(op, x), np.zeros(6))


def test_identity_operator_is_identity():
    n = 5
    op = build_real_operator(np.eye(n), np.zeros((n, n)))
    rng = np.random.default_rng(3)
    x = rng.standard_normal(2 * n)
    assert np.array_equal(apply_operator(op, x), x)


def test_apply_matches_complex_arithmetic():
    rng = np.random.default_rng(11)
    a = rng.standard_normal((4, 8)) + 1j * rng.standard_normal((4, 8))
    h = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    op = build_real_operator(a.real, a.imag)
    got = apply_operator(op, embed_complex(h))
    want = embed_complex(a @ h)
    assert np.linalg.norm(got - want) <= 1e-12 * np.linalg.norm(want)


def test_homomorphism_property():
    """realform(A) @ embed(h) == embed(A @ h) over random instances."""
    rng = np.random.default_rng(23)
    for _ in range(100):
        m, n = rng.integers(1, 12, size=2)
        a = rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))
        h = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        op = build_real_operator(a.real, a.imag)
        got = apply_operator(op, embed_complex(h))
        want = embed_complex(a @ h)
        assert np.linalg.norm(got - want) <= 1e-12 * max(1.0, np.linalg.norm(want))


def test_shape_mismatch_raises():
    with pytest.raises(ValidationError):
        build_real_operator(np.zeros((2, 3)), np.zeros((3, 2)))
    op = build_real_operator(np.zeros((2, 3)), np.zeros((2, 3)))
    with pytest.raises(ValidationError):
        apply_operator(op, np.zeros(4))
