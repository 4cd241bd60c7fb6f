"""Dataset file format: round trips, size arithmetic, determinism."""

import numpy as np
import pytest

from prden.channel import ArrayGeometry, ChannelConfig, PilotConfig
from prden.datasets import (
    Dataset,
    generate_dataset,
    predicted_size,
    read_dataset,
    read_header,
    write_dataset,
)
from prden.errors import ValidationError

GEOM = ArrayGeometry(n_antennas=16, n_upas=4)
CFG = ChannelConfig()
PILOT = PilotConfig(p_slots=4, n_rf=2)


def test_zero_samples_file_round_trips(tmp_path):
    path = tmp_path / "empty.prdn"
    ds = generate_dataset(GEOM, CFG, PILOT, 0, 10.0, path, seed=1)
    assert ds.n_samples == 0
    back = read_dataset(path)
    assert back.n_samples == 0
    assert np.array_equal(back.op.a_real, ds.op.a_real)
    assert path.stat().st_size == predicted_size(16, 8, 0)


def test_round_trip_bit_exact(tmp_path):
    path = tmp_path / "ds.prdn"
    ds = generate_dataset(GEOM, CFG, PILOT, 7, 10.0, path, seed=3)
    back = read_dataset(path)
    assert np.array_equal(back.h, ds.h)
    assert np.array_equal(back.y, ds.y)
    assert np.array_equal(back.snr_db, ds.snr_db)
    assert np.array_equal(back.op.a_real, ds.op.a_real)
    # writing the read copy reproduces the same bytes
    path2 = tmp_path / "ds2.prdn"
    write_dataset(path2, back)
    assert path.read_bytes() == path2.read_bytes()


def test_desk_scale_size_matches_prediction(tmp_path):
    geom = ArrayGeometry(n_antennas=64, n_upas=4)
    pilot = PilotConfig(p_slots=32, n_rf=4)
    path = tmp_path / "desk.prdn"
    generate_dataset(geom, ChannelConfig(), pilot, 100, 10.0, path, seed=0)
    assert path.stat().st_size == predicted_size(64, 128, 100)


def test_header_fields(tmp_path):
    path = tmp_path / "ds.prdn"
    generate_dataset(GEOM, CFG, PILOT, 2, 5.0, path, seed=0)
    hdr = read_header(path)
    assert hdr["n"] == 16 and hdr["m"] == 8 and hdr["n_samples"] == 2
    assert hdr["dft_pilot"] and hdr["n_slots"] == 4


def test_combiner_reconstruction_matches(tmp_path):
    path = tmp_path / "ds.prdn"
    ds = generate_dataset(GEOM, CFG, PILOT, 1, 10.0, path, seed=2)
    back = read_dataset(path)
    assert back.op.combiner is not None
    assert np.max(np.abs(back.op.combiner - ds.op.combiner)) <= 1e-12


def test_same_seed_same_bytes(tmp_path):
    p1, p2 = tmp_path / "a.prdn", tmp_path / "b.prdn"
    generate_dataset(GEOM, CFG, PILOT, 5, 10.0, p1, seed=11)
    generate_dataset(GEOM, CFG, PILOT, 5, 10.0, p2, seed=11)
    assert p1.read_bytes() == p2.read_bytes()
    p3 = tmp_path / "c.prdn"
    generate_dataset(GEOM, CFG, PILOT, 5, 10.0, p3, seed=12)
    assert p1.read_bytes() != p3.read_bytes()


def test_thread_count_does_not_change_bytes(tmp_path):
    p1, p2 = tmp_path / "t1.prdn", tmp_path / "t4.prdn"
    generate_dataset(GEOM, CFG, PILOT, 8, 10.0, p1, seed=5, threads=1)
    generate_dataset(GEOM, CFG, PILOT, 8, 10.0, p2, seed=5, threads=4)
    assert p1.read_bytes() == p2.read_bytes()


def test_noiseless_dataset(tmp_path):
    from prden.realform import embed_complex, extract_complex

    path = tmp_path / "clean.prdn"
    ds = generate_dataset(GEOM, CFG, PILOT, 3, float("inf"), path, seed=0)
    for i in range(3):
        clean = embed_complex(ds.op.a_complex @ extract_complex(ds.h[i]))
        assert np.array_equal(ds.y[i], clean)
    back = read_dataset(path)
    assert np.all(np.isinf(back.snr_db))


def test_truncated_file_rejected(tmp_path):
    path = tmp_path / "ds.prdn"
    generate_dataset(GEOM, CFG, PILOT, 3, 10.0, path, seed=0)
    data = path.read_bytes()
    bad = tmp_path / "bad.prdn"
    bad.write_bytes(data[: len(data) - 16])
    with pytest.raises(ValidationError):
        read_dataset(bad)


def test_bad_magic_rejected(tmp_path):
    bad = tmp_path / "bad.prdn"
    bad.write_bytes(b"NOPE" + b"\x00" * 40)
    with pytest.raises(ValidationError, match="magic"):
        read_header(bad)


def test_missing_file_raises_oserror(tmp_path):
    with pytest.raises(OSError):
        read_dataset(tmp_path / "nope.prdn")


def test_pilot_seed_shares_operator(tmp_path):
    p1, p2 = tmp_path / "a.prdn", tmp_path / "b.prdn"
    a = generate_dataset(GEOM, CFG, PILOT, 2, 10.0, p1, seed=1, pilot_seed=77)
    b = generate_dataset(GEOM, CFG, PILOT, 2, 10.0, p2, seed=2, pilot_seed=77)
    assert np.array_equal(a.op.a_real, b.op.a_real)  # same operator
    assert not np.array_equal(a.h, b.h)  # fresh channels
