import numpy as np
import pytest

from swamm.streams import (
    StreamFormatError,
    gen_random_noisy,
    gen_uniform_random,
    iter_records,
    normalize_columns,
    read_stream,
    write_stream,
)


def test_uniform_shapes_and_range():
    x, y = gen_uniform_random(7, 5, 40, seed=1)
    assert x.shape == (7, 40)
    assert y.shape == (5, 40)
    assert np.all(x >= 0.0) and np.all(x < 1.0)
    assert np.all(y >= 0.0) and np.all(y < 1.0)


def test_uniform_seed_determinism():
    x1, y1 = gen_uniform_random(6, 4, 30, seed=9)
    x2, y2 = gen_uniform_random(6, 4, 30, seed=9)
    x3, _ = gen_uniform_random(6, 4, 30, seed=10)
    assert np.array_equal(x1, x2)
    assert np.array_equal(y1, y2)
    assert not np.array_equal(x1, x3)


def test_generators_reject_bad_sizes():
    with pytest.raises(ValueError):
        gen_uniform_random(0, 4, 10, seed=0)
    with pytest.raises(ValueError):
        gen_uniform_random(4, 4, 0, seed=0)
    with pytest.raises(ValueError):
        gen_random_noisy(8, 6, 10, signal_dim=7, zeta=10.0, seed=0)
    with pytest.raises(ValueError):
        gen_random_noisy(8, 6, 10, signal_dim=0, zeta=10.0, seed=0)
    with pytest.raises(ValueError):
        gen_random_noisy(8, 6, 10, signal_dim=3, zeta=0.0, seed=0)


def test_noisy_stream_is_low_rank_plus_noise():
    m = 5
    x, y = gen_random_noisy(40, 40, 300, signal_dim=m, zeta=50.0, seed=4)
    assert x.shape == (40, 300)
    assert y.shape == (40, 300)
    for side in (x, y):
        s = np.linalg.svd(side, compute_uv=False)
        # the spectrum should drop sharply after the planted components
        assert s[m - 1] / s[m] > 2.0


def test_noisy_seed_determinism():
    x1, y1 = gen_random_noisy(12, 10, 50, signal_dim=4, zeta=20.0, seed=3)
    x2, y2 = gen_random_noisy(12, 10, 50, signal_dim=4, zeta=20.0, seed=3)
    assert np.array_equal(x1, x2)
    assert np.array_equal(y1, y2)


def test_normalize_columns():
    rng = np.random.default_rng(5)
    a = rng.standard_normal((6, 15)) * 3.0
    unit = normalize_columns(a)
    assert np.allclose(np.linalg.norm(unit, axis=0), 1.0)
    a[:, 4] = 0.0
    with pytest.raises(ValueError):
        normalize_columns(a)


def test_iter_records_timestamps():
    x, y = gen_uniform_random(3, 2, 5, seed=0)
    records = list(iter_records(x, y))
    assert [r.t for r in records] == [1, 2, 3, 4, 5]
    assert np.array_equal(records[2].x, x[:, 2])
    assert np.array_equal(records[2].y, y[:, 2])
    with pytest.raises(ValueError):
        list(iter_records(x, y[:, :4]))


def test_stream_file_roundtrip(tmp_path):
    x, y = gen_uniform_random(9, 6, 25, seed=8)
    path = tmp_path / "stream.bin"
    write_stream(path, x, y)
    rx, ry = read_stream(path)
    assert np.array_equal(rx, x)
    assert np.array_equal(ry, y)


def test_read_rejects_bad_magic(tmp_path):
    path = tmp_path / "bad.bin"
    x, y = gen_uniform_random(3, 2, 4, seed=1)
    write_stream(path, x, y)
    raw = bytearray(path.read_bytes())
    raw[:4] = b"NOPE"
    path.write_bytes(bytes(raw))
    with pytest.raises(StreamFormatError):
        read_stream(path)


def test_read_rejects_truncation(tmp_path):
    path = tmp_path / "short.bin"
    x, y = gen_uniform_random(3, 2, 4, seed=1)
    write_stream(path, x, y)
    raw = path.read_bytes()
    path.write_bytes(raw[:len(raw) - 8])
    with pytest.raises(StreamFormatError):
        read_stream(path)
    path.write_bytes(raw[:10])
    with pytest.raises(StreamFormatError):
        read_stream(path)


def test_write_rejects_mismatched_columns(tmp_path):
    x, y = gen_uniform_random(3, 2, 4, seed=1)
    with pytest.raises(ValueError):
        write_stream(tmp_path / "x.bin", x, y[:, :3])
