import numpy as np
import pytest

from swamm.linalg import frobenius_norm, spectral_norm
from swamm.mlsocod import LayeredSketch


def _scaled_stream(rng, d_x, d_y, n, r_bound):
    xs = rng.standard_normal((d_x, n))
    ys = rng.standard_normal((d_y, n))
    xs /= np.linalg.norm(xs, axis=0)
    ys /= np.linalg.norm(ys, axis=0)
    xs *= np.sqrt(rng.uniform(1.0, r_bound, size=n))
    ys *= np.sqrt(rng.uniform(1.0, r_bound, size=n))
    return xs, ys


def test_depth_follows_norm_range():
    assert LayeredSketch(8, 6, 0.5, 10, 1.0).depth == 1
    assert LayeredSketch(8, 6, 0.5, 10, 4.0).depth == 2
    assert LayeredSketch(8, 6, 0.5, 10, 64.0).depth == 6


def test_thresholds_double_exactly():
    sk = LayeredSketch(8, 6, 0.25, 40, 32.0)
    thresholds = sk.thresholds
    assert thresholds[0] == 0.25 * 40
    for j in range(sk.depth - 1):
        assert thresholds[j + 1] == 2.0 * thresholds[j]


def test_rejects_bad_parameters():
    with pytest.raises(ValueError):
        LayeredSketch(8, 6, 0.25, 40, 0.5)
    with pytest.raises(ValueError):
        LayeredSketch(8, 6, 0.0, 40, 4.0)


def test_norm_range_enforced():
    sk = LayeredSketch(6, 5, 0.25, 20, 4.0)
    small = np.ones(6) * 0.01
    with pytest.raises(ValueError):
        sk.update(small, np.ones(5) / np.sqrt(5.0))
    big = np.ones(6)  # squared norm 6 > 4
    with pytest.raises(ValueError):
        sk.update(big, np.ones(5) / np.sqrt(5.0))


def test_heavy_pairs_stored_verbatim():
    # theta_0 = 0.5 * 10 = 5, so a weight-9 pair skips the sketch
    sk = LayeredSketch(6, 5, 0.5, 10, 9.0)
    x = np.zeros(6)
    x[0] = 3.0
    y = np.zeros(5)
    y[0] = 3.0
    sk.update(x, y)
    head = sk.layers[0].primary.queue.head
    assert head is not None
    assert np.array_equal(head.u, x)
    assert np.array_equal(head.v, y)
    # the same pair is light for layer 1 (threshold 10 > 9)
    assert len(sk.layers[1].primary.queue) == 0
    assert sk.layers[1].primary.cod.fill == 1


def test_queue_cap_holds_under_heavy_flood():
    # window 18 keeps theta_0 = 9, so every pair below is heavy for layer 0
    # and registers each step; the queue would hold 18 live snapshots
    # without the cap, so reaching exactly 12 shows the cap at work
    eps = 0.5
    sk = LayeredSketch(6, 5, eps, 18, 9.0)
    x = np.zeros(6)
    x[0] = 3.0
    y = np.zeros(5)
    y[0] = 3.0
    cap = 6.0 / eps
    for _ in range(60):
        sk.update(x, y)
        for layer in sk.layers:
            assert len(layer.primary.queue) <= cap
            assert len(layer.aux.queue) <= cap
    assert len(sk.layers[0].primary.queue) == int(cap)


def test_query_error_bound_small():
    d_x, d_y, n_window, steps, eps, r_bound = 16, 12, 80, 240, 0.25, 4.0
    rng = np.random.default_rng(0)
    xs, ys = _scaled_stream(rng, d_x, d_y, steps, r_bound)
    sk = LayeredSketch(d_x, d_y, eps, n_window, r_bound)
    for t in range(steps):
        sk.update(xs[:, t], ys[:, t])
        if t + 1 >= n_window:
            lo = t + 1 - n_window
            xw = xs[:, lo:t + 1]
            yw = ys[:, lo:t + 1]
            a, b = sk.query()
            err = spectral_norm(xw @ yw.T - a @ b.T)
            bound = 4.0 * eps * frobenius_norm(xw) * frobenius_norm(yw)
            assert err <= bound + 1e-9


def test_fallback_flag_reports_layer_choice():
    sk = LayeredSketch(6, 5, 0.5, 10, 4.0)
    rng = np.random.default_rng(1)
    for _ in range(3):
        x = rng.standard_normal(6)
        x /= np.linalg.norm(x)
        y = rng.standard_normal(5)
        y /= np.linalg.norm(y)
        sk.update(x, y)
    sk.query()
    assert sk.last_query_fallback
    assert sk.last_query_layer == sk.depth - 1


def test_column_count_sums_layers():
    rng = np.random.default_rng(2)
    sk = LayeredSketch(10, 8, 0.25, 30, 4.0)
    xs, ys = _scaled_stream(rng, 10, 8, 50, 4.0)
    for t in range(50):
        sk.update(xs[:, t], ys[:, t])
    total = 0
    for layer in sk.layers:
        total += layer.column_count
    assert sk.column_count == total


def test_serialization_roundtrip():
    rng = np.random.default_rng(3)
    sk = LayeredSketch(10, 8, 0.25, 30, 4.0)
    xs, ys = _scaled_stream(rng, 10, 8, 70, 4.0)
    for t in range(50):
        sk.update(xs[:, t], ys[:, t])
    clone = LayeredSketch.from_bytes(sk.to_bytes())
    assert clone.depth == sk.depth
    assert clone.now == sk.now
    a, b = sk.query()
    ca, cb = clone.query()
    assert np.allclose(a @ b.T, ca @ cb.T)
    for t in range(50, 70):
        sk.update(xs[:, t], ys[:, t])
        clone.update(xs[:, t], ys[:, t])
    a, b = sk.query()
    ca, cb = clone.query()
    assert np.allclose(a @ b.T, ca @ cb.T)


def test_from_bytes_rejects_garbage():
    with pytest.raises(ValueError):
        LayeredSketch.from_bytes(b"junk")
