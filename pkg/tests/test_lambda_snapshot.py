from collections import deque

import numpy as np
import pytest

from swamm.lambda_snapshot import LambdaCounter


def test_rejects_bad_bits():
    counter = LambdaCounter(2, 4)
    with pytest.raises(ValueError):
        counter.push_bit(2)


def test_rejects_bad_parameters():
    with pytest.raises(ValueError):
        LambdaCounter(0, 4)
    with pytest.raises(ValueError):
        LambdaCounter(2, 0)


def test_all_zero_stream():
    counter = LambdaCounter(3, 10)
    for _ in range(50):
        counter.push_bit(0)
    assert counter.estimate() == 0
    assert counter.ell == 0
    assert len(counter.queue) == 0


def test_block_bookkeeping():
    counter = LambdaCounter(3, 100)
    for _ in range(7):
        counter.push_bit(0)
    # positions 1-3 form block 1, 4-6 block 2, 7 opens block 3
    assert counter.time == 7
    assert counter.block_index == 3
    assert counter.offset == 0


def test_lambda_one_counts_exactly():
    rng = np.random.default_rng(7)
    counter = LambdaCounter(1, 9)
    recent: deque[int] = deque(maxlen=9)
    for bit in rng.integers(0, 2, 400).tolist():
        counter.push_bit(bit)
        recent.append(bit)
        assert counter.estimate() == sum(recent)


def test_sandwich_property_small_grid():
    rng = np.random.default_rng(11)
    bits = rng.integers(0, 2, 3000).tolist()
    for lam in (2, 5):
        for window in (7, 60):
            counter = LambdaCounter(lam, window)
            recent: deque[int] = deque(maxlen=window)
            for bit in bits:
                counter.push_bit(bit)
                recent.append(bit)
                live = sum(recent)
                assert live <= counter.estimate() <= live + 2 * lam


def test_queue_never_exceeds_space_bound():
    rng = np.random.default_rng(13)
    for lam, window in ((2, 9), (4, 30)):
        counter = LambdaCounter(lam, window)
        cap = -(-window // lam) + 1
        for bit in rng.integers(0, 2, 2000).tolist():
            counter.push_bit(bit)
            assert len(counter.queue) <= cap


def test_queue_blocks_strictly_increasing():
    counter = LambdaCounter(2, 50)
    for _ in range(300):
        counter.push_bit(1)
        blocks = list(counter.queue)
        assert blocks == sorted(set(blocks))
