"""Approximate 1-bit counting over a sliding window.

Instead of remembering every bit, the counter samples every ``lam``-th
1-bit and remembers only the index of the fixed-size block the sample fell
in.  Blocks that slide entirely out of the window are dropped from the
head of the queue.  The estimate ``len(queue) * lam + ell`` never
undercounts and overshoots by at most ``2 * lam``.
"""

from __future__ import annotations

from collections import deque


class LambdaCounter:
    """Sliding-window 1-bit counter with additive error at most 2*lam.

    Timestamps are 1-based: the first pushed bit lives at position 1.
    Block b covers positions [(b-1)*lam + 1, b*lam].
    """

    def __init__(self, lam: int, window: int):
        if lam < 1:
            raise ValueError("lam must be >= 1")
        if window < 1:
            raise ValueError("window must be >= 1")
        self.lam = lam
        self.window = window
        self.queue: deque[int] = deque()  # indices of registered blocks, increasing
        self.ell = 0  # 1-bits seen since the last sample, in [0, lam)
        self.time = 0
        # Position bookkeeping starts one slot before the first block so the
        # first advance lands on block 1, offset 0.
        self.block_index = 0
        self.offset = lam - 1

    def push_bit(self, bit: int) -> None:
        """Advance the clock by one position and account for ``bit``."""
        if bit not in (0, 1):
            raise ValueError("bit must be 0 or 1")
        self.time += 1
        self.offset += 1
        if self.offset == self.lam:
            self.offset = 0
            self.block_index += 1
        # Evict blocks whose last position b*lam now sits outside the window.
        horizon = self.time - self.window
        while self.queue and self.queue[0] * self.lam <= horizon:
            self.queue.popleft()
        if bit:
            self.ell += 1
            if self.ell == self.lam:
                self.ell = 0
                self.queue.append(self.block_index)

    def estimate(self) -> int:
        """Estimated count of 1-bits in the last ``window`` positions."""
        return len(self.queue) * self.lam + self.ell

    def __repr__(self):
        return (
            f"LambdaCounter(lam={self.lam}, window={self.window}, "
            f"time={self.time}, blocks={list(self.queue)}, ell={self.ell})"
        )
