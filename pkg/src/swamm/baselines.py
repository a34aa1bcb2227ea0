"""Reference methods the sketches are measured against.

:class:`ExactWindowOracle` keeps the raw window and computes the true
product; it is the ground truth for every error metric.
:class:`PrioritySampler` is the sampling baseline: k independent slots,
each holding the in-window column pair with the highest random priority
``u ** (1 / (||x|| * ||y||))``.  Expired maxima are handled by keeping,
per slot, the chain of candidates with decreasing priority and increasing
timestamp, so an eviction promotes the next candidate in O(1).
"""

from __future__ import annotations

from collections import deque
from typing import NamedTuple

import numpy as np

from .linalg import as_vector


class _ChainItem(NamedTuple):
    priority: float
    t: int
    weight: float  # ||x|| * ||y|| at insertion
    x: np.ndarray
    y: np.ndarray


class PrioritySampler:
    """Weighted sliding-window sampler for approximate matrix products.

    Each of the ``k`` slots samples one column pair with probability
    proportional to ``||x|| * ||y||`` among the live window.  The estimate
    rescales every sampled pair by the window's total weight, which makes
    ``a @ b.T`` unbiased for the true window product.
    """

    def __init__(self, d_x: int, d_y: int, k: int, n_window: int,
                 seed: int | np.random.SeedSequence = 0):
        if k < 1:
            raise ValueError("k must be >= 1")
        if n_window < 1:
            raise ValueError("n_window must be >= 1")
        self.d_x = d_x
        self.d_y = d_y
        self.k = k
        self.n_window = n_window
        if isinstance(seed, np.random.SeedSequence):
            seq = seed
        else:
            seq = np.random.SeedSequence(seed)
        self._rngs = [np.random.default_rng(s) for s in seq.spawn(k)]
        self._chains: list[deque[_ChainItem]] = [deque() for _ in range(k)]
        self.now = 0
        self._weights: deque[float] = deque()
        self._weight_sum = 0.0

    def update(self, x, y) -> None:
        x = as_vector(x, self.d_x, "x")
        y = as_vector(y, self.d_y, "y")
        weight = float(np.linalg.norm(x) * np.linalg.norm(y))
        if weight == 0.0:
            raise ValueError("zero-norm column pair has no sampling priority")
        self.now += 1
        self._push_weight(weight)
        xc = x.copy()
        yc = y.copy()
        horizon = self.now - self.n_window
        inv_w = 1.0 / weight
        for rng, chain in zip(self._rngs, self._chains):
            u = rng.random()
            while u == 0.0:  # keep priorities inside (0, 1)
                u = rng.random()
            rho = u ** inv_w
            while chain and chain[0].t <= horizon:
                chain.popleft()
            # Anything older with priority <= rho can never be the window
            # maximum again, so the chain stays decreasing in priority.
            while chain and chain[-1].priority <= rho:
                chain.pop()
            chain.append(_ChainItem(rho, self.now, weight, xc, yc))

    def _push_weight(self, weight: float) -> None:
        self._weights.append(weight)
        self._weight_sum += weight
        if len(self._weights) > self.n_window:
            self._weight_sum -= self._weights.popleft()
        if self.now % self.n_window == 0:
            # Resum occasionally so float drift cannot accumulate.
            self._weight_sum = float(sum(self._weights))

    def estimate(self) -> tuple[np.ndarray, np.ndarray]:
        """Scaled sample columns (a, b); ``a @ b.T`` estimates the product."""
        if self.now == 0:
            raise ValueError("estimate requires at least one update")
        a = np.empty((self.d_x, self.k))
        b = np.empty((self.d_y, self.k))
        total = self._weight_sum
        for s, chain in enumerate(self._chains):
            head = chain[0]
            scale = np.sqrt(total / (head.weight * self.k))
            a[:, s] = head.x * scale
            b[:, s] = head.y * scale
        return a, b

    @property
    def column_count(self) -> int:
        """Column pairs held across all candidate chains."""
        return sum(len(chain) for chain in self._chains)

    def __repr__(self):
        return (
            f"PrioritySampler(k={self.k}, n_window={self.n_window}, "
            f"now={self.now}, cols={self.column_count})"
        )


class ExactWindowOracle:
    """Ground truth: the raw window and its exact product."""

    def __init__(self, d_x: int, d_y: int, n_window: int):
        if n_window < 1:
            raise ValueError("n_window must be >= 1")
        self.d_x = d_x
        self.d_y = d_y
        self.n_window = n_window
        self._items: deque[tuple[np.ndarray, np.ndarray]] = deque(maxlen=n_window)
        self.now = 0

    def update(self, x, y) -> None:
        x = as_vector(x, self.d_x, "x")
        y = as_vector(y, self.d_y, "y")
        self._items.append((x.copy(), y.copy()))
        self.now += 1

    def window(self) -> tuple[np.ndarray, np.ndarray]:
        """The live window as matrices (X, Y), one pair per column."""
        if not self._items:
            return np.zeros((self.d_x, 0)), np.zeros((self.d_y, 0))
        xs, ys = zip(*self._items)
        return np.column_stack(xs), np.column_stack(ys)

    def product(self) -> np.ndarray:
        x, y = self.window()
        return x @ y.T

    @property
    def column_count(self) -> int:
        return len(self._items)

    def __repr__(self):
        return f"ExactWindowOracle(n_window={self.n_window}, now={self.now})"
