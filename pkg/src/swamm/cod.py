"""Co-occurring directions sketch for two correlated column streams.

Column pairs (x, y) land in two parallel buffers.  When the buffers fill
up, both are orthogonalized, the product of their triangular factors is
decomposed, and every singular value is shrunk by the middle one.  That
zeroes at least half the columns while perturbing the outer product
``a @ b.T`` by a controlled amount: after n insertions the spectral error
against the exact sum of outer products is at most
``2 * ||X||_F * ||Y||_F / l``.
"""

from __future__ import annotations

import numpy as np

from .linalg import (
    RECON_TOL,
    as_vector,
    qr_decompose,
    shrink_singular_values,
    spectral_norm,
    svd,
)

# Relative cutoff below which realigned directions are treated as rank noise.
_RANK_RTOL = 1e-14


class CodSketch:
    """Fixed-width sketch of a stream of column pairs.

    Parameters
    ----------
    d_x, d_y : int
        Row dimensions of the two buffers.
    l : int
        Sketch width (number of columns); must satisfy l <= min(d_x, d_y).
    validate : bool
        When set, compress() cross-checks its own output at RECON_TOL.
        Meant for tests; costs an extra pair of matrix products.
    """

    def __init__(self, d_x: int, d_y: int, l: int, validate: bool = False):
        if d_x < 1 or d_y < 1:
            raise ValueError("dimensions must be >= 1")
        if l < 1:
            raise ValueError("l must be >= 1")
        if l > min(d_x, d_y):
            raise ValueError(f"l={l} exceeds min(d_x, d_y)={min(d_x, d_y)}")
        self.d_x = d_x
        self.d_y = d_y
        self.l = l
        self.validate = validate
        self.a = np.zeros((d_x, l))
        self.b = np.zeros((d_y, l))
        self.fill = 0  # occupied columns; positions >= fill are exactly zero

    def insert(self, x, y) -> None:
        """Append one column pair, compressing when the buffers fill."""
        x = as_vector(x, self.d_x, "x")
        y = as_vector(y, self.d_y, "y")
        self.a[:, self.fill] = x
        self.b[:, self.fill] = y
        self.fill += 1
        if self.fill == self.l:
            self.compress()

    def compress(self) -> None:
        """Shrink the sketch so at most ceil(l/2) - 1 columns stay occupied.

        Safe to call at any fill level; an empty sketch is left untouched.
        """
        if self.fill == 0:
            return
        if self.validate:
            before = self.product()
        qx, rx = qr_decompose(self.a[:, : self.fill])
        qy, ry = qr_decompose(self.b[:, : self.fill])
        u, sigma, v = svd(rx @ ry.T)
        delta, shrunk = shrink_singular_values(sigma, self.l)
        self._rebuild(qx, qy, u, v, shrunk)
        if self.validate:
            drop = spectral_norm(before - self.product())
            if drop > delta + RECON_TOL:
                raise AssertionError(
                    f"compress moved the product by {drop}, allowed {delta}"
                )

    def realign(self) -> np.ndarray:
        """Rewrite the buffers in singular-value order without shrinking.

        The outer product is preserved exactly; afterwards column i of each
        buffer has norm sqrt(sigma_i), so the leading pair carries the
        dominant co-occurring direction.  Returns the kept singular values
        in non-increasing order.
        """
        if self.fill == 0:
            return np.zeros(0)
        qx, rx = qr_decompose(self.a[:, : self.fill])
        qy, ry = qr_decompose(self.b[:, : self.fill])
        u, sigma, v = svd(rx @ ry.T)
        return self._rebuild(qx, qy, u, v, sigma)

    def _rebuild(self, qx, qy, u, v, sigma) -> np.ndarray:
        keep = sigma > (sigma[0] * _RANK_RTOL if sigma.size else 0.0)
        kept = sigma[keep]
        roots = np.sqrt(kept)
        self.a[:] = 0.0
        self.b[:] = 0.0
        self.fill = kept.shape[0]
        if self.fill:
            self.a[:, : self.fill] = qx @ (u[:, keep] * roots)
            self.b[:, : self.fill] = qy @ (v[:, keep] * roots)
        return kept

    def drop_leading(self, count: int = 1) -> None:
        """Discard the first ``count`` column pairs, shifting the rest left."""
        if count < 0 or count > self.fill:
            raise ValueError(f"cannot drop {count} of {self.fill} columns")
        if count == 0:
            return
        keep = self.fill - count
        self.a[:, :keep] = self.a[:, count : self.fill]
        self.b[:, :keep] = self.b[:, count : self.fill]
        self.a[:, keep : self.fill] = 0.0
        self.b[:, keep : self.fill] = 0.0
        self.fill = keep

    def product(self) -> np.ndarray:
        """Current estimate of the accumulated outer product sum."""
        return self.a[:, : self.fill] @ self.b[:, : self.fill].T

    def copy(self) -> "CodSketch":
        out = CodSketch(self.d_x, self.d_y, self.l, self.validate)
        out.a = self.a.copy()
        out.b = self.b.copy()
        out.fill = self.fill
        return out

    def __repr__(self):
        return f"CodSketch(d_x={self.d_x}, d_y={self.d_y}, l={self.l}, fill={self.fill})"
