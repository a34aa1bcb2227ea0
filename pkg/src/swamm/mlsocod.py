"""Layered sliding-window sketch for streams with bounded column norms.

The single-sketch :class:`~swamm.socod.SlidingSketch` assumes unit
columns.  When squared norms range over [1, R] instead, a stack of
``max(1, ceil(log2 R))`` sketches is kept, the j-th using registration
threshold ``2**j * eps * n_window``.  Columns heavy enough for a layer
skip its buffers and are remembered verbatim; everything else flows
through the layer's fast update.  Each layer's queue is capped at
``6 / eps`` snapshots, so a layer whose threshold is too low for the
stream sheds coverage and queries fall through to the next one.
"""

from __future__ import annotations

import math
import struct

import numpy as np

from .linalg import as_vector
from .socod import SlidingSketch

# Tolerance on the squared-norm bounds [1, R].
NORM_TOL = 1e-9

_MAGIC = b"MLSC"
_FORMAT_VERSION = 1


class LayeredSketch:
    """Sliding-window matrix product sketch for norm-bounded streams.

    Parameters
    ----------
    d_x, d_y : int
        Row dimensions of the two streams.
    eps : float
        Target accuracy in (0, 1].
    n_window : int
        Window length in stream positions.
    r_bound : float
        Upper bound on squared column norms (lower bound is 1).
    """

    def __init__(self, d_x: int, d_y: int, eps: float, n_window: int,
                 r_bound: float, validate: bool = False):
        if r_bound < 1.0:
            raise ValueError(f"r_bound must be >= 1, got {r_bound}")
        self.d_x = d_x
        self.d_y = d_y
        self.eps = float(eps)
        self.n_window = int(n_window)
        self.r_bound = float(r_bound)
        self.validate = validate
        depth = max(1, math.ceil(math.log2(self.r_bound)))
        self.layers = [
            SlidingSketch(
                d_x, d_y, eps, n_window,
                theta=(2.0 ** j) * eps * n_window,
                enforce_unit=False,
                validate=validate,
            )
            for j in range(depth)
        ]
        for layer in self.layers:
            layer._path = "fast"
        self.now = 0
        self.last_query_layer: int | None = None
        self.last_query_fallback: bool | None = None

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def thresholds(self) -> list[float]:
        return [layer.theta for layer in self.layers]

    def update(self, x, y) -> None:
        """Consume one column pair with squared norms in [1, r_bound]."""
        x = as_vector(x, self.d_x, "x")
        y = as_vector(y, self.d_y, "y")
        nx = float(np.linalg.norm(x))
        ny = float(np.linalg.norm(y))
        for name, nrm in (("x", nx), ("y", ny)):
            sq = nrm * nrm
            if sq < 1.0 - NORM_TOL or sq > self.r_bound + NORM_TOL:
                raise ValueError(
                    f"squared norm of {name} is {sq}, outside [1, {self.r_bound}]"
                )
        self.now += 1
        weight = nx * ny
        cap = 6.0 / self.eps
        stored: tuple[np.ndarray, np.ndarray] | None = None
        for layer in self.layers:
            # Every layer sees every timestamp, so refresh and expiry run
            # even when the pair bypasses the layer's buffers below.
            layer._advance()
            self._enforce_cap(layer, cap)
            if weight >= layer.theta:
                # Heavy for this layer: keep the pair verbatim in both
                # queues; no sketching error is introduced for it.
                if stored is None:
                    stored = (x.copy(), y.copy())
                layer.primary.queue.register(stored[0], stored[1], layer.now)
                layer.aux.queue.register(stored[0], stored[1], layer.now)
            else:
                for half in (layer.primary, layer.aux):
                    layer._fast_insert(half, x, y)
            # Registrations on a full queue would leave it one over the
            # cap until the next update's pop; enforce again so the bound
            # holds whenever an update returns.
            self._enforce_cap(layer, cap)

    @staticmethod
    def _enforce_cap(layer, cap: float) -> None:
        for half in (layer.primary, layer.aux):
            while len(half.queue) > cap:
                half.queue.popleft()

    def query(self) -> tuple[np.ndarray, np.ndarray]:
        """Factors from the lowest layer whose snapshots cover the window.

        A layer covers the window when its earliest live snapshot chains
        back to a registration at or before ``now - n_window``; anything
        discarded before that point is outside the window.  When no layer
        qualifies (for instance right after warm-up, or when no snapshot
        was ever registered) the top layer answers and
        ``last_query_fallback`` is set.
        """
        chosen: int | None = None
        for j, layer in enumerate(self.layers):
            head = layer.primary.queue.head
            if head is not None and head.s <= self.now - self.n_window:
                chosen = j
                break
        self.last_query_fallback = chosen is None
        if chosen is None:
            chosen = len(self.layers) - 1
        self.last_query_layer = chosen
        return self.layers[chosen].query()

    @property
    def window_full(self) -> bool:
        return self.now >= self.n_window

    @property
    def column_count(self) -> int:
        """Column pairs held across all layers."""
        return sum(layer.column_count for layer in self.layers)

    def __repr__(self):
        return (
            f"LayeredSketch(d_x={self.d_x}, d_y={self.d_y}, eps={self.eps}, "
            f"n_window={self.n_window}, r_bound={self.r_bound}, "
            f"depth={self.depth}, now={self.now})"
        )

    # -- checkpointing -------------------------------------------------------

    def to_bytes(self) -> bytes:
        """Versioned checkpoint containing every layer's full state."""
        parts = [
            _MAGIC,
            struct.pack(
                "<IQQQQQ", _FORMAT_VERSION, self.d_x, self.d_y,
                len(self.layers), self.n_window, self.now,
            ),
            struct.pack("<dd", self.eps, self.r_bound),
        ]
        for layer in self.layers:
            blob = layer.to_bytes()
            parts.append(struct.pack("<Q", len(blob)))
            parts.append(blob)
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, blob: bytes) -> "LayeredSketch":
        off = 0
        if blob[:4] != _MAGIC:
            raise ValueError(f"bad magic {blob[:4]!r}, expected {_MAGIC!r}")
        off = 4
        head = struct.unpack_from("<IQQQQQ", blob, off)
        off += struct.calcsize("<IQQQQQ")
        version, d_x, d_y, depth, n_window, now = head
        if version != _FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        eps, r_bound = struct.unpack_from("<dd", blob, off)
        off += 16
        out = cls(d_x, d_y, eps, n_window, r_bound)
        if len(out.layers) != depth:
            raise ValueError("layer count does not match checkpoint header")
        out.now = now
        layers = []
        for _ in range(depth):
            (size,) = struct.unpack_from("<Q", blob, off)
            off += 8
            layers.append(SlidingSketch.from_bytes(blob[off : off + size]))
            off += size
        if off != len(blob):
            raise ValueError(f"{len(blob) - off} trailing bytes in checkpoint")
        out.layers = layers
        return out
