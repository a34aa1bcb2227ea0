"""Sliding-window approximate matrix multiplication in the normalized model.

A :class:`SlidingSketch` consumes a stream of unit-norm column pairs and,
at any point, returns factors whose product approximates the outer product
sum of the last ``n_window`` pairs within ``8 * eps * n_window`` in
spectral norm.

Two mechanisms cooperate:

* a pair of co-occurring-directions sketches, refreshed every
  ``n_window`` steps so stale mass ages out in one window's time, and
* snapshot queues that peel off any direction whose accumulated weight
  reaches ``theta = eps * n_window`` and remember it verbatim until the
  window slides past its registration time.

``update`` recomputes a full decomposition every step.  ``fast_update``
maintains the factorization incrementally and only falls back to a full
decomposition when the buffers fill, which is substantially faster for
wide sketches; the two paths stay interchangeable on query results.
"""

from __future__ import annotations

import math
import struct
from collections import deque
from dataclasses import dataclass

import numpy as np

from .cod import CodSketch
from .linalg import as_vector, frobenius_norm, qr_decompose, svd

# Residual norms below this (relative) are treated as lying in the span.
DEGENERATE_RTOL = 1e-12
# Orthonormality tolerance enforced by validating sketches.
ORTHO_TOL = 1e-9
# Decomposition and rank-one-removal consistency tolerance (Frobenius).
LEMMA_TOL = 1e-8
# Unit-norm tolerance for the normalized input model.
UNIT_TOL = 1e-9

_MAGIC = b"SOCD"
_FORMAT_VERSION = 1


@dataclass
class Snapshot:
    """One direction peeled out of the sketch.

    ``u @ v.T`` is the mass removed; ``t`` is the registration time and
    ``s`` the registration time of the previous snapshot in the same queue
    (or the epoch start), so consecutive snapshots chain over the stream.
    """

    u: np.ndarray
    v: np.ndarray
    s: int
    t: int


class SnapshotQueue:
    """FIFO of snapshots ordered by registration time."""

    def __init__(self, last_registered: int = 0):
        self.items: deque[Snapshot] = deque()
        # Time of the most recent registration ever; survives expiry so the
        # s-chain stays anchored even when the queue drains.
        self.last_registered = last_registered

    def register(self, u: np.ndarray, v: np.ndarray, t: int) -> None:
        self.items.append(Snapshot(u, v, self.last_registered, t))
        self.last_registered = t

    def expire(self, now: int, window: int) -> None:
        """Drop snapshots that have left the window entirely."""
        while self.items and self.items[0].t + window <= now:
            self.items.popleft()

    def popleft(self) -> Snapshot:
        return self.items.popleft()

    @property
    def head(self) -> Snapshot | None:
        return self.items[0] if self.items else None

    def __len__(self):
        return len(self.items)

    def __iter__(self):
        return iter(self.items)


class DecompState:
    """Q R factorization of a sketch buffer, updated incrementally.

    ``q`` has orthonormal columns; ``r`` is square.  After rank-one
    removals ``r`` is no longer triangular, which nothing here relies on.
    """

    __slots__ = ("q", "r")

    def __init__(self, q: np.ndarray, r: np.ndarray):
        self.q = q
        self.r = r

    @classmethod
    def empty(cls, d: int) -> "DecompState":
        return cls(np.zeros((d, 0)), np.zeros((0, 0)))

    @classmethod
    def from_columns(cls, a: np.ndarray) -> "DecompState":
        q, r = qr_decompose(a)
        return cls(q, r)

    @property
    def width(self) -> int:
        return self.q.shape[1]

    def reconstruct(self) -> np.ndarray:
        return self.q @ self.r

    def copy(self) -> "DecompState":
        return DecompState(self.q.copy(), self.r.copy())


def inc_dec(state: DecompState, x) -> DecompState:
    """Extend a factorization by one appended column without refactoring.

    Returns a new state whose ``q @ r`` reconstructs the old buffer with
    ``x`` appended.  When ``x`` already lies in the span of ``q`` (residual
    below DEGENERATE_RTOL relative to ``x``), the corner entry is exactly
    zero and the new basis column is a re-orthogonalized canonical axis, so
    orthonormality never degrades.
    """
    q, r = state.q, state.r
    d, w = q.shape
    x = as_vector(x, d, "x")
    if w >= d:
        raise ValueError("factorization already spans the full space")
    proj = q.T @ x
    resid = x - q @ proj
    # Second orthogonalization pass; keeps q'q = I tight over long runs.
    corr = q.T @ resid
    resid -= q @ corr
    proj += corr
    nrm = float(np.linalg.norm(resid))
    if nrm < DEGENERATE_RTOL * max(1.0, float(np.linalg.norm(x))):
        new_col = _orthonormal_complement(q)
        corner = 0.0
    else:
        new_col = resid / nrm
        corner = nrm
    q2 = np.empty((d, w + 1))
    q2[:, :w] = q
    q2[:, w] = new_col
    r2 = np.zeros((w + 1, r.shape[1] + 1))
    r2[:w, : r.shape[1]] = r
    r2[:w, -1] = proj
    r2[-1, -1] = corner
    return DecompState(q2, r2)


def _orthonormal_complement(q: np.ndarray) -> np.ndarray:
    """Deterministic unit vector orthogonal to the columns of ``q``."""
    d = q.shape[0]
    # The canonical axis least covered by span(q) has the largest residual.
    cover = np.einsum("ij,ij->i", q, q)
    e = np.zeros(d)
    e[int(np.argmin(cover))] = 1.0
    for _ in range(2):
        e -= q @ (q.T @ e)
    nrm = float(np.linalg.norm(e))
    if nrm == 0.0:
        raise ArithmeticError("failed to find an orthogonal complement")
    return e / nrm


class SketchHalf:
    """One epoch's sketch: buffers, snapshot queue, and factorizations."""

    __slots__ = ("cod", "queue", "decomp_x", "decomp_y")

    def __init__(self, cod: CodSketch, queue: SnapshotQueue,
                 decomp_x: DecompState, decomp_y: DecompState):
        self.cod = cod
        self.queue = queue
        self.decomp_x = decomp_x
        self.decomp_y = decomp_y

    @classmethod
    def fresh(cls, d_x: int, d_y: int, l: int, boundary: int,
              validate: bool) -> "SketchHalf":
        return cls(
            CodSketch(d_x, d_y, l, validate=validate),
            SnapshotQueue(last_registered=boundary),
            DecompState.empty(d_x),
            DecompState.empty(d_y),
        )


class SlidingSketch:
    """Approximate matrix product over the last ``n_window`` column pairs.

    Parameters
    ----------
    d_x, d_y : int
        Row dimensions of the two streams.
    eps : float
        Target accuracy in (0, 1]; drives both the sketch width
        ``l = min(ceil(1/eps), d_x, d_y)`` and the snapshot threshold.
    n_window : int
        Window length in stream positions.
    theta : float, optional
        Snapshot registration threshold; defaults to ``eps * n_window``.
        Layered sketches override it per layer.
    enforce_unit : bool
        Reject non-unit columns (the normalized model).  Layered sketches
        turn this off and bound norms themselves.
    validate : bool
        Cross-check factorizations and rank-one removals at every step.
        Slow; meant for tests.
    """

    def __init__(self, d_x: int, d_y: int, eps: float, n_window: int,
                 theta: float | None = None, enforce_unit: bool = True,
                 validate: bool = False):
        if not (0.0 < eps <= 1.0):
            raise ValueError(f"eps must lie in (0, 1], got {eps}")
        if n_window < 1:
            raise ValueError("n_window must be >= 1")
        if d_x < 1 or d_y < 1:
            raise ValueError("dimensions must be >= 1")
        self.d_x = d_x
        self.d_y = d_y
        self.eps = float(eps)
        self.n_window = int(n_window)
        self.l = min(math.ceil(1.0 / eps), d_x, d_y)
        self.theta = float(eps * n_window) if theta is None else float(theta)
        if self.theta <= 0.0:
            raise ValueError("theta must be positive")
        self.enforce_unit = enforce_unit
        self.validate = validate
        self.now = 0
        self.extraction_count = 0
        self.validated_checks = 0
        self._path: str | None = None
        self.primary = SketchHalf.fresh(d_x, d_y, self.l, 0, validate)
        self.aux = SketchHalf.fresh(d_x, d_y, self.l, 0, validate)

    # -- update paths ------------------------------------------------------

    def update(self, x, y) -> None:
        """Consume one column pair, recomputing decompositions in full."""
        x, y = self._check_pair(x, y)
        self._set_path("simple")
        self._advance()
        for half in (self.primary, self.aux):
            self._simple_insert(half, x, y)

    def fast_update(self, x, y) -> None:
        """Consume one column pair via incremental factorization updates."""
        x, y = self._check_pair(x, y)
        self._set_path("fast")
        self._advance()
        for half in (self.primary, self.aux):
            self._fast_insert(half, x, y)

    def _set_path(self, path: str) -> None:
        if self._path is None:
            self._path = path
        elif self._path != path:
            raise RuntimeError(
                f"sketch already driven by {self._path} updates; "
                "the two paths keep different internal state"
            )

    def _check_pair(self, x, y) -> tuple[np.ndarray, np.ndarray]:
        x = as_vector(x, self.d_x, "x")
        y = as_vector(y, self.d_y, "y")
        if self.enforce_unit:
            for name, col in (("x", x), ("y", y)):
                nrm = float(np.linalg.norm(col))
                if abs(nrm - 1.0) > UNIT_TOL:
                    raise ValueError(
                        f"{name} must be unit-norm (got {nrm}); "
                        "normalize the stream or use the layered sketch"
                    )
        return x, y

    def _advance(self) -> None:
        """Start a new timestamp: window refresh, then snapshot expiry."""
        self.now += 1
        if self.now % self.n_window == 1 % self.n_window:
            # The auxiliary sketch has seen exactly the last epoch; promote
            # it and start a fresh one anchored at the boundary now - 1.
            self.primary = self.aux
            self.aux = SketchHalf.fresh(
                self.d_x, self.d_y, self.l, self.now - 1, self.validate
            )
        for half in (self.primary, self.aux):
            half.queue.expire(self.now, self.n_window)

    # -- simple path -------------------------------------------------------

    def _simple_insert(self, half: SketchHalf, x, y) -> None:
        cod = half.cod
        cod.insert(x, y)
        # Realigned columns are singular-value ordered with
        # ||a_1|| * ||b_1|| = sigma_1, so the loop below walks directions in
        # decreasing weight.
        sigma = cod.realign()
        while sigma.size and sigma[0] >= self.theta:
            half.queue.register(cod.a[:, 0].copy(), cod.b[:, 0].copy(), self.now)
            cod.drop_leading(1)
            sigma = sigma[1:]
            self.extraction_count += 1

    # -- fast path ---------------------------------------------------------

    def _fast_insert(self, half: SketchHalf, x, y) -> None:
        cod = half.cod
        if cod.fill + 1 >= cod.l:
            # Appending would fill the buffers: compress and refactor.
            cod.insert(x, y)
            half.decomp_x = DecompState.from_columns(cod.a[:, : cod.fill])
            half.decomp_y = DecompState.from_columns(cod.b[:, : cod.fill])
        else:
            cod.insert(x, y)
            half.decomp_x = inc_dec(half.decomp_x, x)
            half.decomp_y = inc_dec(half.decomp_y, y)
        if self.validate:
            self._check_decomp(half)
        rx = half.decomp_x.r
        ry = half.decomp_y.r
        if rx.shape[0] == 0:
            return
        u_mat, sigma, v_mat = svd(rx @ ry.T)
        w = cod.fill
        for i in range(sigma.shape[0]):
            si = float(sigma[i])
            if si < self.theta:
                break
            root = math.sqrt(si)
            qx_u = half.decomp_x.q @ u_mat[:, i]
            qy_v = half.decomp_y.q @ v_mat[:, i]
            snap_u = qx_u * root
            snap_v = qy_v * root
            before = cod.product() if self.validate else None
            half.queue.register(snap_u, snap_v, self.now)
            # Rank-one removal: subtracting the direction from buffers and
            # triangular factors in lockstep keeps a = q @ r exact and
            # changes the product by exactly snap_u @ snap_v.T.  Removals
            # for distinct i commute because u_i, v_i come from one SVD.
            coef_x = u_mat[:, i] @ rx
            coef_y = v_mat[:, i] @ ry
            cod.a[:, :w] -= np.outer(qx_u, coef_x)
            cod.b[:, :w] -= np.outer(qy_v, coef_y)
            rx -= np.outer(u_mat[:, i], coef_x)
            ry -= np.outer(v_mat[:, i], coef_y)
            self.extraction_count += 1
            if before is not None:
                expect = before - np.outer(snap_u, snap_v)
                gap = frobenius_norm(cod.product() - expect)
                if gap > LEMMA_TOL:
                    raise AssertionError(
                        f"rank-one removal drifted by {gap} (> {LEMMA_TOL})"
                    )
                self.validated_checks += 1
                self._check_decomp(half)

    def _check_decomp(self, half: SketchHalf) -> None:
        for state, buf in ((half.decomp_x, half.cod.a),
                           (half.decomp_y, half.cod.b)):
            w = state.width
            gram_gap = frobenius_norm(state.q.T @ state.q - np.eye(w))
            if gram_gap > ORTHO_TOL:
                raise AssertionError(f"q lost orthonormality: {gram_gap}")
            recon_gap = frobenius_norm(state.reconstruct() - buf[:, :w])
            if recon_gap > LEMMA_TOL:
                raise AssertionError(f"q @ r drifted from buffer: {recon_gap}")
            self.validated_checks += 1

    # -- queries and accounting ---------------------------------------------

    def query(self) -> tuple[np.ndarray, np.ndarray]:
        """Factors (a_aug, b_aug) with ``a_aug @ b_aug.T`` the estimate.

        Sketch columns come first, snapshot directions after, oldest first.
        Querying before ``window_full`` is allowed; the result then covers
        only the stream seen so far.
        """
        cod = self.primary.cod
        a_cols = [cod.a[:, : cod.fill]]
        b_cols = [cod.b[:, : cod.fill]]
        for snap in self.primary.queue:
            a_cols.append(snap.u[:, None])
            b_cols.append(snap.v[:, None])
        return np.hstack(a_cols), np.hstack(b_cols)

    @property
    def window_full(self) -> bool:
        return self.now >= self.n_window

    @property
    def column_count(self) -> int:
        """Column pairs currently held across both sketches and queues."""
        return (self.primary.cod.fill + self.aux.cod.fill
                + len(self.primary.queue) + len(self.aux.queue))

    def __repr__(self):
        return (
            f"SlidingSketch(d_x={self.d_x}, d_y={self.d_y}, eps={self.eps}, "
            f"n_window={self.n_window}, now={self.now}, cols={self.column_count})"
        )

    # -- serialization -------------------------------------------------------

    def to_bytes(self) -> bytes:
        """Versioned little-endian snapshot of the full sketch state."""
        path_code = {None: 0, "simple": 1, "fast": 2}[self._path]
        parts = [
            _MAGIC,
            struct.pack(
                "<IQQQQQB", _FORMAT_VERSION, self.d_x, self.d_y, self.l,
                self.n_window, self.now, path_code,
            ),
            struct.pack("<dd", self.eps, self.theta),
            struct.pack("<QB", self.extraction_count, int(self.enforce_unit)),
        ]
        for half in (self.primary, self.aux):
            parts.append(_pack_half(half))
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, blob: bytes) -> "SlidingSketch":
        """Rebuild a sketch serialized by :meth:`to_bytes`."""
        cur = _Cursor(blob)
        magic = cur.take(4)
        if magic != _MAGIC:
            raise ValueError(f"bad magic {magic!r}, expected {_MAGIC!r}")
        version, d_x, d_y, l, n_window, now, path_code = cur.unpack("<IQQQQQB")
        if version != _FORMAT_VERSION:
            raise ValueError(f"unsupported format version {version}")
        eps, theta = cur.unpack("<dd")
        extraction_count, enforce_unit = cur.unpack("<QB")
        out = cls(d_x, d_y, eps, n_window, theta=theta,
                  enforce_unit=bool(enforce_unit))
        if out.l != l:
            raise ValueError("sketch width does not match serialized header")
        out.now = now
        out.extraction_count = extraction_count
        out._path = {0: None, 1: "simple", 2: "fast"}[path_code]
        out.primary = _unpack_half(cur, d_x, d_y, l)
        out.aux = _unpack_half(cur, d_x, d_y, l)
        cur.expect_end()
        return out


# -- wire helpers ------------------------------------------------------------


class _Cursor:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.off = 0

    def take(self, n: int) -> bytes:
        if self.off + n > len(self.blob):
            raise ValueError("truncated sketch blob")
        out = self.blob[self.off : self.off + n]
        self.off += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def matrix(self) -> np.ndarray:
        rows, cols = self.unpack("<QQ")
        raw = self.take(8 * rows * cols)
        return np.frombuffer(raw, dtype="<f8").reshape((rows, cols), order="F").copy()

    def vector(self, n: int) -> np.ndarray:
        return np.frombuffer(self.take(8 * n), dtype="<f8").copy()

    def expect_end(self) -> None:
        if self.off != len(self.blob):
            raise ValueError(f"{len(self.blob) - self.off} trailing bytes")


def _pack_matrix(a: np.ndarray) -> bytes:
    rows, cols = a.shape
    return struct.pack("<QQ", rows, cols) + np.ascontiguousarray(
        a, dtype="<f8"
    ).tobytes(order="F")


def _pack_half(half: SketchHalf) -> bytes:
    cod = half.cod
    parts = [
        _pack_matrix(cod.a),
        _pack_matrix(cod.b),
        struct.pack("<Q", cod.fill),
        struct.pack("<qQ", half.queue.last_registered, len(half.queue)),
    ]
    for snap in half.queue:
        parts.append(struct.pack("<qq", snap.s, snap.t))
        parts.append(np.ascontiguousarray(snap.u, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(snap.v, dtype="<f8").tobytes())
    for state in (half.decomp_x, half.decomp_y):
        parts.append(_pack_matrix(state.q))
        parts.append(_pack_matrix(state.r))
    return b"".join(parts)


def _unpack_half(cur: _Cursor, d_x: int, d_y: int, l: int) -> SketchHalf:
    a = cur.matrix()
    b = cur.matrix()
    if a.shape != (d_x, l) or b.shape != (d_y, l):
        raise ValueError("buffer shapes do not match header")
    (fill,) = cur.unpack("<Q")
    if fill > l:
        raise ValueError("fill exceeds sketch width")
    cod = CodSketch(d_x, d_y, l)
    cod.a = a
    cod.b = b
    cod.fill = fill
    last_registered, count = cur.unpack("<qQ")
    queue = SnapshotQueue(last_registered=0)
    for _ in range(count):
        s, t = cur.unpack("<qq")
        u = cur.vector(d_x)
        v = cur.vector(d_y)
        queue.items.append(Snapshot(u, v, s, t))
    queue.last_registered = last_registered
    decomp_x = DecompState(cur.matrix(), cur.matrix())
    decomp_y = DecompState(cur.matrix(), cur.matrix())
    for state, d in ((decomp_x, d_x), (decomp_y, d_y)):
        if state.q.shape[0] != d or state.q.shape[1] != state.r.shape[0]:
            raise ValueError("factorization shapes do not match header")
    return SketchHalf(cod, queue, decomp_x, decomp_y)
