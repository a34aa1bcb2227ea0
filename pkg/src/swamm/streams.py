"""Synthetic column-pair streams and the on-disk stream format.

Streams are matrix pairs (X, Y) with one time step per column.  The file
format is a fixed header (magic ``SWAM``, version, dimensions) followed by
the records in time order, each a run of ``d_x + d_y`` little-endian
doubles.
"""

from __future__ import annotations

import struct
from typing import Iterator, NamedTuple

import numpy as np

MAGIC = b"SWAM"
FORMAT_VERSION = 1

_HEADER = struct.Struct("<4sIIII")


class StreamFormatError(Exception):
    """A stream file is truncated or malformed."""


class StreamRecord(NamedTuple):
    t: int  # 1-based position in the stream
    x: np.ndarray
    y: np.ndarray


def gen_uniform_random(d_x: int, d_y: int, n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Entries drawn i.i.d. uniform on [0, 1); X first, then Y."""
    _check_sizes(d_x, d_y, n)
    rng = np.random.default_rng(seed)
    x = rng.random((d_x, n))
    y = rng.random((d_y, n))
    return x, y


def gen_random_noisy(d_x: int, d_y: int, n: int, signal_dim: int,
                     zeta: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Low-rank signal with linearly decaying spectrum plus white noise.

    Each side is built as ``S @ D @ rot.T + noise / zeta`` (transposed to
    column-per-step): S is n x m standard normal, D scales component i by
    ``1 - (i - 1) / m``, rot is a random d x m orthonormal basis, and the
    noise is standard normal.  Larger ``zeta`` means cleaner signal.
    Both sides draw from one generator in a fixed order (S, rotation,
    noise; X side first), so a seed pins the whole stream.
    """
    _check_sizes(d_x, d_y, n)
    m = signal_dim
    if m < 1 or m > min(d_x, d_y):
        raise ValueError(f"signal_dim must lie in [1, min(d_x, d_y)], got {m}")
    if zeta <= 0:
        raise ValueError("zeta must be positive")
    rng = np.random.default_rng(seed)
    x = _noisy_side(rng, d_x, n, m, zeta)
    y = _noisy_side(rng, d_y, n, m, zeta)
    return x, y


def _noisy_side(rng: np.random.Generator, d: int, n: int, m: int,
                zeta: float) -> np.ndarray:
    coords = rng.standard_normal((n, m))
    decay = 1.0 - np.arange(m) / m
    rot, _ = np.linalg.qr(rng.standard_normal((d, m)))
    noise = rng.standard_normal((n, d))
    side_t = (coords * decay) @ rot.T + noise / zeta
    return np.ascontiguousarray(side_t.T)


def _check_sizes(d_x: int, d_y: int, n: int) -> None:
    if d_x < 1 or d_y < 1:
        raise ValueError("dimensions must be >= 1")
    if n < 1:
        raise ValueError("n must be >= 1")


def normalize_columns(a: np.ndarray) -> np.ndarray:
    """Rescale every column to unit norm; zero columns are an error."""
    norms = np.linalg.norm(a, axis=0)
    if np.any(norms == 0.0):
        raise ValueError("cannot normalize a zero column")
    return a / norms


def iter_records(x: np.ndarray, y: np.ndarray) -> Iterator[StreamRecord]:
    """Walk a stream pair column by column with 1-based timestamps."""
    if x.shape[1] != y.shape[1]:
        raise ValueError("X and Y must have the same number of columns")
    for t in range(x.shape[1]):
        yield StreamRecord(t + 1, x[:, t], y[:, t])


def write_stream(path, x: np.ndarray, y: np.ndarray) -> None:
    """Write a stream pair to ``path`` in the binary record format."""
    x = np.ascontiguousarray(x, dtype="<f8")
    y = np.ascontiguousarray(y, dtype="<f8")
    if x.ndim != 2 or y.ndim != 2 or x.shape[1] != y.shape[1]:
        raise ValueError("streams must be 2-D with matching column counts")
    d_x, n = x.shape
    d_y = y.shape[0]
    records = np.empty((n, d_x + d_y), dtype="<f8")
    records[:, :d_x] = x.T
    records[:, d_x:] = y.T
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, d_x, d_y, n))
        fh.write(records.tobytes())


def read_stream(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a stream file back into (X, Y) matrices."""
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise StreamFormatError("stream file shorter than its header")
        magic, version, d_x, d_y, n = _HEADER.unpack(head)
        if magic != MAGIC:
            raise StreamFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
        if version != FORMAT_VERSION:
            raise StreamFormatError(f"unsupported stream version {version}")
        body = fh.read()
    expected = 8 * n * (d_x + d_y)
    if len(body) != expected:
        raise StreamFormatError(
            f"stream body has {len(body)} bytes, expected {expected}"
        )
    records = np.frombuffer(body, dtype="<f8").reshape((n, d_x + d_y))
    x = np.ascontiguousarray(records[:, :d_x].T)
    y = np.ascontiguousarray(records[:, d_x:].T)
    return x, y
