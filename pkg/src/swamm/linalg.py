"""Dense linear algebra kernels shared by the sketching code.

Matrices are plain 2-D float64 numpy arrays.  Every entry point validates
shape and finiteness before touching LAPACK, so sketches can assume clean
inputs downstream.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

# Reconstruction tolerance for QR factorizations (also orthonormality).
RECON_TOL = 1e-9
# Reconstruction tolerance for singular value decompositions.
SVD_TOL = 1e-8
# Relative convergence tolerance for the power iteration fallback.
POWER_TOL = 1e-6
# Power iteration gives up after this many sweeps.
POWER_MAX_ITERS = 10_000
# Matrices whose smaller dimension is at most this use a full SVD instead.
SPECTRAL_SVD_CUTOFF = 64

_POWER_SEED = 0x5EED


class SvdResult(NamedTuple):
    """Thin SVD ``a = u @ diag(sigma) @ v.T``.

    ``u`` and ``v`` both carry orthonormal columns; ``sigma`` is
    non-increasing and non-negative.
    """

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce ``a`` to a finite 2-D float64 array or raise ValueError."""
    out = np.asarray(a, dtype=np.float64)
    if out.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got ndim={out.ndim}")
    if out.size and not np.isfinite(out).all():
        raise ValueError(f"{name} contains non-finite entries")
    return out


def as_vector(x, dim: int | None = None, name: str = "vector") -> np.ndarray:
    """Coerce ``x`` to a finite 1-D float64 array, optionally of length ``dim``."""
    out = np.asarray(x, dtype=np.float64)
    if out.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got ndim={out.ndim}")
    if dim is not None and out.shape[0] != dim:
        raise ValueError(f"{name} has length {out.shape[0]}, expected {dim}")
    if out.size and not np.isfinite(out).all():
        raise ValueError(f"{name} contains non-finite entries")
    return out


def qr_decompose(a) -> tuple[np.ndarray, np.ndarray]:
    """Reduced QR factorization of a tall (or square) matrix.

    Parameters
    ----------
    a : array, shape (m, n) with m >= n
        Matrix to factor.  Zero columns are fine; R just picks up zero rows.

    Returns
    -------
    q : array, shape (m, n)
        Orthonormal columns.
    r : array, shape (n, n)
        Upper triangular, ``q @ r == a`` to within RECON_TOL.
    """
    a = as_matrix(a, "a")
    m, n = a.shape
    if m < 1:
        raise ValueError("a needs at least one row")
    if m < n:
        raise ValueError(f"qr_decompose expects rows >= cols, got {a.shape}")
    if n == 0:
        return np.zeros((m, 0)), np.zeros((0, 0))
    q, r = np.linalg.qr(a, mode="reduced")
    return q, r


def svd(a) -> SvdResult:
    """Thin SVD with right factor returned column-orthonormal (not transposed)."""
    a = as_matrix(a, "a")
    if a.shape[0] == 0 or a.shape[1] == 0:
        k = 0
        return SvdResult(np.zeros((a.shape[0], k)), np.zeros(k), np.zeros((a.shape[1], k)))
    u, sigma, vt = np.linalg.svd(a, full_matrices=False)
    return SvdResult(u, sigma, vt.T)


def frobenius_norm(a) -> float:
    """Frobenius norm; zero for empty matrices."""
    a = as_matrix(a, "a")
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, "fro"))


def spectral_norm(a) -> float:
    """Largest singular value of ``a``.

    Small matrices (min dimension <= SPECTRAL_SVD_CUTOFF) go through a full
    SVD.  Larger ones use power iteration on the gram matrix with a fixed
    seeded start vector, relative tolerance POWER_TOL, and an iteration cap
    of POWER_MAX_ITERS, so the result is deterministic.
    """
    a = as_matrix(a, "a")
    m, n = a.shape
    if a.size == 0:
        return 0.0
    if min(m, n) <= SPECTRAL_SVD_CUTOFF:
        return float(np.linalg.svd(a, compute_uv=False)[0])
    # Iterate on the smaller gram matrix.
    gram = a.T @ a if n <= m else a @ a.T
    k = gram.shape[0]
    rng = np.random.default_rng(_POWER_SEED)
    v = rng.standard_normal(k)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(POWER_MAX_ITERS):
        w = gram @ v
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            return 0.0
        v = w / nw
        new_est = float(v @ (gram @ v))
        if abs(new_est - est) <= POWER_TOL * max(new_est, np.finfo(float).tiny):
            est = new_est
            break
        est = new_est
    return float(np.sqrt(max(est, 0.0)))


def shrink_singular_values(sigma, l: int) -> tuple[float, np.ndarray]:
    """Soft-threshold a singular value vector at its middle entry.

    ``delta`` is the value at 1-based position ``ceil(l / 2)`` (zero when
    fewer values exist) and every entry is shrunk by it, clamping at zero.
    With a full-length input at most ``ceil(l / 2) - 1`` entries stay
    strictly positive.

    Returns ``(delta, shrunk)``.
    """
    sigma = np.asarray(sigma, dtype=np.float64)
    if sigma.ndim != 1:
        raise ValueError("sigma must be 1-D")
    if l < 1:
        raise ValueError("l must be >= 1")
    if sigma.shape[0] > l:
        raise ValueError(f"got {sigma.shape[0]} singular values for sketch size {l}")
    if sigma.size and not np.isfinite(sigma).all():
        raise ValueError("sigma contains non-finite entries")
    if np.any(np.diff(sigma) > 0):
        raise ValueError("sigma must be non-increasing")
    if np.any(sigma < 0):
        raise ValueError("sigma must be non-negative")
    mid = (l + 1) // 2  # 1-based index of the shrinkage pivot
    delta = float(sigma[mid - 1]) if sigma.shape[0] >= mid else 0.0
    shrunk = np.maximum(sigma - delta, 0.0)
    return delta, shrunk
