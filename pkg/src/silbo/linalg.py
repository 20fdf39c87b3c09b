"""Dense linear-algebra kernels shared by the rest of the package.

Everything here is a pure function of its arguments (plus an explicit seed
where sketching is involved), so the routines are safe to call from several
threads at once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist


class NumericalError(RuntimeError):
    """Raised when a factorization fails beyond the recoverable jitter range."""


@dataclass(frozen=True)
class SvdResult:
    """Factorization a ~ u @ diag(s) @ v.T, with orthonormal u/v columns and
    s sorted descending."""

    u: np.ndarray
    s: np.ndarray
    v: np.ndarray


def _as_matrix(a, name="a"):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"{name} must be a 2-d matrix, got shape {a.shape}")
    return a


def randomized_svd(a, target_rank, oversampling=10, power_iters=2, seed=0):
    """Sketch-based truncated SVD (Gaussian range finder + subspace iteration).

    With ``power_iters >= 2`` the leading singular triplets of a matrix whose
    numerical rank is at most ``target_rank`` are recovered to near machine
    precision; for general matrices the result is the usual near-optimal
    low-rank approximation.
    """
    a = _as_matrix(a)
    m, n = a.shape
    if target_rank < 1 or target_rank > min(m, n):
        raise ValueError(
            f"target_rank={target_rank} must be in [1, min(m, n)]={min(m, n)}"
        )
    if oversampling < 0:
        raise ValueError("oversampling must be >= 0")
    rng = np.random.default_rng(seed)
    width = min(target_rank + oversampling, min(m, n))
    sketch = rng.standard_normal((n, width))
    q, _ = np.linalg.qr(a @ sketch)
    for _ in range(power_iters):
        q, _ = np.linalg.qr(a.T @ q)
        q, _ = np.linalg.qr(a @ q)
    small = q.T @ a
    u_small, s, vt = np.linalg.svd(small, full_matrices=False)
    u = q @ u_small
    k = target_rank
    return SvdResult(u=u[:, :k], s=s[:k], v=vt[:k].T)


def dense_svd(a):
    """Exact full SVD via LAPACK; raises on non-finite input."""
    a = _as_matrix(a)
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix contains non-finite entries")
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    return SvdResult(u=u, s=s, v=vt.T)


def cholesky(a, jitter=0.0):
    """Lower-triangular factor of ``a + jitter*I``.

    If the factorization fails, the jitter is escalated geometrically (x10,
    starting from the given value, or 1e-12 when starting from zero) up to
    1e-3 before giving up with :class:`NumericalError`.
    """
    a = _as_matrix(a)
    n, m = a.shape
    if n != m:
        raise ValueError(f"matrix must be square, got {a.shape}")
    scale = np.abs(a).max()
    if not np.allclose(a, a.T, atol=1e-8 * max(scale, 1.0), rtol=0.0):
        raise ValueError("matrix must be symmetric")
    eye = np.eye(n)
    current = float(jitter)
    while True:
        try:
            return np.linalg.cholesky(a + current * eye if current > 0.0 else a)
        except np.linalg.LinAlgError:
            nxt = current * 10.0 if current > 0.0 else 1e-12
            if nxt > 1e-3:
                raise NumericalError(
                    f"matrix not positive definite even with jitter {current:g}"
                ) from None
            current = nxt


def pseudo_inverse_apply(b, z):
    """Moore-Penrose pseudo-inverse action b^+ z for a matrix with orthonormal
    rows, where b^+ = b.T; validates row orthonormality first."""
    b = _as_matrix(b, "b")
    z = np.asarray(z, dtype=float)
    gram = b @ b.T
    if np.abs(gram - np.eye(b.shape[0])).max() > 1e-6:
        raise ValueError("rows of b are not orthonormal")
    return b.T @ z


def knn_indices(points, k):
    """Exact k-nearest-neighbor lists under Euclidean distance.

    Self is excluded; distance ties are broken by lower index so results are
    reproducible. Returns an (n, k) integer array.
    """
    points = _as_matrix(points, "points")
    n = points.shape[0]
    if k < 1:
        raise ValueError("k must be >= 1")
    if k >= n:
        raise ValueError(f"k={k} must be smaller than the number of points n={n}")
    d2 = cdist(points, points, metric="sqeuclidean")
    np.fill_diagonal(d2, np.inf)
    order = np.argsort(d2, axis=1, kind="stable")
    return order[:, :k]
