"""Semi-supervised sliced-inverse-regression embedding learning.

Labeled points are sorted by response and cut into slices; a localized
within-slice neighbor weighting builds the between-slice scatter, while a
k-nearest-neighbor graph Laplacian over labeled *and* unlabeled points
regularizes the within scatter. The resulting generalized eigenproblem

    X' W X beta = lambda X' (I_hat + alpha L) X beta

is solved by a two-stage procedure: a randomized SVD of X'Omega reduces it
to an ordinary SVD of a small matrix, from which the projection rows are
assembled and orthonormalized.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from . import linalg
from .mapping import SearchBox, zonotope_box


@dataclass(frozen=True)
class SliceAssignment:
    """Partition of the labeled points into contiguous runs of the y-sort."""

    slice_count: int
    membership: np.ndarray  # slice id per labeled point, input order
    slices: tuple  # tuple of index arrays, one per slice


@dataclass(frozen=True)
class EmbeddingModel:
    """Learned projection (orthonormal rows) plus the box it induces."""

    b: np.ndarray
    alpha: float
    centering_mean: np.ndarray
    box: SearchBox
    generation: int = 0

    @property
    def r(self):
        return self.b.shape[0]

    @property
    def d(self):
        return self.b.shape[1]

    def project(self, x):
        """Embed one point or a stack of points (rows)."""
        return np.asarray(x, dtype=float) @ self.b.T

    def bumped(self):
        return replace(self, generation=self.generation + 1)


def embedding_from_matrix(b, alpha=0.0, centering_mean=None, generation=0):
    """Wrap an explicit projection matrix (rows must be orthonormal)."""
    b = np.asarray(b, dtype=float)
    if np.abs(b @ b.T - np.eye(b.shape[0])).max() > 1e-8:
        raise ValueError("rows of b must be orthonormal")
    if centering_mean is None:
        centering_mean = np.zeros(b.shape[1])
    return EmbeddingModel(
        b=b,
        alpha=float(alpha),
        centering_mean=np.asarray(centering_mean, dtype=float),
        box=zonotope_box(b),
        generation=generation,
    )


def make_slices(y, h):
    """Cut the ascending sort of y into h contiguous slices of equal size
    (+-1); ties keep input order."""
    y = np.asarray(y, dtype=float).ravel()
    n_l = y.shape[0]
    if h < 2:
        raise ValueError("slice count h must be >= 2")
    if n_l < h:
        raise ValueError(f"need at least h={h} labeled points, got {n_l}")
    order = np.argsort(y, kind="stable")
    parts = np.array_split(order, h)
    membership = np.empty(n_l, dtype=int)
    for sid, part in enumerate(parts):
        membership[part] = sid
    return SliceAssignment(
        slice_count=h, membership=membership, slices=tuple(parts)
    )


def build_omega(x_l, slices, k, n_total=None):
    """Localized slice-weight matrix.

    Entry (i, j) is 1/k_h when labeled samples i and j sit in the same slice
    h and i is among the k nearest neighbors of j there (self always counts,
    so a singleton slice contributes the single entry 1). k_h is the number
    of neighbor pairs in slice h, which makes each slice block sum to one.
    Rows beyond the labeled block (unlabeled points) are all zero.
    """
    x_l = np.asarray(x_l, dtype=float)
    n_l = x_l.shape[0]
    if n_total is None:
        n_total = n_l
    if n_total < n_l:
        raise ValueError("n_total must be >= number of labeled points")
    if k < 1:
        raise ValueError("k must be >= 1")
    omega = np.zeros((n_total, n_l))
    for members in slices.slices:
        m = members.shape[0]
        if m == 0:
            continue
        if m == 1:
            omega[members[0], members[0]] = 1.0
            continue
        kk = min(k, m - 1)
        nbr = linalg.knn_indices(x_l[members], kk)
        pair_count = m * (kk + 1)
        w = 1.0 / pair_count
        for j_local in range(m):
            col = members[j_local]
            omega[col, col] = w
            omega[members[nbr[j_local]], col] = w
    return omega


def graph_laplacian(points, k):
    """Unnormalized Laplacian D - S of the symmetrized kNN graph."""
    points = np.asarray(points, dtype=float)
    n = points.shape[0]
    nbr = linalg.knn_indices(points, k)
    adj = np.zeros((n, n))
    adj[np.arange(n)[:, None], nbr] = 1.0
    adj = np.maximum(adj, adj.T)
    return np.diag(adj.sum(axis=1)) - adj


def build_laplacian_operator(x_all, k, alpha, n_l, jitter=1e-10):
    """Return X' M with M M' = I_hat + alpha*L (Cholesky with jitter).

    x_all stacks labeled rows first; I_hat is the identity on the labeled
    block and zero elsewhere.
    """
    x_all = np.asarray(x_all, dtype=float)
    n = x_all.shape[0]
    if n_l < 1 or n_l > n:
        raise ValueError("n_l must be in [1, n]")
    reg = np.zeros((n, n))
    reg[np.arange(n_l), np.arange(n_l)] = 1.0
    if alpha > 0.0:
        reg = reg + alpha * graph_laplacian(x_all, k)
    m = linalg.cholesky(reg, jitter=jitter)
    return x_all.T @ m


def solve_embedding(
    x_l,
    y_l,
    x_u,
    r,
    h,
    k,
    alpha,
    seed,
    sketch_rank=None,
    oversampling=10,
    power_iters=2,
):
    """Learn the projection matrix from labeled and unlabeled points.

    Pipeline: center the stacked data, build the slice weights and the
    regularized within operator, take a randomized SVD of X'Omega, reduce to
    the small matrix A = S1^-1 U1' X'M, run an exact SVD on A, and assemble
    the rows from the directions with the *smallest* singular values of A
    (the reduction inverts the generalized eigenvalue, so small singular
    values correspond to dominant directions). Rows are QR-orthonormalized,
    preserving their dominance order.

    ``sketch_rank`` defaults to the full numerical rank budget min(d, n_l),
    which makes the solve exact whenever the labeled points span the
    relevant space; lower it to trade accuracy for speed in very high
    dimension.
    """
    x_l = np.asarray(x_l, dtype=float)
    y_l = np.asarray(y_l, dtype=float).ravel()
    if x_u is None or (hasattr(x_u, "__len__") and len(x_u) == 0):
        x_u = np.zeros((0, x_l.shape[1]))
    x_u = np.asarray(x_u, dtype=float)
    if x_u.ndim != 2 or x_u.shape[1] != x_l.shape[1]:
        raise ValueError("x_u must be (n_u, d) with the same d as x_l")
    n_l, d = x_l.shape
    n = n_l + x_u.shape[0]
    if y_l.shape[0] != n_l:
        raise ValueError("y_l length must match the number of labeled points")
    if not (np.all(np.isfinite(x_l)) and np.all(np.isfinite(x_u))):
        raise ValueError("inputs contain non-finite entries")
    if not np.all(np.isfinite(y_l)):
        raise ValueError("y_l contains non-finite entries")
    if r < 1 or r > min(d, n):
        raise ValueError(f"r={r} must be in [1, min(d, n)]={min(d, n)}")

    slices = make_slices(y_l, h)
    x = np.vstack([x_l, x_u]) if x_u.shape[0] else x_l
    mean = x.mean(axis=0)
    xc = x - mean

    omega = build_omega(x_l, slices, k, n_total=n)
    xt_omega = xc.T @ omega  # (d, n_l)
    k_graph = min(k, n - 1)
    xt_m = build_laplacian_operator(xc, k_graph, alpha, n_l)  # (d, n)

    q = min(d, n_l) if sketch_rank is None else min(sketch_rank, d, n_l)
    fact = linalg.randomized_svd(
        xt_omega, q, oversampling=oversampling, power_iters=power_iters, seed=seed
    )
    keep = fact.s > 1e-10
    q_eff = int(keep.sum())
    if q_eff < q:
        warnings.warn(
            f"between-slice operator is rank deficient ({q_eff} < {q}); truncating",
            stacklevel=2,
        )
    if q_eff == 0:
        raise linalg.NumericalError("between-slice operator is numerically zero")
    u1 = fact.u[:, keep]
    s1 = fact.s[keep]

    a_small = (u1.T @ xt_m) / s1[:, None]
    fact2 = linalg.dense_svd(a_small)
    r_eff = min(r, q_eff)
    if r_eff < r:
        warnings.warn(
            f"only {r_eff} embedding directions available (requested {r})",
            stacklevel=2,
        )
    cols = fact2.u[:, ::-1][:, :r_eff]  # ascending singular values of A
    b = (u1 @ (cols / s1[:, None])).T  # (r_eff, d)

    q_mat, _ = np.linalg.qr(b.T)
    b = q_mat.T.copy()
    for i in range(b.shape[0]):  # deterministic sign
        j = int(np.argmax(np.abs(b[i])))
        if b[i, j] < 0:
            b[i] = -b[i]

    return EmbeddingModel(
        b=b,
        alpha=float(alpha),
        centering_mean=mean,
        box=zonotope_box(b),
        generation=0,
    )


def embedding_table(model, x_points, y_values):
    """(z, y) rows for labeled points under the current projection."""
    z = model.project(np.asarray(x_points, dtype=float))
    y = np.asarray(y_values, dtype=float).reshape(-1, 1)
    return np.hstack([z, y])
