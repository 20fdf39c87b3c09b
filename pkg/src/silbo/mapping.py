"""Connections between the embedded search space and the original cube.

Covers the smallest box containing the zonotope image of ``[-1, 1]^d``, the
two strategies for turning an embedded candidate into a point that can be
evaluated (cheap transpose mapping with clipping, and least-squares mapping
solved by CMA-ES), and the two ways of keeping the surrogate training set
consistent after the projection matrix changes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import linalg


class ReconcileError(RuntimeError):
    """An objective re-evaluation during reconciliation failed."""


@dataclass(frozen=True)
class SearchBox:
    """Axis-aligned box, symmetric about the origin (lo == -hi)."""

    lo: np.ndarray
    hi: np.ndarray

    @property
    def dim(self):
        return self.lo.shape[0]

    def contains(self, z, atol=1e-9):
        z = np.asarray(z, dtype=float)
        return bool(np.all(z >= self.lo - atol) and np.all(z <= self.hi + atol))


def zonotope_box(b):
    """Smallest box containing {b @ x : x in [-1, 1]^d}: half-widths are the
    row-wise L1 norms of b."""
    b = np.asarray(b, dtype=float)
    hi = np.abs(b).sum(axis=1)
    return SearchBox(lo=-hi, hi=hi)


def bottom_up_map(b, z):
    """x = b.T @ z, clipped component-wise into the cube [-1, 1]^d."""
    b = np.asarray(b, dtype=float)
    z = np.asarray(z, dtype=float)
    return np.clip(b.T @ z, -1.0, 1.0)


@dataclass(frozen=True)
class TrainingPoint:
    uid: int
    x: np.ndarray
    z: np.ndarray
    y: float


@dataclass
class TrainingSet:
    """Ordered (z, y) pairs with the high-dimensional point that produced y."""

    points: list[TrainingPoint] = field(default_factory=list)
    _next_uid: int = 0

    def __len__(self):
        return len(self.points)

    def add(self, x, z, y):
        self.points.append(
            TrainingPoint(
                uid=self._next_uid,
                x=np.asarray(x, dtype=float).copy(),
                z=np.asarray(z, dtype=float).copy(),
                y=float(y),
            )
        )
        self._next_uid += 1

    def zs(self):
        return np.array([p.z for p in self.points])

    def ys(self):
        return np.array([p.y for p in self.points])

    def xs(self):
        return np.array([p.x for p in self.points])

    def uids(self):
        return [p.uid for p in self.points]


def top_down_reconcile(ts, b_new):
    """Re-project every stored x into the new embedded space; the stored
    (x, y) pairs are untouched and no objective evaluation happens."""
    b_new = np.asarray(b_new, dtype=float)
    out = TrainingSet(_next_uid=ts._next_uid)
    out.points = [
        TrainingPoint(uid=p.uid, x=p.x, z=b_new @ p.x, y=p.y) for p in ts.points
    ]
    return out


def bottom_up_reconcile(ts, b_old, b_new, objective):
    """Keep the embedded points, re-map and re-evaluate their images.

    Each stored z is first rescaled per-dimension from the old search box to
    the new one (the boxes change with the projection matrix), then mapped
    through ``bottom_up_map(b_new, .)`` and re-evaluated. Costs exactly
    ``len(ts)`` objective evaluations. If any evaluation comes back
    non-finite the reconcile is aborted and :class:`ReconcileError` raised;
    the caller keeps its old state.
    """
    b_old = np.asarray(b_old, dtype=float)
    b_new = np.asarray(b_new, dtype=float)
    old_hi = zonotope_box(b_old).hi
    new_hi = zonotope_box(b_new).hi
    scale = new_hi / old_hi
    fresh = []
    for p in ts.points:
        z_new = p.z * scale
        x_new = bottom_up_map(b_new, z_new)
        y_new = float(objective(x_new))
        if not math.isfinite(y_new):
            raise ReconcileError(
                f"objective returned non-finite value while re-evaluating uid={p.uid}"
            )
        fresh.append(TrainingPoint(uid=p.uid, x=x_new, z=z_new, y=y_new))
    out = TrainingSet(_next_uid=ts._next_uid)
    out.points = fresh
    return out


def rescale_to_box(z, b_old, b_new):
    """Per-dimension rescaling of embedded points from b_old's box to b_new's."""
    scale = zonotope_box(b_new).hi / zonotope_box(b_old).hi
    return np.asarray(z, dtype=float) * scale


def cmaes_minimize(objective, lo, hi, budget, seed, x0=None, sigma0=0.3):
    """Box-constrained CMA-ES minimization of a black-box function.

    Standard (mu/mu_w, lambda) covariance matrix adaptation with rank-one and
    rank-mu updates. Box handling: offspring falling outside the box are
    resampled a few times; stragglers are projected onto the box for
    evaluation and ranked with a quadratic projection penalty. Deterministic
    for a fixed seed. Returns the best feasible point and its value.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    d = lo.shape[0]
    if budget < 10 * d:
        raise ValueError(f"budget={budget} must be at least 10*d={10 * d}")
    rng = np.random.default_rng(seed)

    lam = 4 + int(3 * math.log(d))
    mu = lam // 2
    raw = math.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
    weights = raw / raw.sum()
    mueff = 1.0 / np.sum(weights**2)
    cs = (mueff + 2) / (d + mueff + 5)
    ds = 1 + 2 * max(0.0, math.sqrt((mueff - 1) / (d + 1)) - 1) + cs
    cc = (4 + mueff / d) / (d + 4 + 2 * mueff / d)
    c1 = 2 / ((d + 1.3) ** 2 + mueff)
    cmu = min(1 - c1, 2 * (mueff - 2 + 1 / mueff) / ((d + 2) ** 2 + mueff))
    chi_n = math.sqrt(d) * (1 - 1 / (4 * d) + 1 / (21 * d * d))

    center = (lo + hi) / 2
    mean = center.copy() if x0 is None else np.clip(np.asarray(x0, float), lo, hi)
    sigma = sigma0 * float(np.mean(hi - lo)) / 2.0
    sigma_init = sigma
    cov = np.eye(d)
    basis = np.eye(d)
    scales = np.ones(d)
    inv_sqrt = np.eye(d)
    ps = np.zeros(d)
    pc = np.zeros(d)

    best_x = mean.copy()
    best_f = float(objective(best_x))
    n_evals = 1
    last_eig = 0
    # refresh the eigen system roughly as often as the covariance can change
    eig_gap = max(1, int(0.5 / (d * (c1 + cmu))))
    gen = 0

    while n_evals + lam <= budget:
        gen += 1
        if gen - last_eig >= eig_gap:
            cov = (cov + cov.T) / 2
            vals, basis = np.linalg.eigh(cov)
            vals = np.maximum(vals, 1e-20)
            scales = np.sqrt(vals)
            inv_sqrt = basis @ np.diag(1.0 / scales) @ basis.T
            last_eig = gen

        z = rng.standard_normal((lam, d))
        steps = z @ (basis * scales).T
        cand = mean + sigma * steps
        for _ in range(10):
            outside = np.any((cand < lo) | (cand > hi), axis=1)
            if not outside.any():
                break
            z[outside] = rng.standard_normal((int(outside.sum()), d))
            steps[outside] = z[outside] @ (basis * scales).T
            cand[outside] = mean + sigma * steps[outside]
        cand_eval = np.clip(cand, lo, hi)
        penalty = np.sum((cand - cand_eval) ** 2, axis=1)
        f_raw = np.array([float(objective(x)) for x in cand_eval])
        n_evals += lam
        fitness = f_raw + penalty

        i_best = int(np.argmin(f_raw))
        if f_raw[i_best] < best_f:
            best_f = float(f_raw[i_best])
            best_x = cand_eval[i_best].copy()

        order = np.argsort(fitness, kind="stable")
        sel = order[:mu]
        step_w = weights @ steps[sel]
        mean = mean + sigma * step_w

        ps = (1 - cs) * ps + math.sqrt(cs * (2 - cs) * mueff) * (inv_sqrt @ step_w)
        h_sig = float(
            np.linalg.norm(ps)
            / math.sqrt(1 - (1 - cs) ** (2 * (gen + 1)))
            / chi_n
            < 1.4 + 2 / (d + 1)
        )
        pc = (1 - cc) * pc + h_sig * math.sqrt(cc * (2 - cc) * mueff) * step_w
        rank_mu = (steps[sel].T * weights) @ steps[sel]
        cov = (
            (1 - c1 - cmu) * cov
            + c1 * (np.outer(pc, pc) + (1 - h_sig) * cc * (2 - cc) * cov)
            + cmu * rank_mu
        )
        sigma *= math.exp((cs / ds) * (np.linalg.norm(ps) / chi_n - 1))
        sigma = min(max(sigma, 1e-14), 1e4 * sigma_init)
        if sigma <= 2e-14:
            break

    return best_x, best_f


def top_down_map(b, z, solver_budget=None, seed=0):
    """Find x in [-1, 1]^d minimizing ||b @ x - z||^2 and the residual norm.

    The transpose candidate x0 = b.T @ z is an exact solution whenever it is
    feasible (b has orthonormal rows, so b @ x0 == z), and is returned
    immediately in that case. Otherwise CMA-ES is started from clip(x0);
    because the start point is evaluated first, the result is never worse
    than clip(x0).
    """
    b = np.asarray(b, dtype=float)
    z = np.asarray(z, dtype=float)
    d = b.shape[1]
    x0 = b.T @ z
    if np.all(np.abs(x0) <= 1.0):
        return x0, 0.0
    if solver_budget is None:
        solver_budget = min(200 * d, 20000)
    solver_budget = max(solver_budget, 10 * d)

    def sq_residual(x):
        r = b @ x - z
        return float(r @ r)

    ones = np.ones(d)
    x, val = cmaes_minimize(
        sq_residual, -ones, ones, solver_budget, seed, x0=np.clip(x0, -1.0, 1.0)
    )
    return x, math.sqrt(max(val, 0.0))
