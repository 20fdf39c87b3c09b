"""Gaussian-process regression surrogate over the embedded space.

Matern-5/2 kernel, exact posterior via a cached Cholesky factor, and
marginal-likelihood hyperparameter fitting with a multi-start Nelder-Mead
search on log-parameters. Models are immutable after construction, so
posterior queries are thread-safe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.optimize import minimize
from scipy.spatial.distance import cdist

from . import linalg

NOISE_FLOOR = 1e-10


@dataclass(frozen=True)
class KernelParams:
    """Matern-5/2 hyperparameters (smoothness is fixed)."""

    lengthscale: float = 1.0
    signal_variance: float = 1.0
    noise_variance: float = 1e-6

    def __post_init__(self):
        if np.any(np.asarray(self.lengthscale) <= 0):
            raise ValueError("lengthscale must be positive")
        if self.signal_variance <= 0:
            raise ValueError("signal_variance must be positive")
        if self.noise_variance < NOISE_FLOOR:
            object.__setattr__(self, "noise_variance", NOISE_FLOOR)


def matern52(a, b, params):
    """Kernel matrix between row stacks a (m, r) and b (p, r)."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    ell = np.asarray(params.lengthscale, dtype=float)
    u = cdist(a / ell, b / ell) * math.sqrt(5.0)
    return params.signal_variance * (1.0 + u + u**2 / 3.0) * np.exp(-u)


@dataclass(frozen=True)
class GpModel:
    train_z: np.ndarray
    train_y: np.ndarray
    params: KernelParams
    prior_mean: float
    chol: np.ndarray
    alpha_vec: np.ndarray

    @property
    def input_dim(self):
        return self.train_z.shape[1]


def build_model(train_z, train_y, params, prior_mean=None):
    """Assemble a model with explicit hyperparameters (no fitting)."""
    train_z = np.atleast_2d(np.asarray(train_z, dtype=float))
    train_y = np.asarray(train_y, dtype=float).ravel()
    if train_z.shape[0] != train_y.shape[0]:
        raise ValueError("train_z and train_y disagree on the number of points")
    if not (np.all(np.isfinite(train_z)) and np.all(np.isfinite(train_y))):
        raise ValueError("training data contain non-finite entries")
    mu0 = float(np.mean(train_y)) if prior_mean is None else float(prior_mean)
    gram = matern52(train_z, train_z, params)
    gram[np.diag_indices_from(gram)] += params.noise_variance
    chol = linalg.cholesky(gram, jitter=0.0)
    resid = train_y - mu0
    alpha_vec = solve_triangular(
        chol.T, solve_triangular(chol, resid, lower=True), lower=False
    )
    return GpModel(
        train_z=train_z,
        train_y=train_y,
        params=params,
        prior_mean=mu0,
        chol=chol,
        alpha_vec=alpha_vec,
    )


def log_marginal_likelihood(model):
    resid = model.train_y - model.prior_mean
    m = resid.shape[0]
    return float(
        -0.5 * resid @ model.alpha_vec
        - np.log(np.diag(model.chol)).sum()
        - 0.5 * m * math.log(2 * math.pi)
    )


def posterior(model, z):
    """Exact posterior mean and variance at a single point."""
    z = np.asarray(z, dtype=float).ravel()
    if z.shape[0] != model.input_dim:
        raise ValueError(
            f"query has dimension {z.shape[0]}, model expects {model.input_dim}"
        )
    mu, var = posterior_batch(model, z[None, :])
    return float(mu[0]), float(var[0])


def posterior_batch(model, zs):
    """Posterior mean and variance for a stack of query points (rows)."""
    zs = np.atleast_2d(np.asarray(zs, dtype=float))
    if zs.shape[1] != model.input_dim:
        raise ValueError(
            f"queries have dimension {zs.shape[1]}, model expects {model.input_dim}"
        )
    k_star = matern52(model.train_z, zs, model.params)  # (m, q)
    mu = model.prior_mean + k_star.T @ model.alpha_vec
    v = solve_triangular(model.chol, k_star, lower=True)
    var = model.params.signal_variance - np.sum(v**2, axis=0)
    return mu, np.maximum(var, 0.0)


def _loss(theta, train_z, train_y):
    params = KernelParams(
        lengthscale=math.exp(theta[0]),
        signal_variance=math.exp(theta[1]),
        noise_variance=NOISE_FLOOR + math.exp(theta[2]),
    )
    try:
        return -log_marginal_likelihood(build_model(train_z, train_y, params))
    except (linalg.NumericalError, FloatingPointError, OverflowError):
        return 1e25


def fit(train_z, train_y, restarts=5, seed=0, initial=None):
    """Maximize the log marginal likelihood over the kernel hyperparameters.

    Runs Nelder-Mead from a median-distance heuristic start (or from
    ``initial`` when given, which makes warm-started refits cheap) plus
    seeded log-uniform restarts. Degenerate constant targets short-circuit
    to a flat model with a floored signal variance.
    """
    train_z = np.atleast_2d(np.asarray(train_z, dtype=float))
    train_y = np.asarray(train_y, dtype=float).ravel()
    if train_y.shape[0] < 2:
        raise ValueError("need at least 2 training points to fit")
    if not (np.all(np.isfinite(train_z)) and np.all(np.isfinite(train_y))):
        raise ValueError("training data contain non-finite entries")

    if float(np.ptp(train_y)) < 1e-12:
        params = KernelParams(
            lengthscale=1.0, signal_variance=1e-6, noise_variance=NOISE_FLOOR
        )
        return build_model(train_z, train_y, params)

    rng = np.random.default_rng(seed)
    m = train_z.shape[0]
    sub = train_z if m <= 200 else train_z[rng.choice(m, 200, replace=False)]
    dists = cdist(sub, sub)
    pos = dists[dists > 0]
    ell0 = float(np.median(pos)) if pos.size else 1.0
    y_var = max(float(np.var(train_y)), 1e-8)

    starts = []
    if initial is not None:
        starts.append(
            np.log(
                [
                    float(np.mean(np.asarray(initial.lengthscale))),
                    initial.signal_variance,
                    max(initial.noise_variance, NOISE_FLOOR),
                ]
            )
        )
    starts.append(np.log([ell0, y_var, 1e-6 * y_var]))
    while len(starts) < restarts:
        starts.append(
            np.array(
                [
                    math.log(ell0) + rng.uniform(-2.3, 2.3),
                    math.log(y_var) + rng.uniform(-2.3, 2.3),
                    math.log(y_var) + rng.uniform(-18.0, -4.0),
                ]
            )
        )

    best_theta, best_loss = None, np.inf
    for theta0 in starts[: max(restarts, len(starts))]:
        res = minimize(
            _loss,
            theta0,
            args=(train_z, train_y),
            method="Nelder-Mead",
            options={"maxiter": 150, "xatol": 1e-3, "fatol": 1e-5},
        )
        if res.fun < best_loss:
            best_loss, best_theta = res.fun, res.x
    params = KernelParams(
        lengthscale=math.exp(best_theta[0]),
        signal_variance=math.exp(best_theta[1]),
        noise_variance=NOISE_FLOOR + math.exp(best_theta[2]),
    )
    return build_model(train_z, train_y, params)
