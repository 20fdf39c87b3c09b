"""Acquisition scoring (UCB / EI) and candidate selection.

One call picks both the point to evaluate next and the runner-up candidates
kept as unlabeled points for the next embedding update: candidates are drawn
uniformly in the current search box, scored in one batch, and the top
``n_u + 1`` taken greedily without replacement (scores do not change between
picks, so this equals the top-k of the draw). Ties fall back to the lowest
candidate index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from . import gp


@dataclass(frozen=True)
class AcquisitionSpec:
    kind: str = "ucb"  # "ucb" or "ei"
    beta: float | None = None  # fixed exploration weight; None -> schedule
    xi: float = 0.01
    candidate_count: int = 1000

    def __post_init__(self):
        if self.kind not in ("ucb", "ei"):
            raise ValueError(f"unknown acquisition kind {self.kind!r}")
        if self.xi < 0:
            raise ValueError("xi must be >= 0")
        if self.candidate_count < 1:
            raise ValueError("candidate_count must be >= 1")

    def beta_at(self, t, dim):
        if self.beta is not None:
            return float(self.beta)
        return beta_schedule(t, dim)


def beta_schedule(t, dim):
    """Slowly growing confidence width, clipped to [0.5, 16]."""
    val = 2.0 * math.log(max(dim, 1) * t * t * math.pi**2 / 6.0)
    return float(min(max(val, 0.5), 16.0))


def score(spec, model, z, t, y_best):
    return float(score_batch(spec, model, np.atleast_2d(z), t, y_best)[0])


def score_batch(spec, model, zs, t, y_best):
    mu, var = gp.posterior_batch(model, zs)
    sigma = np.sqrt(var)
    if spec.kind == "ucb":
        return mu + math.sqrt(spec.beta_at(t, model.input_dim)) * sigma
    gain = mu - y_best - spec.xi
    out = np.maximum(gain, 0.0)  # deterministic limit when sigma == 0
    pos = sigma > 1e-12
    u = gain[pos] / sigma[pos]
    out[pos] = gain[pos] * norm.cdf(u) + sigma[pos] * norm.pdf(u)
    return np.maximum(out, 0.0)


def select_candidates(spec, model, box, t, y_best, n_u, seed):
    """Draw candidates in the box and return (z_eval, stack of n_u runner-ups).

    All returned points are distinct: exact duplicate draws are removed
    (keeping the first occurrence) before scoring.
    """
    if n_u < 0:
        raise ValueError("n_u must be >= 0")
    if spec.candidate_count < n_u + 1:
        raise ValueError("candidate_count must be at least n_u + 1")
    rng = np.random.default_rng(seed)
    cands = rng.uniform(box.lo, box.hi, size=(spec.candidate_count, box.dim))
    _, first = np.unique(cands, axis=0, return_index=True)
    if first.shape[0] < cands.shape[0]:
        cands = cands[np.sort(first)]
    scores = score_batch(spec, model, cands, t, y_best)
    order = np.argsort(-scores, kind="stable")
    take = order[: min(n_u + 1, cands.shape[0])]
    return cands[take[0]], cands[take[1:]]
