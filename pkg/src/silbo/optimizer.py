"""Outer optimization loops: the iterative-embedding method plus baselines.

All loops share the trace format: one row per iteration carrying the chosen
embedded point, its high-dimensional image, the observed value, the running
incumbent, the embedding generation, and the cumulative number of objective
evaluations (re-evaluations triggered by embedding updates included). Runs
are deterministic given their seed.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, asdict, replace

import numpy as np

from . import acquisition, gp, mapping, semisir
from .acquisition import AcquisitionSpec

STRATEGIES = ("bottom_up", "top_down")


@dataclass
class OptimizerConfig:
    dim: int
    embed_dim: int
    iterations: int
    n_init: int | None = None  # None -> max(2 * embed_dim, 10)
    n_unlabeled: int = 50
    b_update_period: int = 20
    strategy: str = "top_down"
    acquisition: AcquisitionSpec = field(default_factory=AcquisitionSpec)
    slices: int = 5
    knn_k: int = 7
    laplacian_alpha: float = 1.0
    seed: int = 0
    max_unlabeled: int | None = 500  # cap on the accumulated unlabeled pool
    top_down_budget: int | None = None  # None -> min(200 * dim, 20000)
    unlabeled_mapping_budget: int | None = None  # None -> min(40 * dim, 4000)
    gp_restarts: int = 2
    fixed_embedding: np.ndarray | None = None  # frozen projection (tests/baselines)

    def validate(self):
        if self.dim < 1 or self.embed_dim < 1 or self.embed_dim > self.dim:
            raise ValueError("need 1 <= embed_dim <= dim")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.b_update_period < 1:
            raise ValueError("b_update_period must be >= 1")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}")
        if self.n_unlabeled < 0:
            raise ValueError("n_unlabeled must be >= 0")
        if self.acquisition.candidate_count < self.n_unlabeled + 1:
            raise ValueError("candidate_count must be at least n_unlabeled + 1")

    @property
    def resolved_n_init(self):
        return self.n_init if self.n_init is not None else max(2 * self.embed_dim, 10)


@dataclass
class IterationRecord:
    t: int
    z: np.ndarray | None
    x: np.ndarray
    y: float
    best: float
    b_generation: int
    f_evals: int
    warning: str = ""


@dataclass
class RunRecord:
    method: str
    config: dict
    rows: list
    best_x: np.ndarray
    best_y: float
    f_evals: int
    b_updates: int

    def trace_columns(self):
        """Arrays for the t,y,best,f_evals,b_gen trace layout."""
        return {
            "t": np.array([r.t for r in self.rows]),
            "y": np.array([r.y for r in self.rows]),
            "best": np.array([r.best for r in self.rows]),
            "f_evals": np.array([r.f_evals for r in self.rows]),
            "b_gen": np.array([r.b_generation for r in self.rows]),
        }


class _CountingObjective:
    """Wraps the raw objective: counts calls, tracks the incumbent over every
    evaluation made, and turns non-finite returns into -inf."""

    def __init__(self, objective):
        self._objective = objective
        self.count = 0
        self.best_y = -math.inf
        self.best_x = None

    def __call__(self, x):
        value = float(self._objective(x))
        self.count += 1
        if not math.isfinite(value):
            return -math.inf
        if value > self.best_y:
            self.best_y = value
            self.best_x = np.asarray(x, dtype=float).copy()
        return value


def latin_hypercube(n, d, rng):
    """Stratified uniform design on [-1, 1]^d."""
    u = np.empty((n, d))
    for j in range(d):
        u[:, j] = (rng.permutation(n) + rng.uniform(size=n)) / n
    return 2.0 * u - 1.0


def _config_echo(config, method):
    out = asdict(config)
    out["acquisition"] = asdict(config.acquisition)
    out["fixed_embedding"] = (
        None if config.fixed_embedding is None else "provided"
    )
    out["n_init"] = config.resolved_n_init
    out["method"] = method
    return out


def _learn_embedding(xs, ys, x_unlabeled, config, seed):
    """Guarded embedding solve: slice count adapts to the labeled count."""
    n_lab = len(ys)
    h_eff = min(config.slices, n_lab // 2)
    if h_eff < 2:
        raise ValueError(f"too few labeled points ({n_lab}) to slice")
    return semisir.solve_embedding(
        np.asarray(xs),
        np.asarray(ys),
        x_unlabeled,
        r=config.embed_dim,
        h=h_eff,
        k=config.knn_k,
        alpha=config.laplacian_alpha,
        seed=seed,
    )


def _fit_gp(ts, config, seed, initial=None):
    return gp.fit(
        ts.zs(), ts.ys(), restarts=config.gp_restarts, seed=seed, initial=initial
    )


def run_silbo(objective, config):
    """Iterative-embedding Bayesian optimization (maximization).

    Draws an initial labeled design and unlabeled pool, learns the first
    projection from them, then loops: acquire one evaluation point plus
    runner-up unlabeled points in the embedded box, map them back, evaluate,
    refit the surrogate, and periodically relearn the projection, keeping
    the training set consistent per the configured strategy.
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    counter = _CountingObjective(objective)
    d = config.dim
    bottom_up = config.strategy == "bottom_up"
    method = "silbo-bu" if bottom_up else "silbo-td"
    td_budget = (
        config.top_down_budget
        if config.top_down_budget is not None
        else min(200 * d, 20000)
    )
    td_budget_u = (
        config.unlabeled_mapping_budget
        if config.unlabeled_mapping_budget is not None
        else min(40 * d, 4000)
    )

    lab_x = list(latin_hypercube(config.resolved_n_init, d, rng))
    lab_y = [counter(x) for x in lab_x]
    pool_x = list(rng.uniform(-1.0, 1.0, size=(config.n_unlabeled, d)))

    def finite_labeled():
        xs = [x for x, y in zip(lab_x, lab_y) if math.isfinite(y)]
        ys = [y for y in lab_y if math.isfinite(y)]
        return xs, ys

    xs, ys = finite_labeled()
    if config.fixed_embedding is not None:
        model = semisir.embedding_from_matrix(config.fixed_embedding)
    else:
        model = _learn_embedding(
            xs, ys, np.asarray(pool_x), config, int(rng.integers(2**63))
        )
    pool_z = [model.b @ x for x in pool_x]

    ts = mapping.TrainingSet()
    for x, y in zip(lab_x, lab_y):
        if math.isfinite(y):
            ts.add(x, model.b @ x, y)
    surrogate = _fit_gp(ts, config, int(rng.integers(2**63)))

    rows = []
    generation = 0
    for t in range(1, config.iterations + 1):
        warning = ""
        z_eval, z_unl = acquisition.select_candidates(
            config.acquisition,
            surrogate,
            model.box,
            t,
            counter.best_y,
            config.n_unlabeled,
            int(rng.integers(2**63)),
        )
        if bottom_up:
            x_eval = mapping.bottom_up_map(model.b, z_eval)
            x_unl = [mapping.bottom_up_map(model.b, zu) for zu in z_unl]
        else:
            x_eval, residual = mapping.top_down_map(
                model.b, z_eval, td_budget, int(rng.integers(2**63))
            )
            if residual > 1e-3 * max(np.linalg.norm(z_eval), 1e-12):
                warning = f"mapping residual {residual:.3e}"
            x_unl = [
                mapping.top_down_map(model.b, zu, td_budget_u, int(rng.integers(2**63)))[0]
                for zu in z_unl
            ]

        y_t = counter(x_eval)
        lab_x.append(x_eval)
        lab_y.append(y_t)
        if math.isfinite(y_t):
            ts.add(x_eval, z_eval, y_t)
        pool_x.extend(x_unl)
        pool_z.extend(z_unl)
        if config.max_unlabeled is not None and len(pool_x) > config.max_unlabeled:
            pool_x = pool_x[-config.max_unlabeled :]
            pool_z = pool_z[-config.max_unlabeled :]

        surrogate = _fit_gp(
            ts, config, int(rng.integers(2**63)), initial=surrogate.params
        )

        if config.fixed_embedding is None and t % config.b_update_period == 0:
            xs, ys = finite_labeled()
            if len(ys) >= 4:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    new_model = _learn_embedding(
                        xs, ys, np.asarray(pool_x), config, int(rng.integers(2**63))
                    )
                if new_model.r != model.r:
                    warning = (warning + "; " if warning else "") + (
                        "embedding update skipped (rank collapse)"
                    )
                elif bottom_up:
                    try:
                        ts_new = mapping.bottom_up_reconcile(
                            ts, model.b, new_model.b, counter
                        )
                        pool_z = [
                            mapping.rescale_to_box(zu, model.b, new_model.b)
                            for zu in pool_z
                        ]
                        pool_x = [
                            mapping.bottom_up_map(new_model.b, zu) for zu in pool_z
                        ]
                        ts = ts_new
                        lab_x = [p.x for p in ts.points]
                        lab_y = [p.y for p in ts.points]
                        generation += 1
                        model = semisir.EmbeddingModel(
                            b=new_model.b,
                            alpha=new_model.alpha,
                            centering_mean=new_model.centering_mean,
                            box=new_model.box,
                            generation=generation,
                        )
                        surrogate = _fit_gp(ts, config, int(rng.integers(2**63)))
                    except mapping.ReconcileError as err:
                        warning = (warning + "; " if warning else "") + str(err)
                else:
                    ts = mapping.top_down_reconcile(ts, new_model.b)
                    pool_z = [new_model.b @ xu for xu in pool_x]
                    generation += 1
                    model = semisir.EmbeddingModel(
                        b=new_model.b,
                        alpha=new_model.alpha,
                        centering_mean=new_model.centering_mean,
                        box=new_model.box,
                        generation=generation,
                    )
                    surrogate = _fit_gp(ts, config, int(rng.integers(2**63)))
            else:
                warning = (warning + "; " if warning else "") + (
                    "embedding update skipped (too few labeled points)"
                )

        rows.append(
            IterationRecord(
                t=t,
                z=z_eval,
                x=x_eval,
                y=y_t,
                best=counter.best_y,
                b_generation=generation,
                f_evals=counter.count,
                warning=warning,
            )
        )

    return RunRecord(
        method=method,
        config=_config_echo(config, method),
        rows=rows,
        best_x=counter.best_x,
        best_y=counter.best_y,
        f_evals=counter.count,
        b_updates=generation,
    )


def run_random_embedding_bo(objective, config):
    """BO on a fixed random orthonormal-row embedding (never updated)."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    counter = _CountingObjective(objective)
    d = config.dim

    q, _ = np.linalg.qr(rng.standard_normal((d, config.embed_dim)))
    model = semisir.embedding_from_matrix(q.T)

    lab_x = list(latin_hypercube(config.resolved_n_init, d, rng))
    lab_y = [counter(x) for x in lab_x]
    ts = mapping.TrainingSet()
    for x, y in zip(lab_x, lab_y):
        if math.isfinite(y):
            ts.add(x, model.b @ x, y)
    surrogate = _fit_gp(ts, config, int(rng.integers(2**63)))

    rows = []
    for t in range(1, config.iterations + 1):
        z_eval, _ = acquisition.select_candidates(
            config.acquisition,
            surrogate,
            model.box,
            t,
            counter.best_y,
            0,
            int(rng.integers(2**63)),
        )
        x_eval = mapping.bottom_up_map(model.b, z_eval)
        y_t = counter(x_eval)
        if math.isfinite(y_t):
            ts.add(x_eval, z_eval, y_t)
        surrogate = _fit_gp(
            ts, config, int(rng.integers(2**63)), initial=surrogate.params
        )
        rows.append(
            IterationRecord(
                t=t,
                z=z_eval,
                x=x_eval,
                y=y_t,
                best=counter.best_y,
                b_generation=0,
                f_evals=counter.count,
            )
        )

    return RunRecord(
        method="rembo",
        config=_config_echo(config, "rembo"),
        rows=rows,
        best_x=counter.best_x,
        best_y=counter.best_y,
        f_evals=counter.count,
        b_updates=0,
    )


def run_random_search(objective, config):
    """Uniform sampling baseline with the shared trace format."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    counter = _CountingObjective(objective)
    d = config.dim

    for x in rng.uniform(-1.0, 1.0, size=(config.resolved_n_init, d)):
        counter(x)

    rows = []
    for t in range(1, config.iterations + 1):
        x_eval = rng.uniform(-1.0, 1.0, size=d)
        y_t = counter(x_eval)
        rows.append(
            IterationRecord(
                t=t,
                z=None,
                x=x_eval,
                y=y_t,
                best=counter.best_y,
                b_generation=0,
                f_evals=counter.count,
            )
        )

    return RunRecord(
        method="random",
        config=_config_echo(config, "random"),
        rows=rows,
        best_x=counter.best_x,
        best_y=counter.best_y,
        f_evals=counter.count,
        b_updates=0,
    )


METHODS = {
    "silbo-bu": ("bottom_up", run_silbo),
    "silbo-td": ("top_down", run_silbo),
    "rembo": (None, run_random_embedding_bo),
    "random": (None, run_random_search),
}


def run_method(method, objective, config):
    """Dispatch by method name, forcing the strategy field where relevant."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {sorted(METHODS)}")
    strategy, runner = METHODS[method]
    if strategy is not None and config.strategy != strategy:
        config = replace(config, strategy=strategy)
    return runner(objective, config)
