"""Synthetic benchmark objectives embedded into high-dimensional cubes.

Each objective owns a seeded subset of active coordinates; all other
coordinates are provably inert. Inputs live in [-1, 1]^d, the active block
is affinely mapped to the function's native domain, and values are negated
so every benchmark is a maximization problem. An optional per-call sleep
simulates expensive evaluations and optional Gaussian noise simulates noisy
observations (both off by default).
"""

from __future__ import annotations

import math
import threading
import time
from dataclasses import dataclass

import numpy as np


def branin(u):
    # native domain [-5, 10] x [0, 15], min 0.397887 at (pi, 2.275) etc.
    x1, x2 = u
    b = 5.1 / (4 * math.pi**2)
    c = 5 / math.pi
    t = 1 / (8 * math.pi)
    return (x2 - b * x1**2 + c * x1 - 6.0) ** 2 + 10 * (1 - t) * math.cos(x1) + 10


def colville(u):
    # native domain [-10, 10]^4, min 0 at (1, 1, 1, 1)
    x1, x2, x3, x4 = u
    return (
        100 * (x1**2 - x2) ** 2
        + (x1 - 1) ** 2
        + (x3 - 1) ** 2
        + 90 * (x3**2 - x4) ** 2
        + 10.1 * ((x2 - 1) ** 2 + (x4 - 1) ** 2)
        + 19.8 * (x2 - 1) * (x4 - 1)
    )


_HARTMANN6_A = np.array(
    [
        [10, 3, 17, 3.5, 1.7, 8],
        [0.05, 10, 17, 0.1, 8, 14],
        [3, 3.5, 1.7, 10, 17, 8],
        [17, 8, 0.05, 10, 0.1, 14],
    ]
)
_HARTMANN6_P = 1e-4 * np.array(
    [
        [1312, 1696, 5569, 124, 8283, 5886],
        [2329, 4135, 8307, 3736, 1004, 9991],
        [2348, 1451, 3522, 2883, 3047, 6650],
        [4047, 8828, 8732, 5743, 1091, 381],
    ]
)
_HARTMANN6_ALPHA = np.array([1.0, 1.2, 3.0, 3.2])


def hartmann6(u):
    # native domain [0, 1]^6, min -3.32237
    inner = np.sum(_HARTMANN6_A * (np.asarray(u) - _HARTMANN6_P) ** 2, axis=1)
    return float(-np.sum(_HARTMANN6_ALPHA * np.exp(-inner)))


def camel(u):
    # six-hump camel, native domain [-3, 3] x [-2, 2], min -1.0316
    x1, x2 = u
    return (
        (4 - 2.1 * x1**2 + x1**4 / 3) * x1**2 + x1 * x2 + (-4 + 4 * x2**2) * x2**2
    )


@dataclass(frozen=True)
class _FunctionSpec:
    fn: callable
    r_true: int
    native_lo: tuple
    native_hi: tuple
    argmin: tuple
    f_min: float


FUNCTIONS = {
    "branin": _FunctionSpec(
        branin, 2, (-5.0, 0.0), (10.0, 15.0), (math.pi, 2.275), 0.39788735772973816
    ),
    "colville": _FunctionSpec(
        colville, 4, (-10.0,) * 4, (10.0,) * 4, (1.0, 1.0, 1.0, 1.0), 0.0
    ),
    "hartmann6": _FunctionSpec(
        hartmann6,
        6,
        (0.0,) * 6,
        (1.0,) * 6,
        (0.20169, 0.150011, 0.476874, 0.275332, 0.311652, 0.6573),
        -3.3223680114155156,
    ),
    "camel": _FunctionSpec(
        camel, 2, (-3.0, -2.0), (3.0, 2.0), (0.0898, -0.7126), -1.0316284534898774
    ),
}


class SyntheticObjective:
    """Callable benchmark on [-1, 1]^d with a thread-safe evaluation counter."""

    def __init__(self, name, d, seed=0, rotate=False, noise_sd=0.0, eval_cost_s=0.0):
        if name not in FUNCTIONS:
            raise ValueError(
                f"unknown benchmark {name!r}; choose from {sorted(FUNCTIONS)}"
            )
        spec = FUNCTIONS[name]
        if d < spec.r_true:
            raise ValueError(f"d={d} must be at least r_true={spec.r_true}")
        self.name = name
        self.d = d
        self.r_true = spec.r_true
        self._spec = spec
        rng = np.random.default_rng(seed)
        self.active_coords = np.sort(rng.choice(d, spec.r_true, replace=False))
        if rotate:
            q, _ = np.linalg.qr(rng.standard_normal((spec.r_true, spec.r_true)))
            self.rotation = q
        else:
            self.rotation = None
        self.noise_sd = float(noise_sd)
        self.eval_cost_s = float(eval_cost_s)
        self._noise_rng = np.random.default_rng([seed, 1])
        self._lock = threading.Lock()
        self.eval_count = 0
        self._lo = np.asarray(spec.native_lo)
        self._hi = np.asarray(spec.native_hi)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.d,):
            raise ValueError(f"expected shape ({self.d},), got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("input contains non-finite entries")
        u = x[self.active_coords]
        if self.rotation is not None:
            u = self.rotation @ u
        native = self._lo + (u + 1.0) * (self._hi - self._lo) / 2.0
        value = -float(self._spec.fn(native))
        if self.noise_sd > 0.0:
            value += self.noise_sd * float(self._noise_rng.standard_normal())
        if self.eval_cost_s > 0.0:
            time.sleep(self.eval_cost_s)
        with self._lock:
            self.eval_count += 1
        return value

    @property
    def maximum(self):
        """Best attainable (negated) value, valid without rotation."""
        return -self._spec.f_min

    def optimum_point(self):
        """An x in [-1, 1]^d hitting the native minimizer (rotation off only)."""
        if self.rotation is not None:
            raise ValueError("optimum_point is only available without rotation")
        u = 2.0 * (np.asarray(self._spec.argmin) - self._lo) / (self._hi - self._lo) - 1.0
        x = np.zeros(self.d)
        x[self.active_coords] = u
        return x


def make_benchmark(name, d, seed=0, **kwargs):
    return SyntheticObjective(name, d, seed=seed, **kwargs)
