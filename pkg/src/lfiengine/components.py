"""Ready-made node operations: simulators, summaries, distances and small
arithmetic helpers, plus the registry the executor dispatches through.

Elementwise operations receive one element's parent values; vectorized
variants receive whole-batch arrays and must consume the node's RNG stream
in exactly the same counter order as the elementwise loop would.
"""

from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import distributions as dist
from .errors import (
    DimensionMismatchError,
    EmptyInputError,
    InvalidParamsError,
    LagTooLargeError,
    UnknownOpError,
)
from .rng import RngStream


# -- simulators -------------------------------------------------------------

def simulate_ma2(t1: float, t2: float, n_obs: int, stream: RngStream) -> np.ndarray:
    """Second-order moving-average series.

    y_t = w_t + t1*w_{t-1} + t2*w_{t-2} with standard normal innovations,
    including two warm-up draws, so n_obs + 2 counter blocks are consumed.
    """
    n_obs = int(n_obs)
    if n_obs < 3:
        raise InvalidParamsError(f"ma2 requires n_obs >= 3, got {n_obs}")
    w = stream.normal(n_obs + 2)
    return w[2:] + float(t1) * w[1:-1] + float(t2) * w[:-2]


def _simulate_ma2_batch(t1, t2, n_obs, stream: RngStream, size: int) -> np.ndarray:
    n_obs = int(n_obs)
    if n_obs < 3:
        raise InvalidParamsError(f"ma2 requires n_obs >= 3, got {n_obs}")
    w = stream.normal(size * (n_obs + 2)).reshape(size, n_obs + 2)
    t1 = np.broadcast_to(np.asarray(t1, dtype=float).reshape(-1), (size,))
    t2 = np.broadcast_to(np.asarray(t2, dtype=float).reshape(-1), (size,))
    return w[:, 2:] + t1[:, None] * w[:, 1:-1] + t2[:, None] * w[:, :-2]


def simulate_gaussian(mu: float, sigma: float, n_obs: int, stream: RngStream) -> np.ndarray:
    """n_obs i.i.d. normal(mu, sigma) draws; n_obs counter blocks."""
    sigma = float(sigma)
    if not sigma > 0:
        raise InvalidParamsError(f"gaussian requires sigma > 0, got {sigma}")
    n_obs = int(n_obs)
    if n_obs < 1:
        raise InvalidParamsError(f"gaussian requires n_obs >= 1, got {n_obs}")
    return float(mu) + sigma * stream.normal(n_obs)


def _simulate_gaussian_batch(mu, sigma, n_obs, stream: RngStream, size: int) -> np.ndarray:
    sigma_arr = np.broadcast_to(np.asarray(sigma, dtype=float).reshape(-1), (size,))
    if not np.all(sigma_arr > 0):
        raise InvalidParamsError("gaussian requires sigma > 0")
    n_obs = int(n_obs)
    if n_obs < 1:
        raise InvalidParamsError(f"gaussian requires n_obs >= 1, got {n_obs}")
    mu_arr = np.broadcast_to(np.asarray(mu, dtype=float).reshape(-1), (size,))
    z = stream.normal(size * n_obs).reshape(size, n_obs)
    return mu_arr[:, None] + sigma_arr[:, None] * z


# -- summaries --------------------------------------------------------------

def summary_mean(y) -> float:
    y = np.asarray(y, dtype=float).ravel()
    if y.size < 1:
        raise EmptyInputError("mean of empty series")
    return float(np.mean(y))


def summary_variance(y) -> float:
    y = np.asarray(y, dtype=float).ravel()
    if y.size < 2:
        raise EmptyInputError("variance needs at least 2 points")
    return float(np.var(y, ddof=1))


def summary_autocov(y, lag) -> float:
    """Non-centered autocovariance sum(y_t * y_{t-k}) / n."""
    y = np.asarray(y, dtype=float).ravel()
    k = int(lag)
    if k < 0:
        raise InvalidParamsError(f"lag must be nonnegative, got {k}")
    if k >= y.size:
        raise LagTooLargeError(f"lag {k} >= series length {y.size}")
    n = y.size
    if k == 0:
        return float(np.dot(y, y) / n)
    return float(np.dot(y[k:], y[:-k]) / n)


# -- distances --------------------------------------------------------------

@dataclass(frozen=True)
class DistanceSpec:
    metric: str                      # "minkowski" or "weighted_euclidean"
    p: float = 2.0
    weights: Optional[tuple] = None


def distance(sim_summaries, obs_summaries, spec: DistanceSpec) -> float:
    if spec.metric == "minkowski":
        return minkowski_distance(sim_summaries, obs_summaries, spec.p)
    if spec.metric == "weighted_euclidean":
        return weighted_euclidean_distance(sim_summaries, obs_summaries, spec.weights)
    raise UnknownOpError(f"unknown distance metric '{spec.metric}'")


def minkowski_distance(x, y, p: float = 2.0) -> float:
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise DimensionMismatchError(f"length {x.size} vs {y.size}")
    p = float(p)
    if p < 1:
        raise InvalidParamsError(f"minkowski requires p >= 1, got {p}")
    return float(np.sum(np.abs(x - y) ** p) ** (1.0 / p))


def weighted_euclidean_distance(x, y, weights) -> float:
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    w = np.asarray(weights, dtype=float).ravel()
    if x.shape != y.shape:
        raise DimensionMismatchError(f"length {x.size} vs {y.size}")
    if w.shape != x.shape:
        raise DimensionMismatchError(f"weights length {w.size} vs data length {x.size}")
    if np.any(w < 0):
        raise InvalidParamsError("weights must be nonnegative")
    d = x - y
    return float(math.sqrt(np.sum(w * d * d)))


# -- registry ---------------------------------------------------------------

@dataclass
class Operation:
    """A named node operation.

    fn is the elementwise form; batch_fn, when present, evaluates a whole
    batch at once (used by nodes flagged vectorized).  Stochastic ops take
    a keyword-only ``stream`` (batch forms also take ``size``).
    """

    name: str
    kinds: frozenset
    fn: Callable
    stochastic: bool = False
    batch_fn: Optional[Callable] = None
    calls: int = field(default=0, repr=False)


_REGISTRY: dict[str, Operation] = {}


def register_operation(name, fn, kinds, stochastic=False, batch_fn=None, replace=False):
    if name in _REGISTRY and not replace:
        raise UnknownOpError(f"operation '{name}' already registered")
    op = Operation(name, frozenset(kinds), fn, stochastic, batch_fn)
    _REGISTRY[name] = op
    return op


def get_operation(name: str) -> Operation:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise UnknownOpError(f"unknown operation '{name}'") from None


def builtin_operations() -> tuple:
    return tuple(sorted(_REGISTRY))


@contextlib.contextmanager
def instrument(name: str):
    """Count invocations of an operation (elementwise + batch) in a block."""
    op = get_operation(name)
    counter = {"calls": 0}
    orig_fn, orig_batch = op.fn, op.batch_fn

    def counted(*a, **k):
        counter["calls"] += 1
        return orig_fn(*a, **k)

    op.fn = counted
    if orig_batch is not None:
        def counted_batch(*a, **k):
            counter["calls"] += 1
            return orig_batch(*a, **k)
        op.batch_fn = counted_batch
    try:
        yield counter
    finally:
        op.fn, op.batch_fn = orig_fn, orig_batch


# Prior draws route through the distributions module so the counter budget
# stays in one place.

def _prior_fn(family):
    def draw(*params, stream):
        spec = _dist_spec(family, params)
        return dist.sample(spec, stream, 1)[0]
    return draw


def _prior_batch_fn(family):
    def draw(*params, stream, size):
        if any(np.asarray(p).ndim > 0 and np.asarray(p).size == size for p in params):
            # per-element parameters from parent nodes: elementwise loop
            out = []
            for i in range(size):
                elem = [np.asarray(p).reshape(-1)[i] if np.asarray(p).size == size
                        else p for p in params]
                out.append(dist.sample(_dist_spec(family, elem), stream, 1)[0])
            return np.asarray(out)
        return dist.sample(_dist_spec(family, params), stream, size)
    return draw


def _dist_spec(family, params):
    if family == dist.MVN:
        if len(params) != 2:
            raise InvalidParamsError("multivariate_normal takes (mean, cov)")
        return dist.multivariate_normal(params[0], params[1])
    return dist.DistSpec(family, tuple(float(p) for p in params))


def _register_builtins():
    for family in (dist.UNIFORM, dist.NORMAL, dist.MVN):
        register_operation(family, _prior_fn(family), {"prior"},
                           stochastic=True, batch_fn=_prior_batch_fn(family))

    register_operation("ma2", simulate_ma2, {"simulator"},
                       stochastic=True, batch_fn=_simulate_ma2_batch)
    register_operation("gaussian", simulate_gaussian, {"simulator"},
                       stochastic=True, batch_fn=_simulate_gaussian_batch)

    register_operation("mean", summary_mean, {"summary"})
    register_operation("variance", summary_variance, {"summary"})
    register_operation("autocov", summary_autocov, {"summary"})

    register_operation("minkowski", minkowski_distance, {"distance"})
    register_operation("weighted_euclidean", weighted_euclidean_distance, {"distance"})

    register_operation("add", lambda a, b: np.asarray(a, dtype=float) + np.asarray(b, dtype=float),
                       {"operation"})
    register_operation("sub", lambda a, b: np.asarray(a, dtype=float) - np.asarray(b, dtype=float),
                       {"operation"})
    register_operation("mul", lambda a, b: np.asarray(a, dtype=float) * np.asarray(b, dtype=float),
                       {"operation"})
    register_operation("neg", lambda a: -np.asarray(a, dtype=float), {"operation"})
    register_operation("identity", lambda a: np.asarray(a, dtype=float), {"operation"})
    register_operation("add_const", lambda a, c: np.asarray(a, dtype=float) + float(c),
                       {"operation"})
    register_operation("scale", lambda a, c: np.asarray(a, dtype=float) * float(c),
                       {"operation"})
    register_operation("abs", lambda a: np.abs(np.asarray(a, dtype=float)), {"operation"})


_register_builtins()
