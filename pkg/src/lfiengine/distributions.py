"""Prior distributions: sampling and exact log densities.

Draws consume a fixed counter budget so that stream positions are
predictable: uniform and normal take one block per draw, a d-dimensional
multivariate normal takes d blocks per draw.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError, InvalidParamsError
from .rng import RngStream

UNIFORM = "uniform"
NORMAL = "normal"
MVN = "multivariate_normal"

_FAMILIES = (UNIFORM, NORMAL, MVN)


@dataclass(frozen=True)
class DistSpec:
    family: str
    params: tuple

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise InvalidParamsError(f"unknown family '{self.family}'")
        object.__setattr__(self, "params", tuple(self.params))

    @property
    def dim(self) -> int:
        if self.family == MVN:
            return len(np.atleast_1d(np.asarray(self.params[0], dtype=float)))
        return 1


def uniform(a: float, b: float) -> DistSpec:
    return DistSpec(UNIFORM, (float(a), float(b)))


def normal(mu: float, sigma: float) -> DistSpec:
    return DistSpec(NORMAL, (float(mu), float(sigma)))


def multivariate_normal(mean, cov) -> DistSpec:
    return DistSpec(MVN, (np.asarray(mean, dtype=float), np.asarray(cov, dtype=float)))


def _check(spec: DistSpec):
    """Validate parameters; returns normalized params."""
    if spec.family == UNIFORM:
        a, b = (float(p) for p in spec.params)
        if not a < b:
            raise InvalidParamsError(f"uniform requires a < b, got ({a}, {b})")
        return a, b
    if spec.family == NORMAL:
        mu, sigma = (float(p) for p in spec.params)
        if not sigma > 0:
            raise InvalidParamsError(f"normal requires sigma > 0, got {sigma}")
        return mu, sigma
    mean = np.atleast_1d(np.asarray(spec.params[0], dtype=float))
    cov = np.atleast_2d(np.asarray(spec.params[1], dtype=float))
    d = mean.shape[0]
    if cov.shape != (d, d):
        raise InvalidParamsError(f"covariance shape {cov.shape} does not match dim {d}")
    if not np.allclose(cov, cov.T, rtol=1e-10, atol=1e-12):
        raise InvalidParamsError("covariance must be symmetric")
    chol = _strict_cholesky(cov)
    return mean, cov, chol


def _strict_cholesky(cov: np.ndarray) -> np.ndarray:
    """Cholesky with an explicit positive-definiteness floor on pivots."""
    d = cov.shape[0]
    floor = 1e-12 * max(np.max(np.diag(cov)), 0.0)
    L = np.zeros_like(cov)
    for i in range(d):
        s = cov[i, i] - np.dot(L[i, :i], L[i, :i])
        if s < floor or s <= 0.0:
            raise InvalidParamsError(
                f"covariance not positive definite (pivot {i}: {s:.3e})"
            )
        L[i, i] = math.sqrt(s)
        for j in range(i + 1, d):
            L[j, i] = (cov[j, i] - np.dot(L[j, :i], L[i, :i])) / L[i, i]
    return L


def sample(spec: DistSpec, stream: RngStream, n: int = 1) -> np.ndarray:
    """n draws; shape (n,) for scalar families, (n, d) for MVN."""
    if spec.family == UNIFORM:
        a, b = _check(spec)
        return a + (b - a) * stream.uniform(n)
    if spec.family == NORMAL:
        mu, sigma = _check(spec)
        return mu + sigma * stream.normal(n)
    mean, _, chol = _check(spec)
    d = mean.shape[0]
    z = stream.normal(n * d).reshape(n, d)
    return mean[None, :] + z @ chol.T


def log_density(spec: DistSpec, x) -> float:
    """Exact log pdf at x; -inf outside the support."""
    if spec.family == UNIFORM:
        a, b = _check(spec)
        x = float(np.asarray(x).reshape(()))
        return -math.log(b - a) if a <= x < b else -math.inf
    if spec.family == NORMAL:
        mu, sigma = _check(spec)
        x = float(np.asarray(x).reshape(()))
        z = (x - mu) / sigma
        return -0.5 * z * z - math.log(sigma) - 0.5 * math.log(2.0 * math.pi)
    mean, _, chol = _check(spec)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != mean.shape:
        raise DimensionMismatchError(f"x shape {x.shape} vs mean shape {mean.shape}")
    d = mean.shape[0]
    u = np.linalg.solve(chol, x - mean)
    logdet = float(np.sum(np.log(np.diag(chol))))
    return float(-0.5 * u @ u - logdet - 0.5 * d * math.log(2.0 * math.pi))


def counter_budget(spec: DistSpec) -> int:
    """Counter blocks consumed per draw."""
    return spec.dim
