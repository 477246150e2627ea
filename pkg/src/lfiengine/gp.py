"""Gaussian-process regression on (parameter, distance) pairs.

Anisotropic squared-exponential kernel plus a constant mean.  All linear
algebra goes through one Cholesky factor of K + noise*I; the marginal
likelihood gradient uses the usual trace identities and is checked against
finite differences in the tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.optimize import minimize

from .errors import (
    AllRestartsFailedError,
    DimensionMismatchError,
    NotPositiveDefiniteError,
)

JITTER_SCALE = 1e-8   # one retry with noise_var + JITTER_SCALE * mean(diag K)


@dataclass(frozen=True)
class GpHyper:
    signal_var: float
    lengthscales: tuple
    noise_var: float
    mean_const: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "lengthscales",
                           tuple(float(l) for l in np.atleast_1d(self.lengthscales)))
        if not (self.signal_var > 0 and self.noise_var >= 0
                and all(l > 0 for l in self.lengthscales)):
            raise ValueError("signal_var and lengthscales must be positive, "
                             "noise_var nonnegative")

    def log_vector(self) -> np.ndarray:
        """[log signal_var, log l_1..d, log noise_var]."""
        return np.log(np.r_[self.signal_var, self.lengthscales, self.noise_var])

    @classmethod
    def from_log_vector(cls, v, mean_const=0.0) -> "GpHyper":
        v = np.asarray(v, dtype=float)
        return cls(math.exp(v[0]), tuple(np.exp(v[1:-1])), math.exp(v[-1]), mean_const)


@dataclass(frozen=True)
class GpModel:
    X: np.ndarray
    y: np.ndarray
    hyper: GpHyper
    chol: np.ndarray    # lower factor of K + noise_var * I
    alpha: np.ndarray   # (K + noise_var I)^{-1} (y - mean_const)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]


def kernel(x, x2, hyper: GpHyper) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    ell = np.asarray(hyper.lengthscales)
    if x.shape != x2.shape or x.shape[0] != ell.shape[0]:
        raise DimensionMismatchError(
            f"dims {x.shape[0]}, {x2.shape[0]} vs lengthscales {ell.shape[0]}")
    z = (x - x2) / ell
    return float(hyper.signal_var * math.exp(-0.5 * float(z @ z)))


def _kernel_matrix(A, B, hyper: GpHyper) -> np.ndarray:
    ell = np.asarray(hyper.lengthscales)
    d2 = np.sum(((A[:, None, :] - B[None, :, :]) / ell) ** 2, axis=2)
    return hyper.signal_var * np.exp(-0.5 * d2)


def _cholesky_with_pivot(K: np.ndarray):
    """Lower Cholesky; on failure reports the first nonpositive pivot."""
    try:
        return np.linalg.cholesky(K), None
    except np.linalg.LinAlgError:
        pass
    n = K.shape[0]
    L = np.zeros_like(K)
    for i in range(n):
        s = K[i, i] - np.dot(L[i, :i], L[i, :i])
        if s <= 0.0:
            return None, i
        L[i, i] = math.sqrt(s)
        if i + 1 < n:
            L[i + 1:, i] = (K[i + 1:, i] - L[i + 1:, :i] @ L[i, :i]) / L[i, i]
    return L, None


def gp_fit(X, y, hyper: GpHyper) -> GpModel:
    """Factorize K + noise_var*I and solve the weights.  One jittered retry
    on a failed factorization, then NotPositiveDefiniteError."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] != y.shape[0]:
        raise DimensionMismatchError(f"{X.shape[0]} inputs vs {y.shape[0]} targets")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("inputs must be finite")
    if X.shape[0] == 0:
        return GpModel(X, y, hyper, np.zeros((0, 0)), np.zeros(0))
    K = _kernel_matrix(X, X, hyper)
    Kn = K + hyper.noise_var * np.eye(X.shape[0])
    L, pivot = _cholesky_with_pivot(Kn)
    if L is None:
        jitter = JITTER_SCALE * float(np.mean(np.diag(Kn)))
        L, pivot = _cholesky_with_pivot(Kn + jitter * np.eye(X.shape[0]))
        if L is None:
            raise NotPositiveDefiniteError(pivot)
    r = y - hyper.mean_const
    alpha = cho_solve((L, True), r)
    return GpModel(X, y, hyper, L, alpha)


def gp_predict(model: GpModel, xs):
    """Posterior mean and variance at one point (prior predictive when the
    model holds no data)."""
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    if model.n == 0:
        return model.hyper.mean_const, model.hyper.signal_var
    if xs.shape[0] != model.dim:
        raise DimensionMismatchError(f"point dim {xs.shape[0]} vs model dim {model.dim}")
    mu, var = gp_predict_many(model, xs[None, :])
    return float(mu[0]), float(var[0])


def gp_predict_many(model: GpModel, Xs):
    Xs = np.atleast_2d(np.asarray(Xs, dtype=float))
    if model.n == 0:
        m = np.full(Xs.shape[0], model.hyper.mean_const)
        return m, np.full(Xs.shape[0], model.hyper.signal_var)
    if Xs.shape[1] != model.dim:
        raise DimensionMismatchError(f"point dim {Xs.shape[1]} vs model dim {model.dim}")
    Ks = _kernel_matrix(model.X, Xs, model.hyper)          # n x m
    mu = model.hyper.mean_const + Ks.T @ model.alpha
    V = solve_triangular(model.chol, Ks, lower=True)       # n x m
    var = model.hyper.signal_var - np.sum(V * V, axis=0)
    return mu, np.maximum(var, 0.0)


def gp_predict_gradient(model: GpModel, xs):
    """(mu, var, dmu/dx, dvar/dx) at one point; used by the acquisition
    optimizer."""
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    if model.n == 0:
        z = np.zeros_like(xs)
        return model.hyper.mean_const, model.hyper.signal_var, z, z
    ell2 = np.asarray(model.hyper.lengthscales) ** 2
    ks = _kernel_matrix(model.X, xs[None, :], model.hyper)[:, 0]       # n
    dks = ks[:, None] * (model.X - xs[None, :]) / ell2[None, :]        # n x d
    mu = model.hyper.mean_const + float(ks @ model.alpha)
    dmu = dks.T @ model.alpha
    w = cho_solve((model.chol, True), ks)
    var = model.hyper.signal_var - float(ks @ w)
    dvar = -2.0 * (dks.T @ w)
    if var < 0.0:
        var, dvar = 0.0, np.zeros_like(dvar)
    return mu, var, dmu, dvar


def log_marginal(model: GpModel):
    """Log marginal likelihood and its gradient w.r.t.
    [log signal_var, log lengthscales..., log noise_var]."""
    n = model.n
    r = model.y - model.hyper.mean_const
    value = (-0.5 * float(r @ model.alpha)
             - float(np.sum(np.log(np.diag(model.chol))))
             - 0.5 * n * math.log(2.0 * math.pi))

    Kinv = cho_solve((model.chol, True), np.eye(n))
    A = np.outer(model.alpha, model.alpha) - Kinv
    Kse = _kernel_matrix(model.X, model.X, model.hyper)
    ell = np.asarray(model.hyper.lengthscales)

    grad = np.empty(2 + ell.shape[0])
    grad[0] = 0.5 * float(np.sum(A * Kse))                       # d/dlog signal_var
    for d in range(ell.shape[0]):
        dd = (model.X[:, None, d] - model.X[None, :, d]) ** 2 / ell[d] ** 2
        grad[1 + d] = 0.5 * float(np.sum(A * (Kse * dd)))        # d/dlog l_d
    grad[-1] = 0.5 * model.hyper.noise_var * float(np.trace(A))  # d/dlog noise_var
    return value, grad


def maximize_box(fg, x0, lo, hi, max_iter=200, tol=1e-8):
    """Projected gradient ascent with backtracking line search.

    fg(x) -> (value, gradient).  Deterministic; used for both
    hyperparameter fitting and acquisition optimization (negated).
    """
    x = np.clip(np.asarray(x0, dtype=float), lo, hi)
    f, g = fg(x)
    step = 1.0
    for _ in range(max_iter):
        gnorm = float(np.max(np.abs(g)))
        if gnorm < tol:
            break
        improved = False
        s = step
        for _ in range(40):
            cand = np.clip(x + s * g, lo, hi)
            delta = cand - x
            if float(np.max(np.abs(delta))) < 1e-15:
                break
            fc, gc = fg(cand)
            if fc > f + 1e-4 * float(g @ delta):
                x, f, g = cand, fc, gc
                step = min(s * 2.0, 1e6)
                improved = True
                break
            s *= 0.5
        if not improved:
            break
    return x, f


def default_log_bounds(X, y) -> tuple:
    """Scale-aware hyperparameter box in log space:
    lengthscales in [1e-3, 1e3] x input range, signal_var in
    [1e-6, 1e6] x var(y), noise_var in [1e-8, 1] x var(y)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    span = np.ptp(X, axis=0)
    span = np.where(span > 0, span, 1.0)
    vy = float(np.var(y))
    if vy <= 0:
        vy = 1.0
    lo = np.r_[math.log(1e-6 * vy), np.log(1e-3 * span), math.log(1e-8 * vy)]
    hi = np.r_[math.log(1e6 * vy), np.log(1e3 * span), math.log(1.0 * vy)]
    return lo, hi


def optimize_hyper(X, y, bounds=None, restarts=5, stream=None) -> GpHyper:
    """Maximize the log marginal over stream-drawn restarts inside the
    bounds; the constant mean stays at mean(y)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if bounds is None:
        lo, hi = default_log_bounds(X, y)
    else:
        lo, hi = (np.asarray(b, dtype=float) for b in bounds)
    if np.any(lo >= hi):
        raise ValueError("bounds require lower < upper in every coordinate")
    m = float(np.mean(y))

    def negative(v):
        hyper = GpHyper.from_log_vector(v, mean_const=m)
        model = gp_fit(X, y, hyper)
        f, g = log_marginal(model)
        return -f, -g

    # a data-driven start (lengthscales at a quarter of the input range,
    # noise at 1% of the target variance) plus stream-drawn restarts
    span = np.where(np.ptp(X, axis=0) > 0, np.ptp(X, axis=0), 1.0)
    vy = float(np.var(y)) or 1.0
    starts = [np.clip(np.log(np.r_[vy, span / 4.0, 0.01 * vy]), lo, hi)]
    for _ in range(max(0, restarts - 1)):
        u = stream.uniform(lo.shape[0]) if stream is not None \
            else np.full(lo.shape[0], 0.5)
        starts.append(lo + u * (hi - lo))

    best = None
    failures = []
    for v0 in starts:
        try:
            res = minimize(negative, v0, jac=True, method="L-BFGS-B",
                           bounds=list(zip(lo, hi)))
        except NotPositiveDefiniteError as e:
            failures.append(e)
            continue
        if best is None or -res.fun > best[1]:
            best = (res.x, -res.fun)
    if best is None:
        raise AllRestartsFailedError(f"all {restarts} restarts failed: {failures[-1]}")
    return GpHyper.from_log_vector(best[0], mean_const=m)
