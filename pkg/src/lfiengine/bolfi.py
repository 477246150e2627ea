"""Bayesian optimization over the distance surface, then posterior
extraction from the fitted surrogate.

The loop: Latin-hypercube initialization inside the parameter box, then
one simulation per acquired point chosen by a lower-confidence-bound rule,
with periodic hyperparameter refits.  The posterior is the prior times the
probability that the surrogate lies below the adaptive threshold
epsilon = min surrogate mean at the training inputs.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.special import log_ndtr

from . import distributions as dist
from .errors import ChainStuckError, InsufficientInitError, OutOfBoundsError
from .executor import run_batch
from .gp import (
    GpHyper,
    GpModel,
    gp_fit,
    gp_predict,
    gp_predict_gradient,
    gp_predict_many,
    maximize_box,
    optimize_hyper,
)
from .results import InferenceResult
from .rng import rng_stream
from .smc import _prior_logpdf, _prior_specs, _proposals_as_precomputed

REFIT_EVERY = 5
MCMC_WARMUP = 1000
MCMC_THIN = 5
TARGET_ACCEPT = 0.234


@dataclass(frozen=True)
class AcquisitionState:
    t: int                      # acquisition round, 1-based
    bounds: tuple               # ((lo, hi), ...) per dimension
    delta: float = 0.1

    def __post_init__(self):
        if self.t < 1:
            raise ValueError("t must be >= 1")
        for lo, hi in self.bounds:
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise ValueError(f"bad bounds ({lo}, {hi})")

    @property
    def d(self) -> int:
        return len(self.bounds)


def beta_schedule(t: int, d: int, delta: float) -> float:
    return 2.0 * math.log(t ** (d / 2.0 + 2.0) * math.pi ** 2 / (3.0 * delta))


def lcb_acquisition(model: GpModel, x, state: AcquisitionState) -> float:
    """mu(x) - sqrt(beta_t * var(x)); smaller is more promising."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    for v, (lo, hi) in zip(x, state.bounds):
        if not lo <= v <= hi:
            raise OutOfBoundsError(f"{x} outside bounds {state.bounds}")
    mu, var = gp_predict(model, x)
    beta = beta_schedule(state.t, state.d, state.delta)
    return float(mu - math.sqrt(beta) * math.sqrt(var))


def acquire_next(model: GpModel, state: AcquisitionState, stream,
                 restarts: int = 10) -> np.ndarray:
    """Minimize the LCB from stream-drawn starts plus the incumbent best
    training point; ties resolve to the coordinate-lexicographically
    smallest point.  Always returns a point inside the bounds."""
    lo = np.array([b[0] for b in state.bounds])
    hi = np.array([b[1] for b in state.bounds])
    if model.n == 0:
        return lo + stream.uniform(state.d) * (hi - lo)
    beta_rt = math.sqrt(beta_schedule(state.t, state.d, state.delta))

    def neg_lcb(x):
        mu, var, dmu, dvar = gp_predict_gradient(model, x)
        sd = math.sqrt(var) if var > 0 else 0.0
        val = mu - beta_rt * sd
        grad = dmu - (beta_rt / (2.0 * sd)) * dvar if sd > 0 else dmu
        return -val, -grad

    starts = [lo + stream.uniform(state.d) * (hi - lo) for _ in range(restarts)]
    incumbent = model.X[int(np.argmin(model.y))]
    starts.append(np.clip(incumbent, lo, hi))

    best_x, best_f = None, None
    for x0 in starts:
        x, f = maximize_box(neg_lcb, x0, lo, hi)
        if (best_f is None or f > best_f
                or (f == best_f and tuple(x) < tuple(best_x))):
            best_x, best_f = x, f
    return np.clip(best_x, lo, hi)


@dataclass
class BolfiPosterior:
    model: GpModel
    epsilon: float
    prior_specs: list
    parameter_names: tuple
    bounds: tuple
    log_transform: bool = True
    n_sim: int = 0
    training_distances: np.ndarray = None


def _latin_hypercube(stream, n: int, lo, hi) -> np.ndarray:
    """Stratified per-dimension draws: one point per stratum, strata order
    permuted by the stream."""
    d = lo.shape[0]
    pts = np.empty((n, d))
    for j in range(d):
        perm = np.argsort(stream.uniform(n), kind="stable")
        offs = stream.uniform(n)
        pts[:, j] = lo[j] + (perm + offs) / n * (hi[j] - lo[j])
    return pts


def fit_bolfi(cg, bounds, n_init: int, n_total: int, seed: int = 0,
              delta: float = 0.1, log_transform: bool = True,
              acq_restarts: int = 10, hyper_restarts: int = 3,
              store=None) -> BolfiPosterior:
    """Run the acquisition loop; exactly n_total simulator calls."""
    specs = _prior_specs(cg)
    d = sum(s.dim for s in specs)
    bounds = tuple((float(lo), float(hi)) for lo, hi in bounds)
    if len(bounds) != d:
        raise ValueError(f"{len(bounds)} bounds for {d} parameter dimensions")
    if n_init < d + 2:
        raise InsufficientInitError(f"n_init must be >= d+2 = {d + 2}, got {n_init}")
    if n_total < n_init:
        raise ValueError("n_total must be >= n_init")
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    dist_name = cg.distance_name

    def simulate(theta, index):
        pre = _proposals_as_precomputed(cg, theta[None, :])
        batch = run_batch(cg, index, seed, 1, precomputed=pre)
        if store is not None:
            store.record(cg, seed, 1, batch)
        return float(batch.values[dist_name].ravel()[0])

    init_stream = rng_stream(seed, 0, "__bolfi_init")
    X = _latin_hypercube(init_stream, n_init, lo, hi)
    raw = np.array([simulate(X[i], i) for i in range(n_init)])

    def targets(r):
        return np.log1p(r) if log_transform else r

    hyper = None
    model = None

    def refit(X, y, refit_counter, reoptimize):
        nonlocal hyper
        if reoptimize or hyper is None:
            hstream = rng_stream(seed, refit_counter, "__bolfi_hyper")
            hyper = optimize_hyper(X, y, restarts=hyper_restarts, stream=hstream)
        else:
            hyper = GpHyper(hyper.signal_var, hyper.lengthscales,
                            hyper.noise_var, float(np.mean(y)))
        return gp_fit(X, y, hyper)

    model = refit(X, targets(raw), 0, True)
    for t in range(1, n_total - n_init + 1):
        state = AcquisitionState(t, bounds, delta)
        astream = rng_stream(seed, t, "__bolfi_acquire")
        x_next = acquire_next(model, state, astream, restarts=acq_restarts)
        r = simulate(x_next, n_init + t - 1)
        X = np.vstack([X, x_next])
        raw = np.append(raw, r)
        model = refit(X, targets(raw), t, t % REFIT_EVERY == 0)

    mu_train, _ = gp_predict_many(model, X)
    epsilon = float(np.min(mu_train))
    return BolfiPosterior(model, epsilon, specs, cg.parameter_names, bounds,
                          log_transform, n_sim=n_total, training_distances=raw)


def posterior_logpdf(post: BolfiPosterior, theta) -> float:
    """log prior + log Phi((epsilon - mu) / sqrt(var + noise_var)).

    Support is the intersection of the prior support and the parameter
    box: the surrogate carries no information outside the box it was
    trained in, so the posterior is truncated there.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    for v, (lo, hi) in zip(theta, post.bounds):
        if not lo <= v <= hi:
            return -math.inf
    lp = _prior_logpdf(post.prior_specs)(theta)
    if lp == -math.inf:
        return -math.inf
    mu, var = gp_predict(post.model, theta)
    scale = math.sqrt(var + post.model.hyper.noise_var)
    return lp + float(log_ndtr((post.epsilon - mu) / scale))


def surrogate_argmin(post: BolfiPosterior) -> np.ndarray:
    """Training point with the lowest surrogate mean."""
    mu, _ = gp_predict_many(post.model, post.model.X)
    return post.model.X[int(np.argmin(mu))]


def sample_posterior(post: BolfiPosterior, n_samples: int, seed: int = 0) -> InferenceResult:
    """Adaptive random-walk Metropolis on the surrogate posterior.

    The proposal scale adapts during a discarded warm-up (Robbins-Monro on
    the log scale toward 23.4% acceptance); the kept chain is thinned by 5.
    """
    t0 = time.monotonic()
    d = len(post.bounds)
    widths = np.array([hi - lo for lo, hi in post.bounds])
    stream = rng_stream(seed, 0, "__bolfi_mcmc")
    x = np.asarray(surrogate_argmin(post), dtype=float)
    lp = posterior_logpdf(post, x)
    log_scale = math.log(0.1)

    accepted_warm = 0
    for t in range(1, MCMC_WARMUP + 1):
        z = stream.normal(d)
        u = stream.uniform(1)[0]
        prop = x + math.exp(log_scale) * widths * z
        lp_prop = posterior_logpdf(post, prop)
        accept = math.log(u) < lp_prop - lp if u > 0 else True
        if accept:
            x, lp = prop, lp_prop
            accepted_warm += 1
        log_scale += (1.0 / t ** 0.6) * ((1.0 if accept else 0.0) - TARGET_ACCEPT)

    if accepted_warm / MCMC_WARMUP < 0.01:
        raise ChainStuckError(
            f"warm-up acceptance {accepted_warm / MCMC_WARMUP:.4f} < 0.01")

    samples = np.empty((n_samples, d))
    accepted = 0
    kept = 0
    for step in range(n_samples * MCMC_THIN):
        z = stream.normal(d)
        u = stream.uniform(1)[0]
        prop = x + math.exp(log_scale) * widths * z
        lp_prop = posterior_logpdf(post, prop)
        if (math.log(u) < lp_prop - lp) if u > 0 else True:
            x, lp = prop, lp_prop
            accepted += 1
        if (step + 1) % MCMC_THIN == 0:
            samples[kept] = x
            kept += 1

    mu, _ = gp_predict_many(post.model, samples)
    return InferenceResult(
        method="bolfi",
        parameter_names=post.parameter_names,
        samples=samples,
        weights=np.full(n_samples, 1.0 / n_samples),
        distances=mu,
        threshold=post.epsilon,
        n_sim=post.n_sim,
        root_seed=seed,
        batch_size=1,
        elapsed_seconds=time.monotonic() - t0,
        extras={"acceptance_rate": accepted / (n_samples * MCMC_THIN),
                "proposal_scale": math.exp(log_scale)},
    )
