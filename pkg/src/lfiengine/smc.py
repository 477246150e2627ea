"""Sequential Monte Carlo ABC in the population Monte Carlo flavor:
shrinking quantile thresholds, Gaussian perturbation with twice the
weighted empirical covariance, and importance reweighting against the
kernel mixture."""

from __future__ import annotations

import math
import time

import numpy as np

from . import distributions as dist
from .errors import (
    DegenerateWeightsError,
    ScheduleNotShrinkingError,
    SingularKernelError,
)
from .executor import run_batch
from .rejection import sample_rejection, threshold_from_quantile
from .results import InferenceResult, stack_parameters
from .rng import rng_stream


class Population:
    def __init__(self, round_index, particles, weights, distances, threshold, kernel_cov):
        self.round_index = round_index
        self.particles = np.asarray(particles, dtype=float)
        self.weights = np.asarray(weights, dtype=float)
        self.distances = np.asarray(distances, dtype=float)
        self.threshold = float(threshold)
        self.kernel_cov = None if kernel_cov is None else np.asarray(kernel_cov, dtype=float)

    def ess(self) -> float:
        return float(1.0 / np.sum(self.weights ** 2))


def weighted_cov(particles, weights) -> np.ndarray:
    """Twice the weighted empirical covariance (the perturbation kernel)."""
    x = np.asarray(particles, dtype=float)
    w = np.asarray(weights, dtype=float)
    if x.shape[0] < 2:
        raise DegenerateWeightsError("need at least 2 particles")
    if np.max(w) >= 1.0 - 1e-12:
        raise DegenerateWeightsError("one particle carries all the weight")
    mean = w @ x
    c = x - mean
    cov = (c * w[:, None]).T @ c
    return 2.0 * cov


def smc_weight(theta, prev: Population, prior_logpdf, kernel_cov) -> float:
    """Unnormalized PMC importance weight: prior density over the kernel
    mixture at the previous population."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    lp = prior_logpdf(theta)
    if lp == -math.inf:
        return 0.0
    cov = np.atleast_2d(np.asarray(kernel_cov, dtype=float))
    d = cov.shape[0]
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as e:
        raise SingularKernelError(f"kernel covariance not PD: {e}") from e
    diff = prev.particles.reshape(-1, d) - theta[None, :]
    u = np.linalg.solve(chol, diff.T)
    logdet = float(np.sum(np.log(np.diag(chol))))
    logk = -0.5 * np.sum(u * u, axis=0) - logdet - 0.5 * d * math.log(2.0 * math.pi)
    denom = float(np.sum(prev.weights * np.exp(logk)))
    if denom <= 0.0:
        return 0.0
    return math.exp(lp) / denom


def _prior_specs(cg):
    """DistSpec per prior node (static-parameter priors only)."""
    specs = []
    for name in cg.parameter_names:
        node = cg.node(name)
        if node.parents:
            raise ValueError("SMC requires priors with static parameters")
        specs.append(dist.DistSpec(node.op, node.args))
    return specs


def _prior_logpdf(specs):
    def lp(theta):
        total = 0.0
        i = 0
        for s in specs:
            d = s.dim
            x = theta[i] if d == 1 else theta[i:i + d]
            v = dist.log_density(s, x)
            if v == -math.inf:
                return -math.inf
            total += v
            i += d
        return total
    return lp


def sample_smc(cg, n_samples: int, quantile_schedule, seed: int = 0,
               batch_size: int = 100, workers: int = 1, budget: int = None,
               store=None) -> InferenceResult:
    """PMC-ABC.  Round 1 is plain rejection at the first quantile (bit-exact
    with sample_rejection under the same seed); later rounds resample,
    perturb, and reweight.  Returns the final population as an
    InferenceResult, with all rounds in ``extras["populations"]``.
    """
    schedule = [float(q) for q in quantile_schedule]
    if not schedule:
        raise ValueError("schedule must have at least one round")
    t0 = time.monotonic()
    specs = _prior_specs(cg)
    prior_lp = _prior_logpdf(specs)
    dist_name = cg.distance_name

    first = sample_rejection(cg, n_samples, quantile=schedule[0], seed=seed,
                             batch_size=batch_size, workers=workers, store=store)
    n = first.n_accept
    pop = Population(1, first.samples, np.full(n, 1.0 / n),
                     first.distances, first.threshold, None)
    populations = [pop]
    n_sim = first.n_sim
    next_index = n_sim // batch_size    # global batch counter keeps streams distinct

    for r, q in enumerate(schedule[1:], start=2):
        eps = threshold_from_quantile(pop.distances, q)
        if eps >= pop.threshold:
            raise ScheduleNotShrinkingError(
                f"round {r} threshold {eps} does not shrink below {pop.threshold}")
        kernel_cov = weighted_cov(pop.particles, pop.weights)
        chol = _kernel_chol(kernel_cov)
        d = pop.particles.shape[1]

        accepted_p, accepted_d = [], []
        while len(accepted_p) < n_samples:
            if budget is not None and n_sim + batch_size > budget:
                break
            proposals = _propose_batch(pop, chol, d, seed, next_index, r, batch_size,
                                       prior_lp)
            pre = _proposals_as_precomputed(cg, proposals)
            if store is not None:
                reuse = store.plan_reuse(cg, seed, batch_size, next_index)
                pre.update({k: v for k, v in reuse.items() if k not in pre})
            batch = run_batch(cg, next_index, seed, batch_size, precomputed=pre)
            if store is not None:
                store.record(cg, seed, batch_size, batch)
            n_sim += batch_size
            next_index += 1
            dvals = batch.values[dist_name].ravel()
            params = stack_parameters([batch], cg.parameter_names)
            for i in range(batch_size):
                if dvals[i] <= eps and len(accepted_p) < n_samples:
                    accepted_p.append(params[i])
                    accepted_d.append(dvals[i])
        if len(accepted_p) < n_samples:
            partial = True
        else:
            partial = False
        particles = np.asarray(accepted_p)
        distances = np.asarray(accepted_d)
        w = np.array([smc_weight(p, pop, prior_lp, kernel_cov) for p in particles])
        total = w.sum()
        if total <= 0:
            raise DegenerateWeightsError(f"round {r}: all importance weights vanish")
        w = w / total
        pop = Population(r, particles, w, distances, eps, kernel_cov)
        populations.append(pop)
        if partial:
            break

    result = InferenceResult(
        method="smc",
        parameter_names=cg.parameter_names,
        samples=pop.particles,
        weights=pop.weights,
        distances=pop.distances,
        threshold=pop.threshold,
        n_sim=n_sim,
        root_seed=seed,
        batch_size=batch_size,
        elapsed_seconds=time.monotonic() - t0,
        partial=pop.particles.shape[0] < n_samples,
        extras={"populations": populations,
                "ess_per_round": [p.ess() for p in populations]},
    )
    return result


def _kernel_chol(kernel_cov):
    try:
        return np.linalg.cholesky(np.atleast_2d(kernel_cov))
    except np.linalg.LinAlgError as e:
        raise SingularKernelError(f"kernel covariance not PD: {e}") from e


def _propose_batch(pop, chol, d, seed, batch_index, round_index, batch_size, prior_lp):
    """Resample + perturb until the batch is full of in-support proposals.
    Out-of-support draws are re-proposed and never cost a simulation."""
    resample = rng_stream(seed, batch_index, f"__smc_resample_r{round_index}")
    perturb = rng_stream(seed, batch_index, f"__smc_perturb_r{round_index}")
    cdf = np.cumsum(pop.weights)
    cdf[-1] = 1.0
    out = np.empty((batch_size, d))
    filled = 0
    while filled < batch_size:
        anc = int(np.searchsorted(cdf, resample.uniform(1)[0], side="right"))
        anc = min(anc, len(cdf) - 1)
        z = perturb.normal(d)
        theta = pop.particles[anc] + chol @ z
        if prior_lp(theta) > -math.inf:
            out[filled] = theta
            filled += 1
    return out


def _proposals_as_precomputed(cg, proposals):
    """Split an n x d proposal matrix back into per-prior batch arrays."""
    pre = {}
    i = 0
    for name in cg.parameter_names:
        node = cg.node(name)
        spec = dist.DistSpec(node.op, node.args)
        d = spec.dim
        if d == 1:
            pre[name] = proposals[:, i]
        else:
            pre[name] = proposals[:, i:i + d]
        i += d
    return pre
