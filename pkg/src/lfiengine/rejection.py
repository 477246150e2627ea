"""Rejection ABC: simulate from the prior, keep parameters whose distance
to the observed summaries clears a threshold or quantile cut."""

from __future__ import annotations

import math
import time

import numpy as np

from .errors import BadQuantileError, EmptyInputError
from .executor import parallel_run
from .results import InferenceResult, stack_parameters


def threshold_from_quantile(distances, q: float) -> float:
    """The ceil(q*n)-th smallest distance.  Acceptance by `d <= threshold`
    takes every tie at the cut (deterministic, order-independent)."""
    d = np.sort(np.asarray(distances, dtype=float).ravel())
    if d.size == 0:
        raise EmptyInputError("no distances")
    if not 0.0 < q <= 1.0:
        raise BadQuantileError(f"quantile must be in (0, 1], got {q}")
    k = math.ceil(q * d.size)
    return float(d[k - 1])


def _accept_order(distances):
    """Indices sorted by (distance, position): a stable ascending order."""
    d = np.asarray(distances)
    return np.lexsort((np.arange(d.size), d))


def sample_rejection(cg, n_samples: int, quantile: float = None,
                     threshold: float = None, budget: int = None,
                     seed: int = 0, batch_size: int = 100, workers: int = 1,
                     store=None) -> InferenceResult:
    """Rejection sampling against a compiled graph.

    Exactly one of ``quantile`` and ``threshold`` selects the mode.  In
    quantile mode ceil(n_samples / quantile) simulations are run (rounded
    up to whole batches) and the best are kept; in threshold mode batches
    are consumed until n_samples distances fall at or below ``threshold``
    or the budget runs out (the result is then flagged partial).
    Deterministic given (seed, batch_size); worker count never changes the
    output.
    """
    if (quantile is None) == (threshold is None):
        raise ValueError("specify exactly one of quantile / threshold")
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    dist_name = cg.distance_name
    if dist_name is None:
        raise ValueError("graph has no distance node")
    t0 = time.monotonic()

    if quantile is not None:
        if not 0.0 < quantile <= 1.0:
            raise BadQuantileError(f"quantile must be in (0, 1], got {quantile}")
        n_sim = math.ceil(n_samples / quantile)
        n_batches = math.ceil(n_sim / batch_size)
        batches = parallel_run(cg, seed, batch_size, range(n_batches),
                               workers=workers, store=store)
        distances = np.concatenate([b.values[dist_name] for b in batches]).ravel()
        n_total = distances.size
        # target exactly n_samples acceptances (ties all-in)
        eps = threshold_from_quantile(distances, n_samples / n_total)
        order = _accept_order(distances)
        keep = order[distances[order] <= eps]
        partial = False
    else:
        eps = float(threshold)
        batches = []
        distances = np.empty(0)
        n_accept_cum = []
        index = 0
        partial = True
        while True:
            if budget is not None and index * batch_size >= budget:
                break
            chunk_n = workers
            if budget is not None:
                chunk_n = min(chunk_n, max(1, math.ceil(budget / batch_size) - index))
            chunk = parallel_run(cg, seed, batch_size,
                                 range(index, index + chunk_n),
                                 workers=workers, store=store)
            index += chunk_n
            batches.extend(chunk)
            # stopping batch depends only on batch contents, not on chunking
            stop_at = None
            count = n_accept_cum[-1] if n_accept_cum else 0
            for b in chunk:
                count += int(np.sum(b.values[dist_name].ravel() <= eps))
                n_accept_cum.append(count)
                if count >= n_samples and stop_at is None:
                    stop_at = b.batch_index
            if stop_at is not None:
                batches = batches[: stop_at + 1]
                partial = False
                break
        distances = (np.concatenate([b.values[dist_name] for b in batches]).ravel()
                     if batches else np.empty(0))
        order = _accept_order(distances)
        keep = order[distances[order] <= eps]
        keep = keep[:n_samples]

    params = stack_parameters(batches, cg.parameter_names) if batches else \
        np.empty((0, len(cg.parameter_names)))
    samples = params[keep]
    n_accept = samples.shape[0]
    weights = (np.full(n_accept, 1.0 / n_accept) if n_accept else np.empty(0))
    return InferenceResult(
        method="rejection",
        parameter_names=cg.parameter_names,
        samples=samples,
        weights=weights,
        distances=distances[keep],
        threshold=eps,
        n_sim=len(batches) * batch_size,
        root_seed=seed,
        batch_size=batch_size,
        elapsed_seconds=time.monotonic() - t0,
        partial=partial,
    )
