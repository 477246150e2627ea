"""Common result container shared by all inference methods."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class InferenceResult:
    method: str
    parameter_names: tuple
    samples: np.ndarray        # n_accept x d
    weights: np.ndarray        # sums to 1
    distances: np.ndarray
    threshold: float
    n_sim: int
    root_seed: int
    batch_size: int
    elapsed_seconds: float = 0.0
    partial: bool = False
    extras: dict = field(default_factory=dict)

    @property
    def n_accept(self) -> int:
        return self.samples.shape[0]

    def weighted_mean(self) -> np.ndarray:
        return self.weights @ self.samples

    def weighted_sd(self) -> np.ndarray:
        mu = self.weighted_mean()
        var = self.weights @ (self.samples - mu) ** 2
        return np.sqrt(var)

    def ess(self) -> float:
        return float(1.0 / np.sum(self.weights ** 2))


def stack_parameters(batches, parameter_names) -> np.ndarray:
    """Concatenate prior-node outputs over batches into an n x d matrix
    (vector-valued parameters contribute one column per component)."""
    cols = []
    for name in parameter_names:
        vals = np.concatenate([b.values[name] for b in batches])
        vals = vals.reshape(vals.shape[0], -1)
        cols.append(vals)
    return np.hstack(cols)
