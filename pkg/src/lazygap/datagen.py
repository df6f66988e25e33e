"""Seeded sampling from the two data models.

Batches are drawn from explicit (seed, step) substreams of a Philox
counter-based generator, so runs are reproducible and parallel workers can
draw non-overlapping streams without coordination.  Labels in the quadratic
model are exact, noiseless functions of the features.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectra import MixtureMg, TargetQf


@dataclass(frozen=True, eq=False)
class SampleBatch:
    X: np.ndarray  # n x d
    y: np.ndarray  # length n


def _rng_at(seed: int, step: int) -> np.random.Generator:
    # One 2^128-wide counter block per step: streams never overlap.
    return np.random.Generator(np.random.Philox(key=int(seed), counter=int(step) << 128))


def _chol_factors(mix: MixtureMg):
    s1, s2 = mix.class_covariances()
    return np.linalg.cholesky(s1), np.linalg.cholesky(s2)


def batch_at(measure, n: int, seed: int, step: int = 0,
             _factors=None) -> SampleBatch:
    """Draw the batch belonging to substream (seed, step)."""
    if n < 1:
        raise ValueError("batch size must be >= 1")
    rng = _rng_at(seed, step)
    if isinstance(measure, TargetQf):
        X = rng.standard_normal((n, measure.d))
        y = measure.b0 + np.einsum("ij,jk,ik->i", X, measure.B, X)
        return SampleBatch(X=X, y=y)
    if isinstance(measure, MixtureMg):
        L1, L2 = _factors if _factors is not None else _chol_factors(measure)
        y = rng.integers(0, 2, size=n) * 2 - 1
        Z = rng.standard_normal((n, measure.d))
        X = np.where((y > 0)[:, None], Z @ L1.T, Z @ L2.T)
        return SampleBatch(X=X, y=y.astype(float))
    raise TypeError(f"unknown measure type {type(measure).__name__}")


def sample_batch(measure, n: int, seed: int = 0) -> SampleBatch:
    """Draw n iid samples (x_i, y_i); bit-identical for identical seeds."""
    return batch_at(measure, n, seed, step=0)


class BatchStream:
    """Per-step batches for one-pass training over a fixed measure."""

    def __init__(self, measure, batch: int, seed: int):
        self.measure = measure
        self.batch = batch
        self.seed = seed
        self._factors = _chol_factors(measure) if isinstance(measure, MixtureMg) else None

    def at(self, step: int) -> SampleBatch:
        return batch_at(self.measure, self.batch, self.seed, step, self._factors)
