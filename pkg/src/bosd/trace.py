"""In-memory record of a filtering run."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bosd_filter import BosdFilter, StepMarginals, map_state_sequence


@dataclass
class PosteriorTrace:
    """Per-step marginals stacked over time; rows align with observations."""

    run_length: np.ndarray
    residual: np.ndarray
    state: np.ndarray
    log_evidence: np.ndarray

    @property
    def map_states(self) -> np.ndarray:
        return map_state_sequence(self.state)

    @property
    def run_length_cdf(self) -> np.ndarray:
        return np.clip(np.cumsum(self.run_length, axis=1), 0.0, 1.0)

    @property
    def residual_cdf(self) -> np.ndarray:
        return np.clip(np.cumsum(self.residual, axis=1), 0.0, 1.0)

    def __len__(self):
        return self.log_evidence.shape[0]

    @classmethod
    def from_steps(cls, steps: list[StepMarginals]) -> PosteriorTrace:
        return cls(np.array([s.run_length for s in steps]), np.array([s.residual for s in steps]),
                   np.array([s.state for s in steps]), np.array([s.log_evidence for s in steps]))


def filter_sequence(params, observations) -> PosteriorTrace:
    """Run a fresh segment filter over ``observations``."""
    return PosteriorTrace.from_steps(BosdFilter(params).run(observations))


def credible_interval(pmf, mass: float = 0.95) -> tuple[np.ndarray, np.ndarray]:
    """Central credible interval ``[lo, hi]`` per row of a (T, L) pmf stack.

    ``lo`` is the first index whose CDF exceeds ``(1 - mass) / 2`` and ``hi``
    the first whose CDF reaches ``(1 + mass) / 2``.
    """
    cdf = np.cumsum(np.atleast_2d(pmf), axis=1)
    tail = (1.0 - mass) / 2.0
    lo = np.argmax(cdf > tail, axis=1)
    hi = np.argmax(cdf >= 1.0 - tail - 1e-12, axis=1)
    return lo, hi


def entropy(pmf) -> np.ndarray:
    """Shannon entropy (nats) per row."""
    p = np.atleast_2d(pmf)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log(p), 0.0)
    return -terms.sum(axis=1)
