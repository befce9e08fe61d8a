"""Per-step timing of the filters, shared by the benchmark script and tests."""
from __future__ import annotations

import time

import numpy as np

from .bocpd import BocpdFilter
from .bosd_filter import BosdFilter
from .model import HsmmParams
from .upm.gaussian import ConjugateGaussianUpm, NiwPrior


def step_seconds(make_filter, observations) -> float:
    """Median wall time of one ``step`` call over a fresh run of ``observations``."""
    filt = make_filter()
    clock = time.perf_counter
    times = np.empty(observations.shape[0])
    for i, y in enumerate(observations):
        t0 = clock()
        filt.step(y)
        times[i] = clock() - t0
    return float(np.median(times))


def best_medians(makers, observations, repeats: int = 5, warmup: int = 200) -> list[float]:
    """Best-of-``repeats`` median step time for each filter factory.

    Repeats are interleaved across factories so a burst of interference from
    other processes does not land on a single one; a short warm-up run first
    brings caches and clocks to a steady state.
    """
    observations = np.ascontiguousarray(observations, dtype=float)
    for make in makers:
        step_seconds(make, observations[:warmup])
    best = [np.inf] * len(makers)
    for _ in range(repeats):
        for i, make in enumerate(makers):
            best[i] = min(best[i], step_seconds(make, observations))
    return best


def conjugate_upm(k: int = 1, dim: int = 2) -> ConjugateGaussianUpm:
    return ConjugateGaussianUpm([NiwPrior(np.zeros(dim), 1.0, dim + 2.0, np.eye(dim)) for _ in range(k)])


def scaling_factors(mode: str, sizes=(64, 128, 256), length: int = 2000, k: int = 2, dim: int = 2,
                    seed: int = 0, repeats: int = 5) -> tuple[list[float], list[float]]:
    """Median step times at each ``D_max`` in ``sizes`` and the ratios between
    consecutive sizes, for ``mode`` ``"bocpd"`` or ``"bosd"`` with a
    duration-agnostic conjugate Gaussian model."""
    obs = np.random.default_rng(seed).normal(size=(length, dim))
    makers = []
    for d_max in sizes:
        if mode == "bocpd":
            upm = conjugate_upm(1, dim)
            hazard = np.full(d_max, 1.0 / 50.0)
            hazard[-1] = 1.0

            def make(hazard=hazard, upm=upm):
                return BocpdFilter(hazard, upm)
        elif mode == "bosd":
            a = np.full((k, k), 1.0 / (k - 1)) if k > 1 else np.ones((1, 1))
            np.fill_diagonal(a, 0.0 if k > 1 else 1.0)
            params = HsmmParams(np.full(k, 1.0 / k), a, np.full((k, d_max), 1.0 / d_max),
                                conjugate_upm(k, dim))

            def make(params=params):
                return BosdFilter(params)
        else:
            raise ValueError(f"unknown mode {mode!r}")
        makers.append(make)
    times = best_medians(makers, obs, repeats)
    return times, [b / a for a, b in zip(times, times[1:])]
