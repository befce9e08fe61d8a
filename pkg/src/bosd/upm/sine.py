"""Scaled-sine trajectory model.

A segment of state ``z`` and duration ``d`` emits
``y = (b_z, c_z) * sin(phase) + N(0, sigma2_z I)`` where the phase of the
observation at run length ``r`` is ``r / (d - 1)`` (0 when ``d == 1``), so
every realization sweeps the same [0, 1] interval whatever its duration.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import FitResult, StatelessBank, Upm, as_sequence, check_hypothesis, check_observation

MIN_VARIANCE = 1e-12


def phase(r, d):
    """Phase in [0, 1] of run length ``r`` within a segment of duration ``d``."""
    r = np.asarray(r, dtype=float)
    d = np.asarray(d, dtype=float)
    return np.where(d > 1, r / np.maximum(d - 1.0, 1.0), 0.0)


@dataclass(frozen=True)
class SineParams:
    b: float
    c: float
    sigma2: float


@dataclass(frozen=True)
class SineStats:
    r: int
    d: int


class ScaledSineUpm(Upm):
    kind = "scaled_sine"
    duration_dependent = True

    def __init__(self, states):
        self.states = [SineParams(float(s.b), float(s.c), float(s.sigma2)) for s in states]

    @property
    def n_states(self):
        return len(self.states)

    @property
    def dim(self):
        return 2

    def mean(self, r, d, z) -> np.ndarray:
        s = self.states[z]
        return np.array([s.b, s.c]) * np.sin(phase(r, d))

    def reset(self, z, d=1):
        return SineStats(0, d)

    def update(self, state, y):
        check_observation(y, 2)
        return SineStats(state.r + 1, state.d)

    def predictive_logpdf(self, y, r, d, z, state):
        check_hypothesis(r, d)
        y = check_observation(y, 2)
        s2 = self.states[z].sigma2
        resid = y - self.mean(r, d, z)
        return float(-np.log(2 * np.pi * s2) - 0.5 * resid @ resid / s2)

    def sample_segment(self, z, d, rng):
        s = self.states[z]
        wave = np.sin(phase(np.arange(d), d))
        mean = np.stack([s.b * wave, s.c * wave], axis=1)
        return mean + rng.normal(scale=np.sqrt(s.sigma2), size=(d, 2))

    def make_bank(self, d_max):
        return _SineBank(self, d_max)

    def restrict(self, states):
        return ScaledSineUpm([self.states[z] for z in states])

    def validate(self):
        problems = []
        for z, s in enumerate(self.states):
            if not (np.isfinite(s.b) and np.isfinite(s.c)):
                problems.append(f"upm state {z}: b and c must be finite")
            if not (np.isfinite(s.sigma2) and s.sigma2 > 0):
                problems.append(f"upm state {z}: sigma2 must be positive")
        return problems

    def to_dict(self):
        return {"kind": self.kind,
                "states": [{"b": s.b, "c": s.c, "sigma2": s.sigma2} for s in self.states]}

    @classmethod
    def from_dict(cls, block):
        return cls([SineParams(s["b"], s["c"], s["sigma2"]) for s in block["states"]])

    @classmethod
    def fit_mle(cls, segments, n_states, **options):
        """Least squares for ``b``, ``c`` against the known sine regressor and
        the per-state residual variance for ``sigma2``.  Segments must be complete
        (``len(obs) == d``)."""
        warnings: list[str] = []
        regress = [[] for _ in range(n_states)]
        targets = [[] for _ in range(n_states)]
        for z, obs, d in segments:
            obs = as_sequence(obs)
            regress[z].append(np.sin(phase(np.arange(obs.shape[0]), d)))
            targets[z].append(obs)
        fitted = []
        for z in range(n_states):
            if not regress[z]:
                raise ValueError(f"no segments labelled with state {z}")
            s = np.concatenate(regress[z])
            y = np.vstack(targets[z])
            ss = s @ s
            if ss > 0:
                b, c = (s @ y) / ss
            else:
                b = c = 0.0
                warnings.append(f"state {z}: all labelled phases are 0, amplitudes set to 0")
            resid = y - np.outer(s, [b, c])
            sigma2 = float(np.mean(resid ** 2))
            if sigma2 < MIN_VARIANCE:
                warnings.append(f"state {z}: residual variance floored at {MIN_VARIANCE:g}")
                sigma2 = MIN_VARIANCE
            fitted.append(SineParams(float(b), float(c), sigma2))
        return FitResult(cls(fitted), warnings)


class _SineBank(StatelessBank):
    duration_dependent = True

    def __init__(self, upm: ScaledSineUpm, d_max: int):
        d_idx, r = np.meshgrid(np.arange(d_max), np.arange(d_max), indexing="ij")
        self.wave = np.where(r <= d_idx, np.sin(phase(r, d_idx + 1)), 0.0)
        self.b = np.array([s.b for s in upm.states])[:, None, None]
        self.c = np.array([s.c for s in upm.states])[:, None, None]
        s2 = np.array([s.sigma2 for s in upm.states])[:, None, None]
        self.half_prec = 0.5 / s2
        self.const = -np.log(2 * np.pi * s2)

    def logpdf(self, y):
        sq = (y[0] - self.b * self.wave) ** 2 + (y[1] - self.c * self.wave) ** 2
        return self.const - self.half_prec * sq
